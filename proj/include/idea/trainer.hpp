#pragma once

// End-to-end training loop: encode the image, recognize tags from spatial
// tokens, correct missing tags, compose the corrected tags into extra text,
// re-encode the combined text, align both modalities contrastively, step the
// optimizer. Deterministic given the seed; resumable from checkpoints.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "idea/checkpoint.hpp"
#include "idea/config.hpp"
#include "idea/core/optim.hpp"
#include "idea/data.hpp"
#include "idea/losses.hpp"
#include "idea/model.hpp"
#include "idea/supervision.hpp"

namespace idea {

struct StepRecord {
  long step = 0;
  double l_mlr = 0.0;
  double l_itc = 0.0;
  double l_total = 0.0;
  long pseudo_count = 0;
  double learning_rate = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  long step_end = 0;  // global step after the epoch's last batch
  bool has_precision = false;
  double pseudo_precision = 0.0;  // over pseudo tags added during this epoch
  double pseudo_recall = 0.0;     // against planted missing bits, when known
  long pseudo_count = 0;
};

struct TrainResult {
  Model model;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct TrainSinks {
  std::ostream* metrics = nullptr;
  std::string checkpoint_dir;   // empty = no checkpoints written
  int stop_after_epoch = 0;     // 0 = run to completion
};

inline std::string metrics_header() {
  return "# step\tl_mlr\tl_itc\tl_total\tpseudo_count\tlearning_rate";
}

inline std::string format_step_record(const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%ld\t%.17g\t%.17g\t%.17g\t%ld\t%.17g", r.step, r.l_mlr, r.l_itc,
                r.l_total, r.pseudo_count, r.learning_rate);
  return buf;
}

// ---------------------------------------------------------------------------
// checkpoint <-> model

inline Checkpoint make_checkpoint(const Model& model, const TrainConfig& config, core::AdamW* opt,
                                  int epoch_next, long global_step) {
  Checkpoint c;
  c.config_text = config.to_kv().to_text();
  c.lexicon_text = lexicon_to_string(model.lexicon);
  c.vocab = model.tokenizer.tokens();
  core::ParamList params = model.parameters();
  for (auto& [name, t] : params.items) c.tensors.emplace_back(name, t.value());
  if (opt) {
    std::size_t i = 0;
    for (auto& [name, t] : params.items) {
      if (!t.requires_grad()) continue;
      c.opt_state.emplace_back("m:" + name, opt->moment1(i));
      c.opt_state.emplace_back("v:" + name, opt->moment2(i));
      ++i;
    }
  }
  std::ostringstream meta;
  meta << "epoch_next=" << epoch_next << "\nglobal_step=" << global_step
       << "\nadam_steps=" << (opt ? opt->step_count() : 0) << "\n";
  c.meta_text = meta.str();
  return c;
}

inline Model model_from_checkpoint(const Checkpoint& ckpt) {
  TrainConfig cfg = TrainConfig::from_kv(KvConfig::from_text(ckpt.config_text));
  TagLexicon lexicon = lexicon_from_string(ckpt.lexicon_text);
  TextTokenizer tokenizer = TextTokenizer::from_token_list(ckpt.vocab);
  Model model = Model::create(cfg.encoder, cfg.head, std::move(lexicon), std::move(tokenizer),
                              cfg.hyper.temperature_init, cfg.seed);
  core::ParamList params = model.parameters();
  if (params.items.size() != ckpt.tensors.size())
    throw std::runtime_error("checkpoint: expected " + std::to_string(params.items.size()) +
                             " tensors, found " + std::to_string(ckpt.tensors.size()));
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    auto& [name, t] = params.items[i];
    const auto& [ck_name, value] = ckpt.tensors[i];
    if (name != ck_name)
      throw std::runtime_error("checkpoint: tensor name mismatch '" + ck_name + "' vs '" + name +
                               "'");
    if (t.value().rows() != value.rows() || t.value().cols() != value.cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    t.value() = value;
  }
  return model;
}

inline void save_train_checkpoint(const std::string& path, const Model& model,
                                  const TrainConfig& config, core::AdamW& opt, int epoch_next,
                                  long global_step) {
  write_checkpoint(make_checkpoint(model, config, &opt, epoch_next, global_step), path);
}

// ---------------------------------------------------------------------------

inline TrainResult train(const std::vector<ImageTextRecord>& dataset, const TagLexicon& lexicon,
                         const TrainConfig& config, const TrainSinks& sinks = {},
                         const std::string& resume_from = "") {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (lexicon.num_classes() < 1) throw std::invalid_argument("train: lexicon is empty");

  TagMatcher matcher(lexicon, config.strict_compounds);
  const long n = static_cast<long>(dataset.size());
  std::vector<TagVector> extracted;
  std::vector<std::optional<TagVector>> full;
  extracted.reserve(dataset.size());
  for (const auto& rec : dataset) {
    extracted.push_back(matcher.extract(rec.caption));
    if (rec.full_tags)
      full.push_back(rec.full_tags);
    else if (!rec.full_tag_names.empty())
      full.push_back(tags_from_names(rec.full_tag_names, lexicon));
    else
      full.push_back(std::nullopt);
  }
  std::vector<TagVector> current = extracted;  // mutated only with persist_pseudo
  ClassWeights weights = class_weights(lexicon);

  core::AdamWConfig ocfg{config.adam_beta1, config.adam_beta2, config.adam_eps,
                         config.weight_decay};
  Model model;
  int start_epoch = 0;
  long global_step = 0;
  bool resuming = !resume_from.empty();
  Checkpoint resume_ckpt;
  if (resuming) {
    if (config.persist_pseudo)
      throw std::runtime_error("train: resume with persist_pseudo is not supported");
    resume_ckpt = read_checkpoint(resume_from);
    if (resume_ckpt.lexicon_text != lexicon_to_string(lexicon)) {
      TagLexicon ck_lex = lexicon_from_string(resume_ckpt.lexicon_text);
      throw std::runtime_error("resume: checkpoint lexicon does not match (C=" +
                               std::to_string(ck_lex.num_classes()) + " vs C=" +
                               std::to_string(lexicon.num_classes()) + ")");
    }
    if (resume_ckpt.config_text != config.to_kv().to_text())
      throw std::runtime_error("resume: checkpoint config does not match");
    model = model_from_checkpoint(resume_ckpt);
    KvConfig meta = KvConfig::from_text(resume_ckpt.meta_text);
    start_epoch = static_cast<int>(meta.get_long("epoch_next", 0));
    global_step = meta.get_long("global_step", 0);
  } else {
    std::vector<std::string> captions, names;
    for (const auto& rec : dataset) captions.push_back(rec.caption);
    for (const auto& e : lexicon.entries) names.push_back(e.name);
    TextTokenizer tokenizer = TextTokenizer::build(captions, names);
    model = Model::create(config.encoder, config.head, lexicon, tokenizer,
                          config.hyper.temperature_init, config.seed);
  }

  core::AdamW opt(model.trainable_parameters(), ocfg);
  if (resuming) {
    core::ParamList params = model.parameters();
    std::vector<std::string> trainable_names;
    for (auto& [name, t] : params.items)
      if (t.requires_grad()) trainable_names.push_back(name);
    if (resume_ckpt.opt_state.size() != trainable_names.size() * 2)
      throw std::runtime_error("resume: optimizer state size mismatch");
    for (std::size_t i = 0; i < trainable_names.size(); ++i) {
      const auto& [mname, mval] = resume_ckpt.opt_state[2 * i];
      const auto& [vname, vval] = resume_ckpt.opt_state[2 * i + 1];
      if (mname != "m:" + trainable_names[i] || vname != "v:" + trainable_names[i])
        throw std::runtime_error("resume: optimizer state name mismatch at '" + mname + "'");
      opt.moment1(i) = mval;
      opt.moment2(i) = vval;
    }
    opt.set_step_count(KvConfig::from_text(resume_ckpt.meta_text).get_long("adam_steps", 0));
  }

  const long steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total_steps = steps_per_epoch * config.epochs;
  const int max_len = config.encoder.text_max_len;

  TrainResult result;
  if (sinks.metrics && !resuming) *sinks.metrics << metrics_header() << "\n";

  for (int e = start_epoch; e < config.epochs; ++e) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 erng(core::derive_seed(config.seed, 0xDA7AULL, static_cast<std::uint64_t>(e)));
    std::shuffle(order.begin(), order.end(), erng);

    long ep_tp = 0, ep_fp = 0, ep_missing = 0, ep_pseudo = 0;

    for (long b = 0; b < steps_per_epoch; ++b) {
      const long lo = b * config.batch_size;
      const long hi = std::min(n, lo + config.batch_size);
      const long bsz = hi - lo;

      std::vector<core::Tensor> logit_rows, zi_rows;
      std::vector<TagVector> batch_targets;
      for (long j = 0; j < bsz; ++j) {
        const ImageTextRecord& rec = dataset[order[lo + j]];
        Image img = augment(rec.image,
                            core::derive_seed(config.seed, 0xA06ULL,
                                              static_cast<std::uint64_t>(e) * n + lo + j),
                            config.augment_mode);
        EncoderOutput enc = model.encode_image(img);
        logit_rows.push_back(model.tag_logits(enc.spatial));
        zi_rows.push_back(model.image_embedding(enc));
        batch_targets.push_back(current[order[lo + j]]);
      }
      core::Tensor logits = core::stack_rows(logit_rows);
      MLRLossResult mlr =
          mlr_loss(logits, batch_targets, weights, config.hyper, e, config.batch_reduction);

      std::vector<std::string> t2t(bsz);
      if (config.tag2text) {
        for (long j = 0; j < bsz; ++j)
          t2t[j] = compose_tag2text(batch_targets[j], mlr.report.corrected_targets[j], lexicon,
                                    config.retain_original, lexicon.removed_top);
      }

      std::vector<core::Tensor> zt_rows;
      Matrix y_i2t, y_t2i;
      if (!config.alt_target_mode) {
        for (long j = 0; j < bsz; ++j) {
          const ImageTextRecord& rec = dataset[order[lo + j]];
          TokenizedText toks = tokenize_pair(concat_text(rec.caption, t2t[j]), model.tokenizer,
                                             max_len);
          zt_rows.push_back(model.text_embedding(model.encode_text_ids(toks.ids)));
        }
        y_i2t = build_itc_targets(bsz, mlr.report.pseudo_mask);
        y_t2i = y_i2t;
      } else {
        for (long j = 0; j < bsz; ++j) {
          const ImageTextRecord& rec = dataset[order[lo + j]];
          TokenizedText toks = model.tokenizer.encode(rec.caption, max_len);
          zt_rows.push_back(model.text_embedding(model.encode_text_ids(toks.ids)));
        }
        std::vector<std::uint8_t> nonempty(bsz, 0);
        for (long j = 0; j < bsz; ++j) nonempty[j] = t2t[j].empty() ? 0 : 1;
        AltItcTargets alt = build_itc_targets_alt(bsz, nonempty);
        for (int owner : alt.tag_text_owner) {
          TokenizedText toks = model.tokenizer.encode(t2t[owner], max_len);
          zt_rows.push_back(model.text_embedding(model.encode_text_ids(toks.ids)));
        }
        y_i2t = alt.y_i2t;
        y_t2i = alt.y_t2i;
      }

      core::Tensor itc =
          itc_loss_graph(core::stack_rows(zi_rows), core::stack_rows(zt_rows),
                         model.log_temperature, y_i2t, y_t2i, config.hyper.temperature_min,
                         config.hyper.temperature_max);
      core::Tensor total = core::add(core::scale(mlr.loss, config.mlr_loss_weight),
                                     core::scale(itc, config.itc_loss_weight));
      double l_total = total.item();
      if (!std::isfinite(l_total)) {
        std::string ids;
        for (long j = 0; j < bsz; ++j) {
          if (j) ids += ",";
          ids += dataset[order[lo + j]].id;
        }
        throw std::runtime_error("non-finite loss at step " + std::to_string(global_step) +
                                 "; batch ids: " + ids);
      }

      opt.zero_grad();
      core::backward(total);
      double lr = core::lr_schedule(global_step, total_steps, config.warmup_steps, config.max_lr);
      opt.step(lr);

      StepRecord rec{global_step, mlr.report.loss, itc.item(), l_total,
                     mlr.report.pseudo_count, lr};
      result.steps.push_back(rec);
      if (sinks.metrics) *sinks.metrics << format_step_record(rec) << "\n";

      for (long j = 0; j < bsz; ++j) {
        int idx = order[lo + j];
        const TagVector& corr = mlr.report.corrected_targets[j];
        if (full[idx]) {
          for (std::size_t cbit = 0; cbit < corr.bits.size(); ++cbit) {
            bool newbit = corr.bits[cbit] && !batch_targets[j].bits[cbit];
            if (newbit) (full[idx]->bits[cbit] ? ++ep_tp : ++ep_fp);
            if (full[idx]->bits[cbit] && !extracted[idx].bits[cbit]) ++ep_missing;
          }
        }
        ep_pseudo += corr.count() - batch_targets[j].count();
        if (config.persist_pseudo) {
          for (std::size_t cbit = 0; cbit < corr.bits.size(); ++cbit)
            current[idx].bits[cbit] |= corr.bits[cbit];
          if (corr.source == TagVector::Source::corrected)
            current[idx].source = TagVector::Source::corrected;
        }
      }
      ++global_step;
    }

    EpochRecord er;
    er.epoch = e;
    er.step_end = global_step;
    er.pseudo_count = ep_pseudo;
    if (ep_tp + ep_fp > 0) {
      er.has_precision = true;
      er.pseudo_precision = static_cast<double>(ep_tp) / static_cast<double>(ep_tp + ep_fp);
    }
    er.pseudo_recall = ep_missing > 0 ? static_cast<double>(ep_tp) / static_cast<double>(ep_missing)
                                      : 0.0;
    result.epochs.push_back(er);

    if (!sinks.checkpoint_dir.empty()) {
      bool periodic = config.checkpoint_every_epochs > 0 &&
                      (e + 1) % config.checkpoint_every_epochs == 0;
      bool final_epoch = e + 1 == config.epochs;
      bool stop_here = sinks.stop_after_epoch > 0 && e + 1 >= sinks.stop_after_epoch;
      if (periodic || final_epoch || stop_here) {
        std::filesystem::create_directories(sinks.checkpoint_dir);
        std::string path = sinks.checkpoint_dir + "/ckpt_epoch" + std::to_string(e + 1) + ".bin";
        save_train_checkpoint(path, model, config, opt, e + 1, global_step);
      }
    }
    if (sinks.stop_after_epoch > 0 && e + 1 >= sinks.stop_after_epoch) break;
  }

  result.model = std::move(model);
  return result;
}

}  // namespace idea
