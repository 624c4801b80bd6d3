// Command-line entry point: lexicon construction, tag extraction, synthetic
// fixtures, training, and the evaluation protocols, wired for reproducible
// runs (every subcommand snapshots its inputs into a run manifest).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "idea/checkpoint.hpp"
#include "idea/config.hpp"
#include "idea/data.hpp"
#include "idea/eval.hpp"
#include "idea/lexicon.hpp"
#include "idea/manifest.hpp"
#include "idea/model.hpp"
#include "idea/supervision.hpp"
#include "idea/tagger.hpp"
#include "idea/trainer.hpp"
#include "idea/version.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_nonempty_lines(const std::string& path) {
  std::vector<std::string> out;
  for (auto& l : read_lines(path))
    if (!l.empty()) out.push_back(l);
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

struct BuildLexiconArgs {
  std::string captions, vocab, out;
  long min_count = 6;
  long remove_top = 0;
  bool strict = false;
};

int run_build_lexicon(const BuildLexiconArgs& a) {
  idea::RunManifest manifest;
  manifest.command = "build-lexicon";
  manifest.add_input(a.captions);
  manifest.add_input(a.vocab);
  manifest.config["min_count"] = std::to_string(a.min_count);
  manifest.config["remove_top"] = std::to_string(a.remove_top);
  manifest.config["strict_compounds"] = a.strict ? "true" : "false";
  manifest.outputs = {a.out};
  manifest.write(a.out + ".manifest.json");

  auto lexicon = idea::build_lexicon(read_lines(a.captions), read_nonempty_lines(a.vocab),
                                     a.min_count, a.remove_top, a.strict);
  idea::save_lexicon(lexicon, a.out);
  std::cout << "lexicon: " << lexicon.num_classes() << " classes ("
            << lexicon.removed_top.size() << " removed as most frequent)\n";
  return 0;
}

struct ExtractTagsArgs {
  std::string lexicon, captions, out;
  bool strict = false;
};

int run_extract_tags(const ExtractTagsArgs& a) {
  idea::RunManifest manifest;
  manifest.command = "extract-tags";
  manifest.add_input(a.lexicon);
  manifest.add_input(a.captions);
  manifest.outputs = {a.out};
  manifest.write(a.out + ".manifest.json");

  idea::TagLexicon lexicon = idea::load_lexicon(a.lexicon);
  idea::TagMatcher matcher(lexicon, a.strict);
  std::ostringstream out;
  auto lines = read_lines(a.captions);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    idea::TagVector v = matcher.extract(lines[i]);
    out << (i + 1) << '\t';
    bool first = true;
    for (std::size_t j = 0; j < v.bits.size(); ++j) {
      if (!v.bits[j]) continue;
      if (!first) out << ',';
      out << lexicon.entries[j].name;
      first = false;
    }
    out << '\n';
  }
  write_text(a.out, out.str());
  return 0;
}

struct SynthArgs {
  std::string lexicon, out;
  std::uint64_t seed = 0;
  int n = 64;
  double missing_rate = 0.0;
  int size = 64;
};

int run_synth(const SynthArgs& a) {
  idea::RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = a.seed;
  manifest.add_input(a.lexicon);
  manifest.config["n"] = std::to_string(a.n);
  manifest.config["missing_rate"] = std::to_string(a.missing_rate);
  manifest.config["size"] = std::to_string(a.size);
  manifest.outputs = {a.out + "/corpus.jsonl", a.out + "/images"};
  manifest.write(a.out + "/manifest.json");

  idea::TagLexicon lexicon = idea::load_lexicon(a.lexicon);
  auto records = idea::synth_fixture(a.seed, a.n, lexicon, a.missing_rate, a.size);
  idea::save_corpus(records, a.out);
  std::cout << "wrote " << records.size() << " records under " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, corpus, lexicon, out, resume;
  std::vector<std::string> overrides;
  long seed = -1;
  int stop_after_epoch = 0;
};

int run_train(const TrainArgs& a) {
  idea::KvConfig kv = idea::KvConfig::from_file(a.config);
  kv.apply_overrides(a.overrides);
  if (a.seed >= 0) kv.set("seed", std::to_string(a.seed));
  idea::TrainConfig config = idea::TrainConfig::from_kv(kv);
  config.validate();

  idea::RunManifest manifest;
  manifest.command = "train";
  manifest.seed = config.seed;
  manifest.add_input(a.config);
  manifest.add_input(a.corpus);
  manifest.add_input(a.lexicon);
  if (!a.resume.empty()) manifest.add_input(a.resume);
  idea::KvConfig snapshot = config.to_kv();
  for (auto& [k, v] : snapshot.items()) manifest.config[k] = v;
  manifest.outputs = {a.out + "/config.cfg", a.out + "/metrics.tsv", a.out + "/checkpoints"};
  manifest.write(a.out + "/manifest.json");
  write_text(a.out + "/config.cfg", config.to_kv().to_text());

  idea::TagLexicon lexicon = idea::load_lexicon(a.lexicon);
  auto records = idea::load_corpus(a.corpus, config.encoder.image_size);

  std::ofstream metrics(a.out + "/metrics.tsv", a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::runtime_error("cannot write metrics under: " + a.out);
  idea::TrainSinks sinks;
  sinks.metrics = &metrics;
  sinks.checkpoint_dir = a.out + "/checkpoints";
  sinks.stop_after_epoch = a.stop_after_epoch;

  auto result = idea::train(records, lexicon, config, sinks, a.resume);
  std::cout << "trained " << result.steps.size() << " steps; final l_total="
            << (result.steps.empty() ? 0.0 : result.steps.back().l_total) << "\n";
  return 0;
}

idea::Model load_model(const std::string& checkpoint_path) {
  return idea::model_from_checkpoint(idea::read_checkpoint(checkpoint_path));
}

struct ZeroShotArgs {
  std::string checkpoint, corpus, classes, prompts, out;
  bool single_template = false;
};

int run_eval_zeroshot(const ZeroShotArgs& a) {
  if (a.prompts.empty() && !a.single_template)
    throw std::runtime_error("provide --prompts FILE or --single-template");
  idea::RunManifest manifest;
  manifest.command = "eval-zeroshot";
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.corpus);
  manifest.add_input(a.classes);
  if (!a.prompts.empty()) manifest.add_input(a.prompts);
  manifest.outputs = {a.out + "/zeroshot.tsv", a.out + "/per_class.tsv"};
  manifest.write(a.out + "/manifest.json");

  idea::Model model = load_model(a.checkpoint);
  auto records = idea::load_corpus(a.corpus, model.ecfg.image_size);
  auto class_names = read_nonempty_lines(a.classes);
  idea::PromptSet prompts = a.single_template ? idea::PromptSet::single()
                                              : idea::PromptSet::from_file(a.prompts);

  std::vector<int> labels;
  idea::core::Matrix embeddings(static_cast<long>(records.size()), model.ecfg.proj_dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = std::find(class_names.begin(), class_names.end(), records[i].caption);
    if (it == class_names.end())
      throw std::runtime_error("record '" + records[i].id + "' caption is not a known class: " +
                               records[i].caption);
    labels.push_back(static_cast<int>(it - class_names.begin()));
    embeddings.row(static_cast<long>(i)) =
        model.image_embedding(model.encode_image(records[i].image)).value().row(0);
  }
  auto res = idea::zero_shot_classify(embeddings, labels, class_names, prompts, model);

  double seen_acc = 0.0, unseen_acc = 0.0;
  long seen_n = 0, unseen_n = 0;
  for (std::size_t j = 0; j < class_names.size(); ++j) {
    if (res.seen_mask[j]) { seen_acc += res.per_class_accuracy(static_cast<long>(j)); ++seen_n; }
    else { unseen_acc += res.per_class_accuracy(static_cast<long>(j)); ++unseen_n; }
  }
  std::ostringstream summary;
  summary << "top1\t" << res.top1 << "\ntop5\t" << res.top5 << "\nseen_classes\t" << seen_n
          << "\nunseen_classes\t" << unseen_n << "\nseen_mean_acc\t"
          << (seen_n ? seen_acc / seen_n : 0.0) << "\nunseen_mean_acc\t"
          << (unseen_n ? unseen_acc / unseen_n : 0.0) << "\n";
  write_text(a.out + "/zeroshot.tsv", summary.str());
  std::ostringstream per_class;
  for (std::size_t j = 0; j < class_names.size(); ++j)
    per_class << class_names[j] << '\t' << res.per_class_accuracy(static_cast<long>(j)) << '\t'
              << (res.seen_mask[j] ? "seen" : "unseen") << '\n';
  write_text(a.out + "/per_class.tsv", per_class.str());
  std::cout << summary.str();
  return 0;
}

struct EvalMlrArgs {
  std::string checkpoint, corpus, out;
  double threshold = 0.5;
  std::string gt = "tags";
};

int run_eval_mlr(const EvalMlrArgs& a) {
  idea::RunManifest manifest;
  manifest.command = "eval-mlr";
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.corpus);
  manifest.config["threshold"] = std::to_string(a.threshold);
  manifest.config["gt"] = a.gt;
  manifest.outputs = {a.out + "/mlr.tsv"};
  manifest.write(a.out + "/manifest.json");

  idea::Model model = load_model(a.checkpoint);
  auto records = idea::load_corpus(a.corpus, model.ecfg.image_size);
  const long c = model.lexicon.num_classes();
  idea::core::Matrix probs(static_cast<long>(records.size()), c);
  idea::core::Matrix gt(static_cast<long>(records.size()), c);
  idea::TagMatcher matcher(model.lexicon);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto enc = model.encode_image(records[i].image);
    probs.row(static_cast<long>(i)) =
        idea::sigmoid_probs(model.tag_logits(enc.spatial).value()).row(0);
    idea::TagVector tags;
    if (a.gt == "tags") {
      if (records[i].full_tag_names.empty())
        throw std::runtime_error("record '" + records[i].id +
                                 "' has no tags field; use --gt caption");
      tags = idea::tags_from_names(records[i].full_tag_names, model.lexicon);
    } else {
      tags = matcher.extract(records[i].caption);
    }
    for (long j = 0; j < c; ++j) gt(static_cast<long>(i), j) = tags.bits[static_cast<std::size_t>(j)];
  }
  auto m = idea::multilabel_metrics(probs, gt, a.threshold);
  std::ostringstream out;
  out << "mAP\t" << m.mAP << "\nCP\t" << m.CP << "\nCR\t" << m.CR << "\nCF1\t" << m.CF1 << "\nOP\t"
      << m.OP << "\nOR\t" << m.OR << "\nOF1\t" << m.OF1 << "\n";
  write_text(a.out + "/mlr.tsv", out.str());
  std::cout << out.str();
  return 0;
}

struct FlopsArgs {
  std::string config, out;
  long num_classes = 0;
};

int run_estimate_flops(const FlopsArgs& a) {
  idea::KvConfig kv = idea::KvConfig::from_file(a.config);
  idea::TrainConfig config = idea::TrainConfig::from_kv(kv);
  long c = a.num_classes > 0 ? a.num_classes : kv.get_long("num_classes", 0);
  if (c <= 0) throw std::runtime_error("estimate-flops: set num_classes in the config or pass --num-classes");
  auto est = idea::flop_estimate(config.encoder, config.head, static_cast<int>(c));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%.4f\n", est.encoder_gflops, est.head_gflops,
                est.overhead_percent);
  std::cout << buf;
  if (!a.out.empty()) {
    idea::RunManifest manifest;
    manifest.command = "estimate-flops";
    manifest.add_input(a.config);
    manifest.config["num_classes"] = std::to_string(c);
    manifest.outputs = {a.out + "/flops.tsv"};
    manifest.write(a.out + "/manifest.json");
    write_text(a.out + "/flops.tsv", buf);
  }
  return 0;
}

struct PlotSimArgs {
  std::string checkpoint, corpus, out;
  int bins = 50;
};

int run_plot_sim(const PlotSimArgs& a) {
  idea::RunManifest manifest;
  manifest.command = "plot-sim";
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.corpus);
  manifest.config["bins"] = std::to_string(a.bins);
  manifest.outputs = {a.out + "/sim_hist.tsv"};
  manifest.write(a.out + "/manifest.json");

  idea::Model model = load_model(a.checkpoint);
  auto records = idea::load_corpus(a.corpus, model.ecfg.image_size);
  auto hist = idea::similarity_distribution(records, model, a.bins);
  write_text(a.out + "/sim_hist.tsv", hist.to_text());
  std::cout << hist.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vision-language pre-training with online multi-label recognition"};
  app.set_version_flag("--version", idea::kVersion);
  app.require_subcommand(1);

  BuildLexiconArgs bl;
  auto* cmd_bl = app.add_subcommand("build-lexicon", "build a tag lexicon from captions");
  cmd_bl->add_option("--captions", bl.captions, "caption file, one per line")->required();
  cmd_bl->add_option("--vocab", bl.vocab, "base vocabulary, one tag per line")->required();
  cmd_bl->add_option("--min-count", bl.min_count, "keep tags with frequency >= N");
  cmd_bl->add_option("--remove-top", bl.remove_top, "drop the T most frequent survivors");
  cmd_bl->add_flag("--strict-compounds", bl.strict, "match compounds on raw text");
  cmd_bl->add_option("--out", bl.out, "output lexicon file")->required();

  ExtractTagsArgs et;
  auto* cmd_et = app.add_subcommand("extract-tags", "extract tags for each caption");
  cmd_et->add_option("--lexicon", et.lexicon)->required();
  cmd_et->add_option("--captions", et.captions)->required();
  cmd_et->add_flag("--strict-compounds", et.strict);
  cmd_et->add_option("--out", et.out)->required();

  SynthArgs sy;
  auto* cmd_sy = app.add_subcommand("synth", "generate a synthetic image-text fixture");
  cmd_sy->add_option("--lexicon", sy.lexicon)->required();
  cmd_sy->add_option("--seed", sy.seed);
  cmd_sy->add_option("--n", sy.n);
  cmd_sy->add_option("--missing-rate", sy.missing_rate);
  cmd_sy->add_option("--size", sy.size, "image side length in pixels");
  cmd_sy->add_option("--out", sy.out)->required();

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "run the training loop");
  cmd_tr->add_option("--config", tr.config)->required();
  cmd_tr->add_option("--corpus", tr.corpus)->required();
  cmd_tr->add_option("--lexicon", tr.lexicon)->required();
  cmd_tr->add_option("--seed", tr.seed, "override the config seed");
  cmd_tr->add_option("--set", tr.overrides, "config override key=value (repeatable)");
  cmd_tr->add_option("--resume", tr.resume, "resume from a checkpoint");
  cmd_tr->add_option("--stop-after-epoch", tr.stop_after_epoch, "stop early after this epoch");
  cmd_tr->add_option("--out", tr.out)->required();

  ZeroShotArgs zs;
  auto* cmd_zs = app.add_subcommand("eval-zeroshot", "zero-shot classification evaluation");
  cmd_zs->add_option("--checkpoint", zs.checkpoint)->required();
  cmd_zs->add_option("--corpus", zs.corpus, "records whose captions are class names")->required();
  cmd_zs->add_option("--classes", zs.classes, "class names, one per line")->required();
  cmd_zs->add_option("--prompts", zs.prompts, "prompt template file");
  cmd_zs->add_flag("--single-template", zs.single_template);
  cmd_zs->add_option("--out", zs.out)->required();

  EvalMlrArgs em;
  auto* cmd_em = app.add_subcommand("eval-mlr", "multi-label recognition evaluation");
  cmd_em->add_option("--checkpoint", em.checkpoint)->required();
  cmd_em->add_option("--corpus", em.corpus)->required();
  cmd_em->add_option("--threshold", em.threshold);
  cmd_em->add_option("--gt", em.gt, "ground truth source: tags or caption")
      ->check(CLI::IsMember({"tags", "caption"}));
  cmd_em->add_option("--out", em.out)->required();

  FlopsArgs fl;
  auto* cmd_fl = app.add_subcommand("estimate-flops", "analytic FLOP estimate");
  cmd_fl->add_option("--config", fl.config)->required();
  cmd_fl->add_option("--num-classes", fl.num_classes);
  cmd_fl->add_option("--out", fl.out, "optional output directory");

  PlotSimArgs ps;
  auto* cmd_ps = app.add_subcommand("plot-sim", "image-text similarity histogram");
  cmd_ps->add_option("--checkpoint", ps.checkpoint)->required();
  cmd_ps->add_option("--corpus", ps.corpus)->required();
  cmd_ps->add_option("--bins", ps.bins);
  cmd_ps->add_option("--out", ps.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (cmd_bl->parsed()) return run_build_lexicon(bl);
    if (cmd_et->parsed()) return run_extract_tags(et);
    if (cmd_sy->parsed()) return run_synth(sy);
    if (cmd_tr->parsed()) return run_train(tr);
    if (cmd_zs->parsed()) return run_eval_zeroshot(zs);
    if (cmd_em->parsed()) return run_eval_mlr(em);
    if (cmd_fl->parsed()) return run_estimate_flops(fl);
    if (cmd_ps->parsed()) return run_plot_sim(ps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
