#pragma once

// Evaluation protocols: multi-label metrics, prompt-ensembled zero-shot
// classification with seen/unseen analysis, pseudo-tag precision/recall,
// analytic FLOP estimation, and similarity histograms.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "idea/data.hpp"
#include "idea/lexicon.hpp"
#include "idea/model.hpp"
#include "idea/tagger.hpp"

namespace idea {

// ---------------------------------------------------------------------------
// multi-label metrics

struct MultiLabelMetrics {
  double mAP = 0.0;  // all values as percentages
  double CP = 0.0, CR = 0.0, CF1 = 0.0;
  double OP = 0.0, OR = 0.0, OF1 = 0.0;
};

namespace detail_eval {

// average precision with precision evaluated at each positive's rank; ties
// broken by sample order (stable)
inline double average_precision(const Eigen::VectorXd& scores, const Eigen::VectorXd& gt) {
  std::vector<long> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](long a, long b) { return scores(a) > scores(b); });
  long hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < idx.size(); ++rank) {
    if (gt(idx[rank]) > 0.5) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return hits > 0 ? sum / hits : 0.0;
}

}  // namespace detail_eval

// Per-class AP over the ranked list; classes without positives are excluded
// from the averaged metrics. Thresholded predictions (score > threshold) feed
// the precision/recall/F1 family; the overall variants count all cells.
inline MultiLabelMetrics multilabel_metrics(const core::Matrix& probs, const core::Matrix& gt,
                                            double threshold) {
  if (probs.rows() != gt.rows() || probs.cols() != gt.cols())
    throw std::invalid_argument("multilabel_metrics: shape mismatch");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("multilabel_metrics: threshold must be in (0,1)");
  if (gt.sum() <= 0.0) throw std::runtime_error("metrics undefined: no positive labels");

  const long c = probs.cols();
  double ap_sum = 0.0, cp_sum = 0.0, cr_sum = 0.0;
  long counted = 0;
  long tp_all = 0, pred_all = 0, pos_all = 0;
  for (long j = 0; j < c; ++j) {
    long tp = 0, fp = 0, fn = 0;
    for (long i = 0; i < probs.rows(); ++i) {
      bool pred = probs(i, j) > threshold;
      bool pos = gt(i, j) > 0.5;
      if (pred && pos) ++tp;
      else if (pred) ++fp;
      else if (pos) ++fn;
    }
    tp_all += tp;
    pred_all += tp + fp;
    pos_all += tp + fn;
    if (tp + fn == 0) continue;  // no positives for this class
    ++counted;
    ap_sum += detail_eval::average_precision(probs.col(j), gt.col(j));
    cp_sum += (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    cr_sum += static_cast<double>(tp) / (tp + fn);
  }

  MultiLabelMetrics m;
  m.mAP = 100.0 * ap_sum / counted;
  m.CP = 100.0 * cp_sum / counted;
  m.CR = 100.0 * cr_sum / counted;
  m.CF1 = (m.CP + m.CR) > 0.0 ? 2.0 * m.CP * m.CR / (m.CP + m.CR) : 0.0;
  m.OP = pred_all > 0 ? 100.0 * tp_all / pred_all : 0.0;
  m.OR = pos_all > 0 ? 100.0 * tp_all / pos_all : 0.0;
  m.OF1 = (m.OP + m.OR) > 0.0 ? 2.0 * m.OP * m.OR / (m.OP + m.OR) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// zero-shot classification

struct PromptSet {
  std::vector<std::string> templates;  // each contains "{label}" exactly once

  static PromptSet from_lines(const std::vector<std::string>& lines) {
    PromptSet p;
    for (const std::string& t : lines) {
      if (t.empty()) continue;
      auto first = t.find("{label}");
      if (first == std::string::npos || t.find("{label}", first + 1) != std::string::npos)
        throw std::invalid_argument("prompt template must contain {label} exactly once: '" + t +
                                    "'");
      p.templates.push_back(t);
    }
    if (p.templates.empty()) throw std::invalid_argument("prompt set is empty");
    return p;
  }

  static PromptSet from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read prompt file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_lines(lines);
  }

  static PromptSet single() { return from_lines({"a photo of a {label}"}); }

  static std::string fill(const std::string& tmpl, const std::string& label) {
    std::string out = tmpl;
    out.replace(out.find("{label}"), 7, label);
    return out;
  }
};

struct ZeroShotResult {
  double top1 = 0.0, top5 = 0.0;
  Eigen::VectorXd per_class_accuracy;
  std::vector<std::uint8_t> seen_mask;  // class name overlaps the tag lexicon
};

// class embedding = renormalized mean of the unit embeddings of every filled
// template; prediction = argmax cosine similarity
inline core::Matrix class_embeddings(const std::vector<std::string>& class_names,
                                     const PromptSet& prompts, const Model& model) {
  core::Matrix out(static_cast<long>(class_names.size()), model.ecfg.proj_dim);
  for (std::size_t ci = 0; ci < class_names.size(); ++ci) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(model.ecfg.proj_dim);
    for (const std::string& tmpl : prompts.templates) {
      core::Tensor z = model.text_embedding(model.encode_text(PromptSet::fill(tmpl, class_names[ci])));
      acc += z.value().row(0);
    }
    double norm = acc.norm();
    if (norm < 1e-12) throw std::runtime_error("degenerate class embedding");
    out.row(static_cast<long>(ci)) = acc / norm;
  }
  return out;
}

inline bool lexicon_has_name(const TagLexicon& lexicon, const std::string& name) {
  NormalizedText n = normalize_text(name);
  std::string lemma_joined;
  for (const auto& l : n.lemmas) {
    if (!lemma_joined.empty()) lemma_joined.push_back(' ');
    lemma_joined += l;
  }
  return lexicon.contains(n.joined) || lexicon.contains(lemma_joined);
}

inline ZeroShotResult zero_shot_classify(const core::Matrix& image_embeddings,
                                         const std::vector<int>& labels,
                                         const std::vector<std::string>& class_names,
                                         const PromptSet& prompts, const Model& model) {
  if (class_names.empty()) throw std::invalid_argument("zero_shot_classify: no class names");
  if (image_embeddings.rows() != static_cast<long>(labels.size()))
    throw std::invalid_argument("zero_shot_classify: labels/embeddings mismatch");
  const long num_classes = static_cast<long>(class_names.size());
  core::Matrix cls = class_embeddings(class_names, prompts, model);
  core::Matrix sims = image_embeddings * cls.transpose();  // N x C

  const long k = std::min<long>(5, num_classes);
  long top1_hits = 0, top5_hits = 0;
  Eigen::VectorXd class_hits = Eigen::VectorXd::Zero(num_classes);
  Eigen::VectorXd class_counts = Eigen::VectorXd::Zero(num_classes);
  for (long i = 0; i < sims.rows(); ++i) {
    std::vector<long> idx(num_classes);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](long a, long b) { return sims(i, a) > sims(i, b); });
    int truth = labels[static_cast<std::size_t>(i)];
    if (truth < 0 || truth >= num_classes)
      throw std::invalid_argument("zero_shot_classify: label out of range");
    class_counts(truth) += 1.0;
    if (idx[0] == truth) {
      ++top1_hits;
      class_hits(truth) += 1.0;
    }
    for (long r = 0; r < k; ++r)
      if (idx[r] == truth) { ++top5_hits; break; }
  }

  ZeroShotResult res;
  res.top1 = static_cast<double>(top1_hits) / sims.rows();
  res.top5 = static_cast<double>(top5_hits) / sims.rows();
  res.per_class_accuracy = Eigen::VectorXd::Zero(num_classes);
  for (long j = 0; j < num_classes; ++j)
    if (class_counts(j) > 0) res.per_class_accuracy(j) = class_hits(j) / class_counts(j);
  for (const std::string& name : class_names)
    res.seen_mask.push_back(lexicon_has_name(model.lexicon, name) ? 1 : 0);
  return res;
}

// ---------------------------------------------------------------------------
// pseudo-tag precision / recall against planted ground truth

struct TagPR {
  std::optional<double> precision;  // absent when no pseudo tags were added
  double recall = 0.0;
  long pseudo_total = 0;
  long planted_missing = 0;
};

inline TagPR tag_pr_online(const std::vector<TagVector>& corrected,
                           const std::vector<TagVector>& extracted,
                           const std::vector<TagVector>& full_ground_truth) {
  if (corrected.size() != extracted.size() || corrected.size() != full_ground_truth.size())
    throw std::invalid_argument("tag_pr_online: batch size mismatch");
  long tp = 0, fp = 0, missing = 0;
  for (std::size_t i = 0; i < corrected.size(); ++i) {
    const auto& c = corrected[i].bits;
    const auto& e = extracted[i].bits;
    const auto& f = full_ground_truth[i].bits;
    if (c.size() != e.size() || c.size() != f.size())
      throw std::invalid_argument("tag_pr_online: class count mismatch");
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (e[j] && !f[j]) throw std::invalid_argument("tag_pr_online: extracted not within full");
      if (c[j] && !e[j]) (f[j] ? ++tp : ++fp);
      if (f[j] && !e[j]) ++missing;
    }
  }
  TagPR r;
  r.pseudo_total = tp + fp;
  r.planted_missing = missing;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = missing > 0 ? static_cast<double>(tp) / static_cast<double>(missing) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// analytic FLOP estimate
//
// Counts one FLOP per multiply-accumulate in every linear map and attention
// product (the convention under which standard ViT-B/16 at 224 input comes
// out near 17.6 GFLOPs). Elementwise work (norms, activations, softmax) is
// excluded as negligible.

struct FlopEstimate {
  double encoder_gflops = 0.0;
  double head_gflops = 0.0;
  double overhead_percent = 0.0;
};

inline FlopEstimate flop_estimate(const EncoderConfig& ecfg, const RecognitionHeadConfig& hcfg,
                                  int num_classes) {
  const double s = ecfg.spatial_tokens();
  const double t = s + 1;
  const double d = ecfg.width;
  const double dm = static_cast<double>(ecfg.mlp_ratio) * d;
  double patch_embed = s * d * (static_cast<double>(ecfg.patch_size) * ecfg.patch_size * 3);
  double per_block = 4.0 * t * d * d        // q,k,v,out projections
                     + 2.0 * t * t * d      // attention scores and value mix
                     + 2.0 * t * d * dm;    // mlp
  double encoder = patch_embed + ecfg.depth * per_block;

  const double k = hcfg.resolve_queries(num_classes);
  const double dd = hcfg.resolve_dim(ecfg.width);
  const double g = hcfg.group_factor;
  double head = 0.0;
  if (static_cast<int>(dd) != ecfg.width) head += s * d * dd;  // input projection
  head += k * dd * dd;            // query projection
  head += 2.0 * s * d * dd;       // key and value projections
  head += 2.0 * k * s * dd;       // attention scores and value mix
  head += k * dd * dd;            // output projection
  head += 2.0 * k * dd * (4.0 * dd);  // feed-forward
  head += k * g * dd;             // group fully connected pooling

  FlopEstimate est;
  est.encoder_gflops = encoder / 1e9;
  est.head_gflops = head / 1e9;
  est.overhead_percent = 100.0 * head / encoder;
  return est;
}

// ---------------------------------------------------------------------------
// similarity distribution

struct SimilarityHistogram {
  std::vector<long> counts;
  double lo = -1.0, hi = 1.0;

  double bin_left(std::size_t i) const {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(counts.size());
  }
  long total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }

  std::string to_text() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f\t%ld\n", bin_left(i), counts[i]);
      out << buf;
    }
    return out.str();
  }
};

inline SimilarityHistogram histogram_of(const std::vector<double>& sims, int bins = 50) {
  SimilarityHistogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double sval : sims) {
    double unit = (sval - h.lo) / (h.hi - h.lo);
    long bin = static_cast<long>(std::floor(unit * bins));
    bin = std::min<long>(std::max<long>(bin, 0), bins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

// cosine similarity of each record's image against its own caption
inline SimilarityHistogram similarity_distribution(const std::vector<ImageTextRecord>& pairs,
                                                   const Model& model, int bins = 50) {
  std::vector<double> sims;
  sims.reserve(pairs.size());
  for (const auto& rec : pairs) {
    core::Tensor zi = model.image_embedding(model.encode_image(rec.image));
    core::Tensor zt = model.text_embedding(model.encode_text(rec.caption));
    sims.push_back(zi.value().row(0).dot(zt.value().row(0)));
  }
  return histogram_of(sims, bins);
}

// matched-pair cosine similarities, for distribution comparisons
inline std::vector<double> pair_similarities(const std::vector<ImageTextRecord>& pairs,
                                             const Model& model) {
  std::vector<double> sims;
  sims.reserve(pairs.size());
  for (const auto& rec : pairs) {
    core::Tensor zi = model.image_embedding(model.encode_image(rec.image));
    core::Tensor zt = model.text_embedding(model.encode_text(rec.caption));
    sims.push_back(zi.value().row(0).dot(zt.value().row(0)));
  }
  return sims;
}

// ---------------------------------------------------------------------------
// in-batch retrieval

struct RetrievalResult {
  double i2t_top1 = 0.0;
  double t2i_top1 = 0.0;
  double mean() const { return 0.5 * (i2t_top1 + t2i_top1); }
};

inline RetrievalResult retrieval_top1(const Model& model,
                                      const std::vector<ImageTextRecord>& records) {
  const long n = static_cast<long>(records.size());
  if (n == 0) throw std::invalid_argument("retrieval_top1: no records");
  core::Matrix zi(n, model.ecfg.proj_dim), zt(n, model.ecfg.proj_dim);
  for (long i = 0; i < n; ++i) {
    zi.row(i) = model.image_embedding(model.encode_image(records[i].image)).value().row(0);
    zt.row(i) = model.text_embedding(model.encode_text(records[i].caption)).value().row(0);
  }
  core::Matrix sims = zi * zt.transpose();
  long i2t = 0, t2i = 0;
  for (long i = 0; i < n; ++i) {
    long arg;
    sims.row(i).maxCoeff(&arg);
    if (arg == i) ++i2t;
    sims.col(i).maxCoeff(&arg);
    if (arg == i) ++t2i;
  }
  RetrievalResult r;
  r.i2t_top1 = static_cast<double>(i2t) / n;
  r.t2i_top1 = static_cast<double>(t2i) / n;
  return r;
}

}  // namespace idea
