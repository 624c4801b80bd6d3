#pragma once

// Flat key=value configuration with CLI-style overrides, and the full
// training configuration mapped onto it.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "idea/data.hpp"
#include "idea/losses.hpp"
#include "idea/model.hpp"

namespace idea {

class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig from_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config parse error at line " + std::to_string(line_no) +
                                 ": expected key=value");
      cfg.kv_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
  }

  static KvConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return from_text(text);
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get_str(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }
  long get_long(const std::string& key, long dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      return std::stol(it->second);
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad integer for '" + key + "': " + it->second);
    }
  }
  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw std::runtime_error("config: bad number for '" + key + "': " + it->second);
    }
  }
  bool get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config: bad boolean for '" + key + "': " + it->second);
  }

  // "key=value" strings; later writers win
  void apply_overrides(const std::vector<std::string>& overrides) {
    for (const std::string& o : overrides) {
      auto eq = o.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("bad override (expected key=value): " + o);
      kv_[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
    }
  }

  std::string to_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : kv_) out << k << "=" << v << "\n";
    return out.str();
  }

  const std::map<std::string, std::string>& items() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double max_lr = 1e-3;
  int warmup_steps = 10;
  double weight_decay = 0.02;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Hyperparams hyper;
  EncoderConfig encoder;
  RecognitionHeadConfig head;
  bool tag2text = true;
  bool retain_original = true;
  bool alt_target_mode = false;
  bool persist_pseudo = false;
  bool strict_compounds = false;
  double mlr_loss_weight = 1.0;
  double itc_loss_weight = 1.0;
  BatchReduction batch_reduction = BatchReduction::mean;
  AugmentMode augment_mode = AugmentMode::flipcrop;
  int checkpoint_every_epochs = 0;  // 0 = final checkpoint only

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (!(hyper.tau > 0.0 && hyper.tau < 1.0))
      throw std::invalid_argument("config: tau must be in (0,1)");
    if (hyper.changing_epoch < 0)
      throw std::invalid_argument("config: changing_epoch must be >= 0");
    encoder.validate();
  }

  static TrainConfig from_kv(const KvConfig& kv) {
    TrainConfig c;
    c.epochs = static_cast<int>(kv.get_long("epochs", c.epochs));
    c.batch_size = static_cast<int>(kv.get_long("batch_size", c.batch_size));
    c.max_lr = kv.get_double("max_lr", c.max_lr);
    c.warmup_steps = static_cast<int>(kv.get_long("warmup_steps", c.warmup_steps));
    c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
    c.adam_beta1 = kv.get_double("adam_beta1", c.adam_beta1);
    c.adam_beta2 = kv.get_double("adam_beta2", c.adam_beta2);
    c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
    c.seed = static_cast<std::uint64_t>(kv.get_long("seed", 0));
    c.hyper.tau = kv.get_double("tau", c.hyper.tau);
    c.hyper.changing_epoch = static_cast<int>(kv.get_long("changing_epoch", c.hyper.changing_epoch));
    c.hyper.temperature_init = kv.get_double("temperature_init", c.hyper.temperature_init);
    c.hyper.temperature_min = kv.get_double("temperature_min", c.hyper.temperature_min);
    c.hyper.temperature_max = kv.get_double("temperature_max", c.hyper.temperature_max);
    c.encoder.image_size = static_cast<int>(kv.get_long("image_size", c.encoder.image_size));
    c.encoder.patch_size = static_cast<int>(kv.get_long("patch_size", c.encoder.patch_size));
    c.encoder.width = static_cast<int>(kv.get_long("width", c.encoder.width));
    c.encoder.depth = static_cast<int>(kv.get_long("depth", c.encoder.depth));
    c.encoder.heads = static_cast<int>(kv.get_long("heads", c.encoder.heads));
    c.encoder.mlp_ratio = static_cast<int>(kv.get_long("mlp_ratio", c.encoder.mlp_ratio));
    c.encoder.text_max_len = static_cast<int>(kv.get_long("text_max_len", c.encoder.text_max_len));
    c.encoder.proj_dim = static_cast<int>(kv.get_long("proj_dim", c.encoder.proj_dim));
    c.head.num_queries = static_cast<int>(kv.get_long("num_queries", c.head.num_queries));
    c.head.group_factor = static_cast<int>(kv.get_long("group_factor", c.head.group_factor));
    c.head.decoder_dim = static_cast<int>(kv.get_long("decoder_dim", c.head.decoder_dim));
    c.head.decoder_heads = static_cast<int>(kv.get_long("decoder_heads", c.head.decoder_heads));
    c.tag2text = kv.get_bool("tag2text", c.tag2text);
    c.retain_original = kv.get_bool("retain_original", c.retain_original);
    c.alt_target_mode = kv.get_bool("alt_target_mode", c.alt_target_mode);
    c.persist_pseudo = kv.get_bool("persist_pseudo", c.persist_pseudo);
    c.strict_compounds = kv.get_bool("strict_compounds", c.strict_compounds);
    c.mlr_loss_weight = kv.get_double("mlr_weight", c.mlr_loss_weight);
    c.itc_loss_weight = kv.get_double("itc_weight", c.itc_loss_weight);
    std::string red = kv.get_str("batch_reduction", "mean");
    if (red == "mean") c.batch_reduction = BatchReduction::mean;
    else if (red == "sum") c.batch_reduction = BatchReduction::sum;
    else throw std::runtime_error("config: batch_reduction must be mean or sum");
    std::string aug = kv.get_str("augment", "flipcrop");
    if (aug == "none") c.augment_mode = AugmentMode::none;
    else if (aug == "flipcrop") c.augment_mode = AugmentMode::flipcrop;
    else throw std::runtime_error("config: augment must be none or flipcrop");
    c.checkpoint_every_epochs =
        static_cast<int>(kv.get_long("checkpoint_every", c.checkpoint_every_epochs));
    return c;
  }

  KvConfig to_kv() const {
    KvConfig kv;
    auto num = [](double v) {
      std::ostringstream os;
      os.precision(17);
      os << v;
      return os.str();
    };
    kv.set("epochs", std::to_string(epochs));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("max_lr", num(max_lr));
    kv.set("warmup_steps", std::to_string(warmup_steps));
    kv.set("weight_decay", num(weight_decay));
    kv.set("adam_beta1", num(adam_beta1));
    kv.set("adam_beta2", num(adam_beta2));
    kv.set("adam_eps", num(adam_eps));
    kv.set("seed", std::to_string(seed));
    kv.set("tau", num(hyper.tau));
    kv.set("changing_epoch", std::to_string(hyper.changing_epoch));
    kv.set("temperature_init", num(hyper.temperature_init));
    kv.set("temperature_min", num(hyper.temperature_min));
    kv.set("temperature_max", num(hyper.temperature_max));
    kv.set("image_size", std::to_string(encoder.image_size));
    kv.set("patch_size", std::to_string(encoder.patch_size));
    kv.set("width", std::to_string(encoder.width));
    kv.set("depth", std::to_string(encoder.depth));
    kv.set("heads", std::to_string(encoder.heads));
    kv.set("mlp_ratio", std::to_string(encoder.mlp_ratio));
    kv.set("text_max_len", std::to_string(encoder.text_max_len));
    kv.set("proj_dim", std::to_string(encoder.proj_dim));
    kv.set("num_queries", std::to_string(head.num_queries));
    kv.set("group_factor", std::to_string(head.group_factor));
    kv.set("decoder_dim", std::to_string(head.decoder_dim));
    kv.set("decoder_heads", std::to_string(head.decoder_heads));
    kv.set("tag2text", tag2text ? "true" : "false");
    kv.set("retain_original", retain_original ? "true" : "false");
    kv.set("alt_target_mode", alt_target_mode ? "true" : "false");
    kv.set("persist_pseudo", persist_pseudo ? "true" : "false");
    kv.set("strict_compounds", strict_compounds ? "true" : "false");
    kv.set("mlr_weight", num(mlr_loss_weight));
    kv.set("itc_weight", num(itc_loss_weight));
    kv.set("batch_reduction", batch_reduction == BatchReduction::mean ? "mean" : "sum");
    kv.set("augment", augment_mode == AugmentMode::none ? "none" : "flipcrop");
    kv.set("checkpoint_every", std::to_string(checkpoint_every_epochs));
    return kv;
  }
};

}  // namespace idea
