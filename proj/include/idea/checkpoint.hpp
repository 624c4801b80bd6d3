#pragma once

// Single-file checkpoint archive: config text, lexicon text, tokenizer
// vocabulary, named parameter tensors, optimizer state, and run metadata.
// Tensor bytes are written raw, so a save/load round trip is bit-exact.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "idea/core/tensor.hpp"

namespace idea {

struct Checkpoint {
  std::string config_text;
  std::string lexicon_text;
  std::vector<std::string> vocab;
  std::vector<std::pair<std::string, core::Matrix>> tensors;
  std::vector<std::pair<std::string, core::Matrix>> opt_state;
  std::string meta_text;  // key=value lines: epoch_next, global_step, adam_steps
};

namespace detail_ckpt {

inline constexpr char kMagic[9] = "IDEACKP1";

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in) {
  std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

inline void write_tensor(std::ostream& out, const std::string& name, const core::Matrix& m) {
  write_str(out, name);
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline std::pair<std::string, core::Matrix> read_tensor(std::istream& in) {
  std::string name = read_str(in);
  std::uint64_t rows = read_u64(in), cols = read_u64(in);
  core::Matrix m(static_cast<long>(rows), static_cast<long>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
  return {std::move(name), std::move(m)};
}

}  // namespace detail_ckpt

inline void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  namespace d = detail_ckpt;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(d::kMagic, 8);
  d::write_str(out, ckpt.config_text);
  d::write_str(out, ckpt.lexicon_text);
  d::write_u64(out, ckpt.vocab.size());
  for (const auto& t : ckpt.vocab) d::write_str(out, t);
  d::write_u64(out, ckpt.tensors.size());
  for (const auto& [name, m] : ckpt.tensors) d::write_tensor(out, name, m);
  d::write_u64(out, ckpt.opt_state.size());
  for (const auto& [name, m] : ckpt.opt_state) d::write_tensor(out, name, m);
  d::write_str(out, ckpt.meta_text);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  namespace d = detail_ckpt;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[9] = {0};
  in.read(magic, 8);
  if (!in || std::strncmp(magic, d::kMagic, 8) != 0)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  Checkpoint ckpt;
  ckpt.config_text = d::read_str(in);
  ckpt.lexicon_text = d::read_str(in);
  std::uint64_t nv = d::read_u64(in);
  for (std::uint64_t i = 0; i < nv; ++i) ckpt.vocab.push_back(d::read_str(in));
  std::uint64_t nt = d::read_u64(in);
  for (std::uint64_t i = 0; i < nt; ++i) ckpt.tensors.push_back(d::read_tensor(in));
  std::uint64_t no = d::read_u64(in);
  for (std::uint64_t i = 0; i < no; ++i) ckpt.opt_state.push_back(d::read_tensor(in));
  ckpt.meta_text = d::read_str(in);
  return ckpt;
}

}  // namespace idea
