#pragma once

// Tag vocabulary: entries with corpus frequencies, the names dropped by
// top-frequency removal, and the per-class re-weighting coefficients.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace idea {

struct LexiconEntry {
  std::string name;  // lowercase, single-spaced
  bool is_compound = false;
  long frequency = 0;
  int class_index = 0;
};

struct TagLexicon {
  std::vector<LexiconEntry> entries;  // sorted by name; class_index equals position
  std::vector<std::string> removed_top;
  long source_vocab_size = 0;

  int num_classes() const { return static_cast<int>(entries.size()); }

  const LexiconEntry* find(const std::string& name) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), name,
                               [](const LexiconEntry& e, const std::string& n) { return e.name < n; });
    if (it == entries.end() || it->name != name) return nullptr;
    return &*it;
  }

  bool contains(const std::string& name) const { return find(name) != nullptr; }

  bool operator==(const TagLexicon& other) const {
    if (source_vocab_size != other.source_vocab_size || removed_top != other.removed_top ||
        entries.size() != other.entries.size())
      return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const LexiconEntry &a = entries[i], &b = other.entries[i];
      if (a.name != b.name || a.is_compound != b.is_compound || a.frequency != b.frequency ||
          a.class_index != b.class_index)
        return false;
    }
    return true;
  }
};

struct ClassWeights {
  Eigen::VectorXd weights;  // length C, mean 1, w_i proportional to 1/sqrt(f_i)
};

// w_i = k / sqrt(f_i) with k chosen so mean(w) = 1
inline ClassWeights class_weights(const TagLexicon& lexicon) {
  const int c = lexicon.num_classes();
  if (c == 0) throw std::invalid_argument("class_weights: empty lexicon");
  Eigen::VectorXd inv_sqrt(c);
  for (int i = 0; i < c; ++i) {
    long f = lexicon.entries[i].frequency;
    if (f < 1)
      throw std::invalid_argument("class_weights: zero frequency for '" +
                                  lexicon.entries[i].name + "'");
    inv_sqrt(i) = 1.0 / std::sqrt(static_cast<double>(f));
  }
  double k = static_cast<double>(c) / inv_sqrt.sum();
  return ClassWeights{k * inv_sqrt};
}

// ---------------------------------------------------------------------------
// file format: header line, then one "name<TAB>frequency" line per entry
//
//   idea-lexicon-v1<TAB>source_vocab_size=N<TAB>removed_top=a,b,c

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] inline void parse_fail(long line, const std::string& msg) {
  throw std::runtime_error("lexicon parse error at line " + std::to_string(line) + ": " + msg);
}

}  // namespace detail

inline std::string lexicon_to_string(const TagLexicon& lexicon) {
  std::ostringstream out;
  out << "idea-lexicon-v1\tsource_vocab_size=" << lexicon.source_vocab_size << "\tremoved_top=";
  for (std::size_t i = 0; i < lexicon.removed_top.size(); ++i) {
    if (i) out << ',';
    out << lexicon.removed_top[i];
  }
  out << '\n';
  for (const LexiconEntry& e : lexicon.entries) out << e.name << '\t' << e.frequency << '\n';
  return out.str();
}

inline void save_lexicon(const TagLexicon& lexicon, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write lexicon file: " + path);
  out << lexicon_to_string(lexicon);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TagLexicon lexicon_from_stream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) detail::parse_fail(1, "missing header");
  auto fields = detail::split(line, '\t');
  if (fields.empty() || fields[0] != "idea-lexicon-v1")
    throw std::runtime_error("unsupported lexicon version: '" +
                             (fields.empty() ? std::string() : fields[0]) + "'");
  TagLexicon lex;
  for (std::size_t f = 1; f < fields.size(); ++f) {
    const std::string& field = fields[f];
    auto eq = field.find('=');
    if (eq == std::string::npos) detail::parse_fail(1, "malformed header field '" + field + "'");
    std::string key = field.substr(0, eq), val = field.substr(eq + 1);
    if (key == "source_vocab_size") {
      try {
        lex.source_vocab_size = std::stol(val);
      } catch (const std::exception&) {
        detail::parse_fail(1, "bad source_vocab_size '" + val + "'");
      }
    } else if (key == "removed_top") {
      if (!val.empty()) lex.removed_top = detail::split(val, ',');
    } else {
      detail::parse_fail(1, "unknown header field '" + key + "'");
    }
  }
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() != 2) detail::parse_fail(line_no, "expected name<TAB>frequency");
    const std::string& name = cols[0];
    if (name.empty()) detail::parse_fail(line_no, "empty name");
    long freq = 0;
    try {
      std::size_t pos = 0;
      freq = std::stol(cols[1], &pos);
      if (pos != cols[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      detail::parse_fail(line_no, "bad frequency '" + cols[1] + "'");
    }
    if (freq < 0) detail::parse_fail(line_no, "negative frequency");
    if (!lex.entries.empty()) {
      if (lex.entries.back().name == name) detail::parse_fail(line_no, "duplicate name '" + name + "'");
      if (lex.entries.back().name > name) detail::parse_fail(line_no, "entries not sorted by name");
    }
    LexiconEntry e;
    e.name = name;
    e.is_compound = name.find(' ') != std::string::npos;
    e.frequency = freq;
    e.class_index = static_cast<int>(lex.entries.size());
    lex.entries.push_back(std::move(e));
  }
  for (const std::string& r : lex.removed_top)
    if (lex.contains(r))
      throw std::runtime_error("lexicon parse error: removed_top name '" + r +
                               "' also present as entry");
  return lex;
}

inline TagLexicon lexicon_from_string(const std::string& text) {
  std::istringstream in(text);
  return lexicon_from_stream(in);
}

inline TagLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read lexicon file: " + path);
  return lexicon_from_stream(in);
}

}  // namespace idea
