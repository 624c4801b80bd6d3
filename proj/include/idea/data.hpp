#pragma once

// Corpus ingestion (json-lines records with ppm images), synthetic fixture
// generation with planted missing labels, and the augmentation hook.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "idea/core/rng.hpp"
#include "idea/image.hpp"
#include "idea/lexicon.hpp"
#include "idea/tagger.hpp"

namespace idea {

struct ImageTextRecord {
  std::string id;
  Image image;
  std::string image_path;  // as written in the corpus file
  std::string caption;
  std::optional<TagVector> full_tags;          // synthetic fixtures only
  std::vector<std::string> full_tag_names;     // serialized form of full_tags
};

inline TagVector tags_from_names(const std::vector<std::string>& names, const TagLexicon& lexicon) {
  TagVector v;
  v.bits.assign(lexicon.entries.size(), 0);
  for (const std::string& n : names) {
    const LexiconEntry* e = lexicon.find(n);
    if (!e) throw std::invalid_argument("unknown tag name '" + n + "'");
    v.bits[static_cast<std::size_t>(e->class_index)] = 1;
  }
  return v;
}

// ---------------------------------------------------------------------------
// corpus file: one json object per line with fields id, image, caption and
// optionally tags; image paths resolve relative to the corpus file

inline std::vector<ImageTextRecord> load_corpus(const std::string& path, int image_size = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ImageTextRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corpus parse error at line " + std::to_string(line_no) + ": " +
                               e.what());
    }
    if (!obj.contains("id") || !obj.contains("image"))
      throw std::runtime_error("corpus parse error at line " + std::to_string(line_no) +
                               ": missing id or image field");
    ImageTextRecord rec;
    rec.id = obj["id"].get<std::string>();
    rec.image_path = obj["image"].get<std::string>();
    rec.caption = obj.value("caption", std::string());
    if (obj.contains("tags")) rec.full_tag_names = obj["tags"].get<std::vector<std::string>>();
    if (!seen_ids.insert(rec.id).second)
      throw std::runtime_error("corpus parse error at line " + std::to_string(line_no) +
                               ": duplicate id '" + rec.id + "'");
    std::filesystem::path img_path = base / rec.image_path;
    if (!std::filesystem::exists(img_path))
      throw std::runtime_error("missing image file for record '" + rec.id + "': " +
                               img_path.string());
    rec.image = read_ppm(img_path.string());
    if (image_size > 0 && (rec.image.height != image_size || rec.image.width != image_size))
      rec.image = resize_bilinear(rec.image, image_size, image_size);
    records.push_back(std::move(rec));
  }
  return records;
}

inline void save_corpus(const std::vector<ImageTextRecord>& records, const std::string& dir,
                        const std::string& corpus_name = "corpus.jsonl") {
  std::filesystem::create_directories(std::filesystem::path(dir) / "images");
  std::ofstream out(std::filesystem::path(dir) / corpus_name);
  if (!out) throw std::runtime_error("cannot write corpus under: " + dir);
  for (const ImageTextRecord& rec : records) {
    std::string rel = "images/" + rec.id + ".ppm";
    write_ppm(rec.image, (std::filesystem::path(dir) / rel).string());
    nlohmann::json obj;
    obj["id"] = rec.id;
    obj["image"] = rel;
    obj["caption"] = rec.caption;
    if (!rec.full_tag_names.empty()) obj["tags"] = rec.full_tag_names;
    out << obj.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// synthetic fixture: each record renders 2..4 lexicon concepts as colored
// glyphs in jittered grid cells; the caption names a random subset of them
// and full_tags records all of them

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);
  double i = std::floor(h * 6.0);
  double f = h * 6.0 - i;
  double p = v * (1.0 - s), q = v * (1.0 - f * s), t = v * (1.0 - (1.0 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// distinct deterministic look per class: hue from the golden angle, one of
// six shapes
inline void draw_glyph(Image& img, int class_index, int cy, int cx, int radius) {
  double r, g, b;
  hsv_to_rgb(0.61803398875 * class_index, 0.85, 0.9, r, g, b);
  int shape = class_index % 6;
  for (int y = cy - radius; y <= cy + radius; ++y) {
    for (int x = cx - radius; x <= cx + radius; ++x) {
      if (y < 0 || y >= img.height || x < 0 || x >= img.width) continue;
      int dy = y - cy, dx = x - cx;
      bool inside = false;
      switch (shape) {
        case 0: inside = dy * dy + dx * dx <= radius * radius; break;                    // disk
        case 1: inside = true; break;                                                    // square
        case 2: inside = std::abs(dx) + std::abs(dy) <= radius; break;                   // diamond
        case 3: {                                                                        // ring
          int d2 = dy * dy + dx * dx;
          inside = d2 <= radius * radius && d2 >= (radius / 2) * (radius / 2);
          break;
        }
        case 4: inside = std::abs(dx) <= radius / 3 || std::abs(dy) <= radius / 3; break;  // cross
        default: inside = dy >= -radius / 4 || std::abs(dx) <= radius / 3; break;          // tee
      }
      if (!inside) continue;
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
  }
}

}  // namespace detail

inline std::vector<ImageTextRecord> synth_fixture(std::uint64_t seed, int n_pairs,
                                                  const TagLexicon& lexicon, double missing_rate,
                                                  int image_size = 64) {
  if (lexicon.num_classes() < 4)
    throw std::invalid_argument("synth_fixture: lexicon must have at least 4 entries");
  if (missing_rate < 0.0 || missing_rate >= 1.0)
    throw std::invalid_argument("synth_fixture: missing_rate must be in [0, 1)");
  const int c = lexicon.num_classes();
  std::mt19937_64 rng(seed);
  std::vector<ImageTextRecord> records;
  std::unordered_set<std::string> used_captions, used_sets;

  for (int n = 0; n < n_pairs; ++n) {
    ImageTextRecord rec;
    for (int attempt = 0; attempt < 200; ++attempt) {
      int k = 2 + static_cast<int>(rng() % 3);
      std::vector<int> classes(c);
      std::iota(classes.begin(), classes.end(), 0);
      std::shuffle(classes.begin(), classes.end(), rng);
      classes.resize(k);

      std::string set_key;
      std::vector<int> sorted = classes;
      std::sort(sorted.begin(), sorted.end());
      for (int idx : sorted) set_key += std::to_string(idx) + ",";

      int n_named = static_cast<int>(std::max(1L, std::lround(k * (1.0 - missing_rate))));
      if (n_named > k) n_named = k;
      std::string caption = "a photo of";
      for (int i = 0; i < n_named; ++i) {
        caption += (i == 0 ? " " : " and ");
        caption += lexicon.entries[classes[i]].name;
      }

      bool last_attempt = attempt == 199;
      if (!last_attempt && (used_captions.count(caption) || used_sets.count(set_key))) continue;
      used_captions.insert(caption);
      used_sets.insert(set_key);

      Image img(image_size, image_size, 0.94);
      std::vector<int> cells = {0, 1, 2, 3};
      std::shuffle(cells.begin(), cells.end(), rng);
      int half = image_size / 2;
      int radius = image_size / 7;
      std::uniform_int_distribution<int> jitter(-image_size / 16, image_size / 16);
      for (int i = 0; i < k; ++i) {
        int cell = cells[i];
        int cy = half / 2 + (cell / 2) * half + jitter(rng);
        int cx = half / 2 + (cell % 2) * half + jitter(rng);
        detail::draw_glyph(img, classes[i], cy, cx, radius);
      }

      char idbuf[32];
      std::snprintf(idbuf, sizeof(idbuf), "synth-%06d", n);
      rec.id = idbuf;
      rec.image = std::move(img);
      rec.caption = caption;
      TagVector full;
      full.bits.assign(c, 0);
      for (int idx : classes) full.bits[static_cast<std::size_t>(idx)] = 1;
      rec.full_tags = full;
      for (int idx : sorted) rec.full_tag_names.push_back(lexicon.entries[idx].name);
      break;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// augmentation hook: horizontal flip + random crop, or identity

enum class AugmentMode { none, flipcrop };

inline Image augment(const Image& img, std::uint64_t seed, AugmentMode mode = AugmentMode::flipcrop) {
  if (mode == AugmentMode::none) return img;
  std::mt19937_64 rng(seed);
  Image out = img;
  if (rng() % 2) out = flip_horizontal(out);
  std::uniform_real_distribution<double> scale_dist(0.8, 1.0);
  double s = scale_dist(rng);
  int ch = std::max(1, static_cast<int>(std::lround(img.height * s)));
  int cw = std::max(1, static_cast<int>(std::lround(img.width * s)));
  std::uniform_int_distribution<int> ydist(0, img.height - ch), xdist(0, img.width - cw);
  int y0 = ydist(rng), x0 = xdist(rng);
  if (ch == img.height && cw == img.width) return out;
  return crop_resize(out, y0, x0, ch, cw);
}

}  // namespace idea
