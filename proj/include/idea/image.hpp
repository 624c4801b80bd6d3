#pragma once

// Small RGB image type (doubles in [0,1]) with PPM (P6) io, bilinear resize,
// flip and crop helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace idea {

struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> px;  // row-major, rgb interleaved

  Image() = default;
  Image(int h, int w, double fill = 0.0) : height(h), width(w), px(static_cast<std::size_t>(h) * w * 3, fill) {}

  double at(int y, int x, int c) const { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool operator==(const Image& o) const {
    return height == o.height && width == o.width && px == o.px;
  }
};

inline void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf;
  buf.reserve(img.px.size());
  for (double v : img.px) {
    double clamped = std::min(std::max(v, 0.0), 1.0);
    buf.push_back(static_cast<unsigned char>(std::lround(clamped * 255.0)));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("not a P6 ppm: " + path);
  auto next_int = [&]() {
    int v;
    // skip whitespace and comment lines
    while (in >> std::ws && in.peek() == '#') in.ignore(1 << 20, '\n');
    if (!(in >> v)) throw std::runtime_error("truncated ppm header: " + path);
    return v;
  };
  int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw std::runtime_error("unsupported ppm maxval: " + path);
  in.ignore(1);  // single whitespace after maxval
  Image img(h, w);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error("truncated ppm data: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i) img.px[i] = buf[i] / 255.0;
  return img;
}

inline Image resize_bilinear(const Image& src, int out_h, int out_w) {
  Image dst(out_h, out_w);
  if (src.height == 0 || src.width == 0) return dst;
  for (int y = 0; y < out_h; ++y) {
    double sy = (y + 0.5) * src.height / out_h - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    double fy = sy - y0;
    int ya = std::clamp(y0, 0, src.height - 1), yb = std::clamp(y0 + 1, 0, src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * src.width / out_w - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      double fx = sx - x0;
      int xa = std::clamp(x0, 0, src.width - 1), xb = std::clamp(x0 + 1, 0, src.width - 1);
      for (int c = 0; c < 3; ++c) {
        double top = src.at(ya, xa, c) * (1 - fx) + src.at(ya, xb, c) * fx;
        double bot = src.at(yb, xa, c) * (1 - fx) + src.at(yb, xb, c) * fx;
        dst.at(y, x, c) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return dst;
}

inline Image flip_horizontal(const Image& src) {
  Image dst(src.height, src.width);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < 3; ++c) dst.at(y, x, c) = src.at(y, src.width - 1 - x, c);
  return dst;
}

// crop a region and scale it back to the source size
inline Image crop_resize(const Image& src, int y0, int x0, int crop_h, int crop_w) {
  if (y0 < 0 || x0 < 0 || y0 + crop_h > src.height || x0 + crop_w > src.width || crop_h < 1 ||
      crop_w < 1)
    throw std::invalid_argument("crop_resize: region out of bounds");
  Image region(crop_h, crop_w);
  for (int y = 0; y < crop_h; ++y)
    for (int x = 0; x < crop_w; ++x)
      for (int c = 0; c < 3; ++c) region.at(y, x, c) = src.at(y0 + y, x0 + x, c);
  return resize_bilinear(region, src.height, src.width);
}

}  // namespace idea
