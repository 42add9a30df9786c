/*
 * Copyright 2026 The Scene Novelty Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "scenenov/raster/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "scenenov/errors.hpp"

namespace scenenov::raster {

using roadnet::Point;
using roadnet::Polyline;

Image::Image(std::size_t s, float fill) : size(s), pixels(s * s, fill) {
  if (s < 8) throw ParameterError("image size must be >= 8, got " + std::to_string(s));
}

namespace {

constexpr double kMiterLimit = 2.0;

// Left/right boundary of a lane with mitered joins.
void boundaries(const Polyline& c, double half, Polyline& left, Polyline& right) {
  const std::size_t n = c.size();
  left.resize(n);
  right.resize(n);
  auto seg_normal = [&](std::size_t i) {
    const double dx = c[i + 1].x - c[i].x, dy = c[i + 1].y - c[i].y;
    const double len = std::hypot(dx, dy);
    return Point{-dy / len, dx / len};
  };
  for (std::size_t i = 0; i < n; ++i) {
    Point nrm;
    double scale = 1.0;
    if (i == 0) {
      nrm = seg_normal(0);
    } else if (i + 1 == n) {
      nrm = seg_normal(n - 2);
    } else {
      const Point a = seg_normal(i - 1), b = seg_normal(i);
      const double sx = a.x + b.x, sy = a.y + b.y;
      const double len = std::hypot(sx, sy);
      if (len < 1e-9) {
        nrm = b;
      } else {
        nrm = {sx / len, sy / len};
        const double cosv = nrm.x * a.x + nrm.y * a.y;
        scale = std::min(kMiterLimit, 1.0 / std::max(cosv, 1e-9));
      }
    }
    left[i] = {c[i].x + half * scale * nrm.x, c[i].y + half * scale * nrm.y};
    right[i] = {c[i].x - half * scale * nrm.x, c[i].y - half * scale * nrm.y};
  }
}

class Canvas {
 public:
  Canvas(Image& img, Point center, double extent)
      : img_(img), center_(center), inv_px_(double(img.size) / extent), half_(0.5 * double(img.size)) {}

  // World meters to continuous pixel coordinates (u right, v down).
  Point to_pixel(Point p) const {
    return {(p.x - center_.x) * inv_px_ + half_, half_ - (p.y - center_.y) * inv_px_};
  }

  // Even-odd scanline fill sampled at pixel centers.
  void fill(const std::vector<Point>& poly, float value) {
    const long s = static_cast<long>(img_.size);
    double vmin = poly[0].y, vmax = poly[0].y;
    for (const Point& p : poly) {
      vmin = std::min(vmin, p.y);
      vmax = std::max(vmax, p.y);
    }
    const long r0 = std::max(0L, static_cast<long>(std::floor(vmin - 0.5)));
    const long r1 = std::min(s - 1, static_cast<long>(std::ceil(vmax - 0.5)));
    std::vector<double> xs;
    for (long r = r0; r <= r1; ++r) {
      const double v = double(r) + 0.5;
      xs.clear();
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point a = poly[i], b = poly[(i + 1) % poly.size()];
        if ((a.y <= v && v < b.y) || (b.y <= v && v < a.y))
          xs.push_back(a.x + (v - a.y) * (b.x - a.x) / (b.y - a.y));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        const long c0 = std::max(0L, static_cast<long>(std::ceil(xs[k] - 0.5)));
        const long c1 = std::min(s - 1, static_cast<long>(std::ceil(xs[k + 1] - 0.5)) - 1);
        for (long c = c0; c <= c1; ++c) img_.at(std::size_t(r), std::size_t(c)) = value;
      }
    }
  }

  // 1-pixel line: every pixel touched by dense samples along the segment.
  void line(Point a, Point b, float value) {
    const long s = static_cast<long>(img_.size);
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const long steps = static_cast<long>(std::ceil(len * 2.0)) + 1;
    for (long i = 0; i <= steps; ++i) {
      const double t = double(i) / double(steps);
      const long c = static_cast<long>(std::floor(a.x + t * (b.x - a.x)));
      const long r = static_cast<long>(std::floor(a.y + t * (b.y - a.y)));
      if (r >= 0 && r < s && c >= 0 && c < s) img_.at(std::size_t(r), std::size_t(c)) = value;
    }
  }

  // Bounding-box test against the window, in pixel coordinates.
  bool overlaps(const Polyline& a, const Polyline& b) const {
    double umin = a[0].x, umax = a[0].x, vmin = a[0].y, vmax = a[0].y;
    for (const Polyline* line : {&a, &b}) {
      for (const Point& p : *line) {
        umin = std::min(umin, p.x);
        umax = std::max(umax, p.x);
        vmin = std::min(vmin, p.y);
        vmax = std::max(vmax, p.y);
      }
    }
    const double hi = double(img_.size) + 1.0;
    return umax >= -1.0 && umin <= hi && vmax >= -1.0 && vmin <= hi;
  }

 private:
  Image& img_;
  Point center_;
  double inv_px_;
  double half_;
};

double distance_to_polyline(Point p, const Polyline& c) {
  double best = std::hypot(p.x - c[0].x, p.y - c[0].y);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const double dx = c[i + 1].x - c[i].x, dy = c[i + 1].y - c[i].y;
    const double l2 = dx * dx + dy * dy;
    double t = l2 > 0.0 ? ((p.x - c[i].x) * dx + (p.y - c[i].y) * dy) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(p.x - c[i].x - t * dx, p.y - c[i].y - t * dy));
  }
  return best;
}

}  // namespace

Image render(const roadnet::RoadNetwork& net, const RenderParams& params) {
  if (!(params.extent_m > 0.0)) throw ParameterError("extent must be > 0");
  const auto violations = roadnet::validate(net);
  if (!violations.empty()) throw ValidationError(violations.front().path + ": " + violations.front().message);

  const Point q = roadnet::query_point(net);
  bool on_lane = false;
  for (const auto& l : net.lanes)
    on_lane = on_lane || distance_to_polyline(q, l.centerline) <= 0.5 * l.width + 1e-9;
  if (!on_lane) throw GeometryError("query position lies on no lane");

  Image img(params.size);
  Canvas canvas(img, q, params.extent_m);
  std::vector<std::pair<Polyline, Polyline>> edges;
  Polyline left, right;
  for (const auto& l : net.lanes) {
    if (!l.drivable) continue;
    boundaries(l.centerline, 0.5 * l.width, left, right);
    for (auto& p : left) p = canvas.to_pixel(p);
    for (auto& p : right) p = canvas.to_pixel(p);
    if (!canvas.overlaps(left, right)) continue;
    for (std::size_t i = 0; i + 1 < left.size(); ++i)
      canvas.fill({left[i], left[i + 1], right[i + 1], right[i]}, kRoad);
    edges.emplace_back(left, right);
  }
  for (const auto& [l, r] : edges) {
    for (std::size_t i = 0; i + 1 < l.size(); ++i) {
      canvas.line(l[i], l[i + 1], kMarking);
      canvas.line(r[i], r[i + 1], kMarking);
    }
  }
  return img;
}

std::string write_pgm(const Image& image) {
  std::string out = "P5\n" + std::to_string(image.size) + " " + std::to_string(image.size) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (float v : image.pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("pixel value outside [0,1]");
    out.push_back(static_cast<char>(static_cast<unsigned char>(static_cast<int>(v * 255.0f + 0.5f))));
  }
  return out;
}

Image read_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) -> long {
    skip_space();
    long v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (++digits > 6) throw FormatError(std::string("PGM ") + what + " too large");
    }
    if (digits == 0) throw FormatError(std::string("PGM header: missing ") + what);
    return v;
  };
  if (bytes.substr(0, 2) != "P5") throw FormatError("not a binary PGM (expected P5)");
  pos = 2;
  const long w = number("width");
  const long h = number("height");
  const long maxval = number("maxval");
  if (maxval != 255) throw FormatError("PGM maxval must be 255");
  if (w != h) throw FormatError("PGM image must be square");
  if (w < 8) throw FormatError("PGM image smaller than 8x8");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw FormatError("PGM header not terminated");
  ++pos;
  const std::size_t n = std::size_t(w) * std::size_t(h);
  if (bytes.size() - pos < n) throw FormatError("PGM payload truncated");
  if (bytes.size() - pos > n) throw FormatError("PGM payload has trailing bytes");
  Image img(static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = float(static_cast<unsigned char>(bytes[pos + i])) / 255.0f;
  return img;
}

void save_pgm(const Image& image, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  const std::string data = write_pgm(image);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Image load_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return read_pgm(data);
}

}  // namespace scenenov::raster
