#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "molbench/depict.hpp"

namespace molbench::depict {

namespace {

// Exact clockwise quarter turns.
RasterImage rotate_quarter(const RasterImage& src, int quarters) {
  quarters = ((quarters % 4) + 4) % 4;
  if (quarters == 0) return src;
  const int w = src.width, h = src.height;
  RasterImage dst(quarters == 2 ? w : h, quarters == 2 ? h : w);
  for (int y = 0; y < dst.height; ++y) {
    for (int x = 0; x < dst.width; ++x) {
      int sx = 0, sy = 0;
      switch (quarters) {
        case 1: sx = y; sy = h - 1 - x; break;
        case 2: sx = w - 1 - x; sy = h - 1 - y; break;
        default: sx = w - 1 - y; sy = x; break;
      }
      std::copy_n(src.at(sx, sy), 3, dst.at(x, y));
    }
  }
  return dst;
}

// Clockwise rotation by an odd multiple of 45 degrees onto a canvas that holds
// the whole rotated image. Samples outside the source read as white.
RasterImage rotate_bilinear(const RasterImage& src, int eighths) {
  const double angle = eighths * std::numbers::pi / 4.0;
  const double c = std::cos(angle), s = std::sin(angle);
  const int w = src.width, h = src.height;
  const int dw = static_cast<int>(std::ceil(std::abs(w * c) + std::abs(h * s) - 1e-9));
  const int dh = static_cast<int>(std::ceil(std::abs(w * s) + std::abs(h * c) - 1e-9));
  RasterImage dst(dw, dh);
  const double scx = w / 2.0, scy = h / 2.0, dcx = dw / 2.0, dcy = dh / 2.0;
  auto sample = [&](int x, int y, int ch) -> double {
    if (x < 0 || y < 0 || x >= w || y >= h) return 255.0;
    return src.at(x, y)[ch];
  };
  for (int y = 0; y < dh; ++y) {
    for (int x = 0; x < dw; ++x) {
      // Inverse map: rotate the destination pixel centre counter-clockwise.
      const double dx = x + 0.5 - dcx, dy = y + 0.5 - dcy;
      const double ux = c * dx + s * dy + scx - 0.5;
      const double uy = -s * dx + c * dy + scy - 0.5;
      const int x0 = static_cast<int>(std::floor(ux)), y0 = static_cast<int>(std::floor(uy));
      const double fx = ux - x0, fy = uy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = sample(x0, y0, ch) * (1 - fx) + sample(x0 + 1, y0, ch) * fx;
        const double bottom = sample(x0, y0 + 1, ch) * (1 - fx) + sample(x0 + 1, y0 + 1, ch) * fx;
        const double v = top * (1 - fy) + bottom * fy;
        dst.at(x, y)[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return dst;
}

RasterImage flip(const RasterImage& src, bool horizontal) {
  RasterImage dst(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const int sx = horizontal ? src.width - 1 - x : x;
      const int sy = horizontal ? y : src.height - 1 - y;
      std::copy_n(src.at(sx, sy), 3, dst.at(x, y));
    }
  }
  return dst;
}

bool is_white(const std::uint8_t* p) { return p[0] == 255 && p[1] == 255 && p[2] == 255; }

RasterImage auto_contrast(const RasterImage& src) {
  int lo[3] = {255, 255, 255}, hi[3] = {0, 0, 0};
  bool any = false;
  for (std::size_t i = 0; i < src.pixels.size(); i += 3) {
    if (is_white(&src.pixels[i])) continue;
    any = true;
    for (int ch = 0; ch < 3; ++ch) {
      lo[ch] = std::min<int>(lo[ch], src.pixels[i + static_cast<std::size_t>(ch)]);
      hi[ch] = std::max<int>(hi[ch], src.pixels[i + static_cast<std::size_t>(ch)]);
    }
  }
  RasterImage dst = src;
  if (!any) return dst;
  for (std::size_t i = 0; i < dst.pixels.size(); i += 3) {
    if (is_white(&src.pixels[i])) continue;
    for (int ch = 0; ch < 3; ++ch) {
      if (hi[ch] <= lo[ch]) continue;
      auto& v = dst.pixels[i + static_cast<std::size_t>(ch)];
      v = static_cast<std::uint8_t>(std::lround((v - lo[ch]) * 255.0 / (hi[ch] - lo[ch])));
    }
  }
  return dst;
}

constexpr const char* kNames[] = {"Rotate45",  "Rotate90", "Rotate135", "Rotate180", "Rotate225", "Rotate270",
                                  "Rotate315", "FlipH",    "FlipV",     "Solarize",  "Posterize", "AutoContrast"};

}  // namespace

Transform Transform::solarize(int threshold) {
  if (threshold < 0 || threshold > 255) throw std::invalid_argument("solarize threshold must be in [0,255]");
  return {TransformKind::Solarize, threshold};
}

Transform Transform::posterize(int bits) {
  if (bits < 1 || bits > 8) throw std::invalid_argument("posterize bits must be in [1,8]");
  return {TransformKind::Posterize, bits};
}

std::string Transform::name() const {
  std::string out = kNames[static_cast<int>(kind)];
  if (kind == TransformKind::Solarize || kind == TransformKind::Posterize) out += "(" + std::to_string(param) + ")";
  return out;
}

std::vector<Transform> augmentation_transforms() {
  std::vector<Transform> out;
  for (int k = 0; k <= static_cast<int>(TransformKind::FlipV); ++k) out.push_back({static_cast<TransformKind>(k), 0});
  out.push_back(Transform::solarize(kDefaultSolarizeThreshold));
  out.push_back(Transform::posterize(kDefaultPosterizeBits));
  out.push_back({TransformKind::AutoContrast, 0});
  return out;
}

std::optional<Transform> parse_transform(std::string_view name) {
  std::string_view base = name;
  std::optional<int> arg;
  if (const auto open = name.find('('); open != std::string_view::npos) {
    if (name.back() != ')') return std::nullopt;
    base = name.substr(0, open);
    const std::string digits(name.substr(open + 1, name.size() - open - 2));
    if (digits.empty() || digits.size() > 3 || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    arg = std::stoi(digits);
  }
  for (int k = 0; k < static_cast<int>(std::size(kNames)); ++k) {
    if (base != kNames[k]) continue;
    const auto kind = static_cast<TransformKind>(k);
    try {
      if (kind == TransformKind::Solarize) return Transform::solarize(arg.value_or(kDefaultSolarizeThreshold));
      if (kind == TransformKind::Posterize) return Transform::posterize(arg.value_or(kDefaultPosterizeBits));
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
    if (arg) return std::nullopt;
    return Transform{kind, 0};
  }
  return std::nullopt;
}

RasterImage apply_transform(const RasterImage& image, const Transform& t) {
  switch (t.kind) {
    case TransformKind::Rotate90: return rotate_quarter(image, 1);
    case TransformKind::Rotate180: return rotate_quarter(image, 2);
    case TransformKind::Rotate270: return rotate_quarter(image, 3);
    case TransformKind::Rotate45: return rotate_bilinear(image, 1);
    case TransformKind::Rotate135: return rotate_bilinear(image, 3);
    case TransformKind::Rotate225: return rotate_bilinear(image, 5);
    case TransformKind::Rotate315: return rotate_bilinear(image, 7);
    case TransformKind::FlipH: return flip(image, true);
    case TransformKind::FlipV: return flip(image, false);
    case TransformKind::Solarize: {
      RasterImage out = image;
      for (auto& v : out.pixels) {
        if (v >= t.param) v = static_cast<std::uint8_t>(255 - v);
      }
      return out;
    }
    case TransformKind::Posterize: {
      RasterImage out = image;
      const auto mask = static_cast<std::uint8_t>(0xFF << (8 - t.param));
      for (auto& v : out.pixels) v &= mask;
      return out;
    }
    case TransformKind::AutoContrast: return auto_contrast(image);
  }
  return image;
}

}  // namespace molbench::depict
