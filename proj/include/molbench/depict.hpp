#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molbench/chem/graph.hpp"

namespace molbench::depict {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 2D coordinates in bond-length units. Only atoms of the drawn fragment are
/// listed in `atoms`; coords is indexed by graph atom index.
struct Layout2D {
  std::vector<std::size_t> atoms;
  std::vector<Point> coords;
  std::vector<std::string> diagnostics;
  /// Non-bonded atom pairs closer than 0.3 bond units after relaxation.
  std::size_t close_contacts = 0;

  bool contains(std::size_t atom) const;
};

class DepictError : public std::runtime_error {
 public:
  enum class Kind { LayoutFailure, UnsupportedSvgFeature, MalformedSvg };
  DepictError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Rings as regular polygons (fused systems built edge by edge), chains as
/// 120 degree zigzags, then a capped relaxation if non-bonded atoms clash.
/// Disconnected graphs are laid out for their largest fragment only.
Layout2D layout_2d(const chem::MolecularGraph& graph);

/// Smallest set of smallest rings as atom cycles, each listed in ring order.
std::vector<std::vector<std::size_t>> smallest_rings(const chem::MolecularGraph& graph);

struct SvgStyle {
  int width = 384;
  int height = 384;
  double margin = 24.0;
  double max_bond_px = 40.0;
  double stroke = 2.0;
  double font_size = 16.0;
};

/// SVG 1.1 subset: one background rect, one line per stroke, one text per label.
std::string render_svg(const chem::MolecularGraph& graph, const Layout2D& layout, const SvgStyle& style = {});

struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB8

  RasterImage() = default;
  RasterImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3];
  }
  /// Pixels that are not pure white.
  std::size_t ink_pixels() const;

  bool operator==(const RasterImage&) const = default;
};

/// Rasterizes the subset emitted by render_svg (svg, rect, line, polyline, text)
/// without anti-aliasing. Other elements raise UnsupportedSvgFeature.
RasterImage rasterize(std::string_view svg, int width, int height);

/// Layout, SVG and raster in one step.
RasterImage depict(const chem::MolecularGraph& graph, int width = 384, int height = 384);

enum class TransformKind {
  Rotate45,
  Rotate90,
  Rotate135,
  Rotate180,
  Rotate225,
  Rotate270,
  Rotate315,
  FlipH,
  FlipV,
  Solarize,
  Posterize,
  AutoContrast
};

struct Transform {
  TransformKind kind = TransformKind::Rotate90;
  int param = 0;  // Solarize threshold [0,255] or Posterize bits [1,8]

  static Transform solarize(int threshold);
  static Transform posterize(int bits);

  std::string name() const;
  bool operator==(const Transform&) const = default;
};

inline constexpr int kDefaultSolarizeThreshold = 128;
inline constexpr int kDefaultPosterizeBits = 4;

/// The twelve augmentation transforms with their default parameters.
std::vector<Transform> augmentation_transforms();

/// Parses names produced by Transform::name ("Rotate45", "Solarize(128)", ...).
std::optional<Transform> parse_transform(std::string_view name);

/// Rotations are clockwise on screen. Multiples of 90 degrees permute pixels
/// exactly; 45 degree steps sample bilinearly onto an enlarged white canvas.
RasterImage apply_transform(const RasterImage& image, const Transform& t);

/// PNG (8-bit RGB) through libpng.
std::string encode_png(const RasterImage& image);
RasterImage decode_png(std::string_view bytes);

/// Relative image path for a molecule: "<dataset>/<16 hex digits>.png".
std::string image_relpath(std::string_view dataset, std::string_view canonical_smiles);

}  // namespace molbench::depict
