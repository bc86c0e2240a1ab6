#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>

#include "catch_amalgamated.hpp"
#include "molbench/chem/smiles.hpp"
#include "molbench/depict.hpp"
#include "support.hpp"

using namespace molbench;
using depict::Point;
using depict::RasterImage;
using depict::Transform;
using depict::TransformKind;

namespace {

constexpr double kPi = 3.14159265358979323846;

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Interior angle at b in degrees.
double angle_deg(Point a, Point b, Point c) {
  const double ux = a.x - b.x, uy = a.y - b.y, vx = c.x - b.x, vy = c.y - b.y;
  return std::acos((ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy))) * 180.0 / kPi;
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + 1)) ++n;
  return n;
}

std::vector<std::string> text_labels(const std::string& svg) {
  static const std::regex re("<text[^>]*>([^<]*)</text>");
  std::vector<std::string> out;
  for (std::sregex_iterator it(svg.begin(), svg.end(), re), end; it != end; ++it) out.push_back((*it)[1]);
  return out;
}

RasterImage draw(const std::string& smiles) { return depict::depict(chem::parse_smiles(smiles)); }

RasterImage gradient_image(int w, int h, std::uint32_t seed) {
  RasterImage img(w, h);
  std::mt19937 rng(seed);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng() % 256);
  return img;
}

}  // namespace

TEST_CASE("single atom sits at the origin", "[depict]") {
  const auto layout = depict::layout_2d(chem::parse_smiles("C"));
  REQUIRE(layout.atoms.size() == 1);
  CHECK(layout.coords[0].x == 0.0);
  CHECK(layout.coords[0].y == 0.0);
}

TEST_CASE("benzene is a regular hexagon", "[depict]") {
  const auto g = chem::parse_smiles("c1ccccc1");
  const auto layout = depict::layout_2d(g);
  const auto& p = layout.coords;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(dist(p[i], p[(i + 1) % 6]) == Catch::Approx(1.0).margin(1e-9));
    CHECK(angle_deg(p[(i + 5) % 6], p[i], p[(i + 1) % 6]) == Catch::Approx(120.0).margin(1e-7));
  }
}

TEST_CASE("fused rings keep unit bonds and regular angles", "[depict]") {
  for (const char* smi : {"c1ccc2ccccc2c1", "C1CC2CCC1C2", "c1ccc2c(c1)ccc1ccccc12", "C1CCC2(CC1)CCCC2"}) {
    CAPTURE(smi);
    const auto g = chem::parse_smiles(smi);
    const auto layout = depict::layout_2d(g);
    for (const auto& b : g.bonds()) {
      const double d = dist(layout.coords[b.begin], layout.coords[b.end]);
      CHECK(d >= 0.5);
      CHECK(d <= 2.0);
    }
    CHECK(layout.close_contacts == 0);
  }
  // Naphthalene is two exact hexagons.
  const auto g = chem::parse_smiles("c1ccc2ccccc2c1");
  const auto layout = depict::layout_2d(g);
  for (const auto& b : g.bonds()) CHECK(dist(layout.coords[b.begin], layout.coords[b.end]) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("pentane is a 120 degree zigzag", "[depict]") {
  const auto g = chem::parse_smiles("CCCCC");
  const auto layout = depict::layout_2d(g);
  const auto& p = layout.coords;
  std::vector<double> heading;
  for (std::size_t i = 0; i + 1 < 5; ++i) {
    CHECK(dist(p[i], p[i + 1]) == Catch::Approx(1.0).margin(1e-9));
    heading.push_back(std::atan2(p[i + 1].y - p[i].y, p[i + 1].x - p[i].x) * 180.0 / kPi);
  }
  // Consecutive segments turn by 60 degrees with alternating sign.
  std::vector<double> turns;
  for (std::size_t i = 0; i + 1 < heading.size(); ++i) {
    double t = heading[i + 1] - heading[i];
    while (t > 180) t -= 360;
    while (t < -180) t += 360;
    turns.push_back(t);
  }
  for (double t : turns) CHECK(std::abs(t) == Catch::Approx(60.0).margin(1e-7));
  CHECK(turns[0] == Catch::Approx(-turns[1]).margin(1e-7));
  CHECK(turns[1] == Catch::Approx(-turns[2]).margin(1e-7));
  // Segments sit symmetrically about the chain axis: p0, p2, p4 collinear.
  const double cross = (p[2].x - p[0].x) * (p[4].y - p[0].y) - (p[2].y - p[0].y) * (p[4].x - p[0].x);
  CHECK(cross == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("disconnected input draws the largest fragment", "[depict]") {
  const auto g = chem::parse_smiles("[Na+].CC(=O)[O-]");
  const auto layout = depict::layout_2d(g);
  CHECK(layout.atoms.size() == 4);
  CHECK_FALSE(layout.contains(0));
  REQUIRE(layout.diagnostics.size() == 1);
}

TEST_CASE("corpus layouts are finite with sane bond lengths", "[depict]") {
  const auto corpus = testing::load_corpus();
  REQUIRE(corpus.size() > 100);
  std::size_t with_contacts = 0;
  for (const auto& e : corpus) {
    CAPTURE(e.name, e.smiles);
    const auto g = chem::parse_smiles(e.smiles);
    const auto layout = depict::layout_2d(g);
    for (auto a : layout.atoms) {
      REQUIRE(std::isfinite(layout.coords[a].x));
      REQUIRE(std::isfinite(layout.coords[a].y));
    }
    for (const auto& b : g.bonds()) {
      if (!layout.contains(b.begin)) continue;
      const double d = dist(layout.coords[b.begin], layout.coords[b.end]);
      CHECK(d >= 0.5);
      CHECK(d <= 2.0);
    }
    // Independent recount of the close-contact statistic.
    std::size_t contacts = 0;
    for (std::size_t i = 0; i < layout.atoms.size(); ++i) {
      for (std::size_t j = i + 1; j < layout.atoms.size(); ++j) {
        const auto a = layout.atoms[i], b = layout.atoms[j];
        if (g.bond_between(a, b)) continue;
        contacts += dist(layout.coords[a], layout.coords[b]) < 0.3;
      }
    }
    CHECK(contacts == layout.close_contacts);
    with_contacts += contacts > 0;
  }
  CHECK(static_cast<double>(with_contacts) < 0.02 * static_cast<double>(corpus.size()));
}

TEST_CASE("ethanol svg has two strokes and one OH label", "[depict]") {
  const auto g = chem::parse_smiles("CCO");
  const auto svg = depict::render_svg(g, depict::layout_2d(g));
  CHECK(count_substr(svg, "<line ") == 2);
  CHECK(text_labels(svg) == std::vector<std::string>{"OH"});
}

TEST_CASE("labels and multiple bond strokes", "[depict]") {
  auto labels_of = [](const std::string& smi) {
    const auto g = chem::parse_smiles(smi);
    return text_labels(depict::render_svg(g, depict::layout_2d(g)));
  };
  CHECK(labels_of("C") == std::vector<std::string>{"CH4"});
  CHECK(labels_of("O") == std::vector<std::string>{"OH2"});
  CHECK(labels_of("CCCC").empty());
  CHECK(labels_of("C[N+](C)(C)C") == std::vector<std::string>{"N+"});
  CHECK(labels_of("[13CH3]C") == std::vector<std::string>{"13CH3"});

  auto lines_of = [](const std::string& smi) {
    const auto g = chem::parse_smiles(smi);
    return count_substr(depict::render_svg(g, depict::layout_2d(g)), "<line ");
  };
  CHECK(lines_of("C=C") == 2);
  CHECK(lines_of("CC#N") == 4);
  // Kekule benzene: three single and three doubled strokes.
  CHECK(lines_of("c1ccccc1") == 9);
}

TEST_CASE("depiction is deterministic and numbering independent", "[depict]") {
  const auto corpus = testing::load_corpus();
  std::mt19937 rng(7);
  for (std::size_t k = 0; k < corpus.size(); k += 7) {
    CAPTURE(corpus[k].smiles);
    const auto g = chem::parse_smiles(corpus[k].smiles);
    const auto svg = depict::render_svg(g, depict::layout_2d(g));
    CHECK(svg == depict::render_svg(g, depict::layout_2d(g)));
    std::vector<std::size_t> perm(g.atom_count());
    std::iota(perm.begin(), perm.end(), 0);
    for (int t = 0; t < 3; ++t) {
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto pg = g.permuted(perm);
      CHECK(depict::render_svg(pg, depict::layout_2d(pg)) == svg);
    }
  }
  CHECK(draw("CCO") == draw("OCC"));
}

TEST_CASE("rasterizer basics", "[depict]") {
  const std::string blank =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"64\" height=\"64\" viewBox=\"0 0 64 64\">"
      "<rect x=\"0\" y=\"0\" width=\"64\" height=\"64\" fill=\"#ffffff\"/></svg>";
  const auto img = depict::rasterize(blank, 64, 64);
  CHECK(img.width == 64);
  CHECK(img.pixels.size() == 64u * 64u * 3u);
  CHECK(img.ink_pixels() == 0);

  const std::string one_line =
      "<svg width=\"10\" height=\"10\"><line x1=\"0\" y1=\"5\" x2=\"10\" y2=\"5\" stroke=\"#000000\" stroke-width=\"1\"/></svg>";
  const auto line = depict::rasterize(one_line, 10, 10);
  // A horizontal unit-width line covers whole pixel rows centred on y=5.
  for (int x = 0; x < 10; ++x) CHECK(line.at(x, 4)[0] == 0);
  CHECK(line.at(0, 0)[0] == 255);

  CHECK_THROWS_MATCHES(depict::rasterize("<svg><circle r=\"3\"/></svg>", 8, 8), depict::DepictError,
                       Catch::Matchers::Predicate<depict::DepictError>(
                           [](const auto& e) { return e.kind() == depict::DepictError::Kind::UnsupportedSvgFeature; }));
  CHECK_THROWS_MATCHES(depict::rasterize("<svg><line x1=\"0\"></svg>", 8, 8), depict::DepictError,
                       Catch::Matchers::Predicate<depict::DepictError>(
                           [](const auto& e) { return e.kind() == depict::DepictError::Kind::MalformedSvg; }));
}

TEST_CASE("ethanol raster ink stays in the recorded band", "[depict]") {
  const auto img = draw("CCO");
  CHECK(img.width == 384);
  CHECK(img.height == 384);
  // Recorded on the first visually checked run: 277 ink pixels, +-10%.
  CHECK(img.ink_pixels() >= 249);
  CHECK(img.ink_pixels() <= 305);
  CHECK(draw("CCO") == img);
}

TEST_CASE("transform parameters and names", "[depict]") {
  const auto all = depict::augmentation_transforms();
  REQUIRE(all.size() == 12);
  for (const auto& t : all) {
    const auto back = depict::parse_transform(t.name());
    REQUIRE(back.has_value());
    CHECK(*back == t);
  }
  CHECK(Transform::solarize(128).name() == "Solarize(128)");
  CHECK(depict::parse_transform("Posterize(3)") == Transform::posterize(3));
  CHECK_FALSE(depict::parse_transform("Posterize(9)").has_value());
  CHECK_FALSE(depict::parse_transform("Rotate30").has_value());
  CHECK_FALSE(depict::parse_transform("FlipH(1)").has_value());
  CHECK_THROWS_AS(Transform::posterize(0), std::invalid_argument);
  CHECK_THROWS_AS(Transform::solarize(256), std::invalid_argument);
}

TEST_CASE("pointwise transforms", "[depict]") {
  RasterImage img(2, 1);
  img.pixels = {200, 127, 128, 0, 255, 77};
  CHECK(depict::apply_transform(img, Transform::solarize(128)).pixels ==
        std::vector<std::uint8_t>{55, 127, 127, 0, 0, 77});
  CHECK(depict::apply_transform(img, Transform::posterize(4)).pixels ==
        std::vector<std::uint8_t>{192, 112, 128, 0, 240, 64});
  CHECK(depict::apply_transform(img, Transform::posterize(8)) == img);

  const Transform ac{TransformKind::AutoContrast, 0};
  RasterImage constant(5, 4, 90);
  CHECK(depict::apply_transform(constant, ac) == constant);
  CHECK(depict::apply_transform(RasterImage(3, 3), ac) == RasterImage(3, 3));

  // Ink spanning [50, 150] stretches to [0, 255]; white background is untouched.
  RasterImage ink(3, 1);
  ink.pixels = {50, 50, 50, 150, 150, 150, 255, 255, 255};
  CHECK(depict::apply_transform(ink, ac).pixels == std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255, 255, 255, 255});
}

TEST_CASE("geometric transform identities", "[depict]") {
  const Transform r90{TransformKind::Rotate90, 0}, r180{TransformKind::Rotate180, 0}, r270{TransformKind::Rotate270, 0};
  const Transform fh{TransformKind::FlipH, 0}, fv{TransformKind::FlipV, 0};
  for (const auto& img : {gradient_image(7, 5, 1), gradient_image(6, 6, 2), draw("c1ccccc1O")}) {
    using depict::apply_transform;
    CHECK(apply_transform(apply_transform(img, r180), r180) == img);
    CHECK(apply_transform(apply_transform(img, fh), fh) == img);
    CHECK(apply_transform(apply_transform(img, fv), fv) == img);
    CHECK(apply_transform(apply_transform(img, r90), r90) == apply_transform(img, r180));
    CHECK(apply_transform(apply_transform(img, r90), r270) == img);
    CHECK(apply_transform(apply_transform(img, fh), fv) == apply_transform(img, r180));
  }
  // Clockwise: the top-left pixel moves to the top-right corner.
  auto img = gradient_image(4, 3, 9);
  const auto rot = depict::apply_transform(img, r90);
  CHECK(rot.width == 3);
  CHECK(rot.height == 4);
  CHECK(std::equal(img.at(0, 0), img.at(0, 0) + 3, rot.at(2, 0)));
}

TEST_CASE("45 degree rotations expand the canvas with white", "[depict]") {
  RasterImage white(100, 50);
  const auto r = depict::apply_transform(white, {TransformKind::Rotate45, 0});
  CHECK(r.width == static_cast<int>(std::ceil(150 / std::sqrt(2.0) - 1e-9)));
  CHECK(r.height == r.width);
  CHECK(r.ink_pixels() == 0);

  // A centred black square stays dark at the centre and the corners stay white.
  RasterImage sq(41, 41);
  for (int y = 15; y < 26; ++y)
    for (int x = 15; x < 26; ++x) std::fill_n(sq.at(x, y), 3, 0);
  const auto r45 = depict::apply_transform(sq, {TransformKind::Rotate45, 0});
  CHECK(r45.at(r45.width / 2, r45.height / 2)[0] == 0);
  CHECK(r45.at(0, 0)[0] == 255);
  CHECK(r45.at(r45.width - 1, r45.height - 1)[0] == 255);
}

TEST_CASE("png round trip", "[depict]") {
  const auto img = gradient_image(13, 7, 3);
  const auto png = depict::encode_png(img);
  CHECK(png.substr(1, 3) == "PNG");
  CHECK(depict::decode_png(png) == img);
  const auto mol = draw("CC(=O)Nc1ccc(O)cc1");
  CHECK(depict::decode_png(depict::encode_png(mol)) == mol);
  auto broken = png;
  broken[20] = static_cast<char>(broken[20] ^ 0x01);
  CHECK_THROWS(depict::decode_png(broken));
  CHECK_THROWS(depict::decode_png("not a png"));
}

TEST_CASE("image paths are keyed by canonical smiles", "[depict]") {
  const auto p = depict::image_relpath("bace", "CCO");
  CHECK(std::regex_match(p, std::regex("bace/[0-9a-f]{16}\\.png")));
  CHECK(p == depict::image_relpath("bace", "CCO"));
  CHECK(p != depict::image_relpath("bace", "OCC"));
}
