#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "molbench/chem/selfies.hpp"
#include "internal.hpp"
#include "molbench/chem/smiles.hpp"
#include "molbench/depict.hpp"
#include "molbench/util/hash.hpp"

namespace molbench::depict {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid "-0.00" so identical geometry always prints identically.
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

const char* atom_color(int z) {
  switch (z) {
    case 7: return "#0000ff";
    case 8: return "#ff0000";
    case 9: case 17: return "#00a000";
    case 35: return "#a52a2a";
    case 53: return "#940094";
    case 15: return "#ff8000";
    case 16: return "#b0b000";
    default: return "#000000";
  }
}

std::string charge_text(int q) {
  if (q == 0) return {};
  const std::string sign = q > 0 ? "+" : "-";
  const int m = std::abs(q);
  return m == 1 ? sign : std::to_string(m) + sign;
}

}  // namespace

std::string render_svg(const chem::MolecularGraph& graph, const Layout2D& input_layout, const SvgStyle& style) {
  // Drawn in canonical numbering so output bytes do not depend on input atom order.
  const auto rank = graph.empty() ? std::vector<std::size_t>{} : chem::canonical_order(graph);
  chem::MolecularGraph drawn = detail::canonical_copy(graph, rank);
  // Kekule form when available so aromatic rings show alternating double bonds.
  try {
    drawn = chem::kekulize(drawn);
  } catch (const chem::SelfiesError&) {
  }
  Layout2D layout;
  layout.coords.resize(drawn.atom_count());
  for (std::size_t i = 0; i < rank.size(); ++i) layout.coords[rank[i]] = input_layout.coords.at(i);
  for (auto a : input_layout.atoms) layout.atoms.push_back(rank[a]);
  std::sort(layout.atoms.begin(), layout.atoms.end());

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(style.width) +
         "\" height=\"" + std::to_string(style.height) + "\" viewBox=\"0 0 " + std::to_string(style.width) + " " +
         std::to_string(style.height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(style.width) + "\" height=\"" + std::to_string(style.height) +
         "\" fill=\"#ffffff\"/>\n";
  if (layout.atoms.empty()) {
    out += "</svg>\n";
    return out;
  }

  double minx = std::numeric_limits<double>::max(), maxx = -minx, miny = minx, maxy = -minx;
  for (auto a : layout.atoms) {
    minx = std::min(minx, layout.coords[a].x);
    maxx = std::max(maxx, layout.coords[a].x);
    miny = std::min(miny, layout.coords[a].y);
    maxy = std::max(maxy, layout.coords[a].y);
  }
  const double span_x = std::max(maxx - minx, 1e-9);
  const double span_y = std::max(maxy - miny, 1e-9);
  const double scale = std::min({(style.width - 2 * style.margin) / span_x, (style.height - 2 * style.margin) / span_y,
                                 style.max_bond_px});
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  // Screen y grows downwards; flip so the layout's +y points up.
  auto sx = [&](double x) { return style.width / 2.0 + (x - cx) * scale; };
  auto sy = [&](double y) { return style.height / 2.0 - (y - cy) * scale; };

  std::vector<std::string> labels(drawn.atom_count());
  const bool isolated = layout.atoms.size() == 1;
  for (auto a : layout.atoms) {
    const auto& atom = drawn.atom(a);
    const bool show = atom.atomic_number != 6 || atom.formal_charge != 0 || atom.isotope || isolated;
    if (!show) continue;
    std::string text;
    if (atom.isotope) text += std::to_string(*atom.isotope);
    text += atom.symbol();
    const int h = atom.hydrogen_count();
    if (h > 0) text += h == 1 ? std::string("H") : "H" + std::to_string(h);
    text += charge_text(atom.formal_charge);
    labels[a] = text;
  }

  const double label_gap = style.font_size * 0.55;
  const double offset = std::max(3.0, scale * 0.12);
  for (std::size_t b = 0; b < drawn.bond_count(); ++b) {
    const auto& bond = drawn.bond(b);
    if (!layout.contains(bond.begin)) continue;
    double x1 = sx(layout.coords[bond.begin].x), y1 = sy(layout.coords[bond.begin].y);
    double x2 = sx(layout.coords[bond.end].x), y2 = sy(layout.coords[bond.end].y);
    const double len = std::hypot(x2 - x1, y2 - y1);
    if (len < 1e-9) continue;
    const double ux = (x2 - x1) / len, uy = (y2 - y1) / len;
    // Leave room around labelled atoms.
    if (!labels[bond.begin].empty()) {
      x1 += ux * label_gap;
      y1 += uy * label_gap;
    }
    if (!labels[bond.end].empty()) {
      x2 -= ux * label_gap;
      y2 -= uy * label_gap;
    }
    const double nx = -uy, ny = ux;
    std::vector<double> offsets;
    switch (bond.order) {
      case chem::BondOrder::Double: offsets = {-offset / 2, offset / 2}; break;
      case chem::BondOrder::Triple: offsets = {-offset, 0.0, offset}; break;
      default: offsets = {0.0}; break;
    }
    for (double o : offsets) {
      out += "<line x1=\"" + fmt(x1 + nx * o) + "\" y1=\"" + fmt(y1 + ny * o) + "\" x2=\"" + fmt(x2 + nx * o) +
             "\" y2=\"" + fmt(y2 + ny * o) + "\" stroke=\"#000000\" stroke-width=\"" + fmt(style.stroke) + "\"/>\n";
    }
  }

  // Monospace advance of the raster font; the element symbol is centred on the atom.
  const double advance = 0.75 * style.font_size;
  for (auto a : layout.atoms) {
    if (labels[a].empty()) continue;
    const auto& atom = drawn.atom(a);
    const double lead = static_cast<double>(atom.isotope ? std::to_string(*atom.isotope).size() : 0) +
                        static_cast<double>(atom.symbol().size()) / 2.0;
    out += "<text x=\"" + fmt(sx(layout.coords[a].x) - lead * advance) + "\" y=\"" + fmt(sy(layout.coords[a].y)) +
           "\" font-size=\"" + fmt(style.font_size) + "\" text-anchor=\"start\" dominant-baseline=\"central\" fill=\"" +
           atom_color(atom.atomic_number) + "\">" + labels[a] + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string image_relpath(std::string_view dataset, std::string_view canonical_smiles) {
  return std::string(dataset) + "/" + util::hex64(util::fnv1a64(canonical_smiles)) + ".png";
}

}  // namespace molbench::depict
