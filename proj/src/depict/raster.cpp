#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <map>
#include <optional>

#include "molbench/depict.hpp"

namespace molbench::depict {

namespace {

// Classic 5x7 glyphs for ASCII 32..126, column-major, bit 0 at the top.
constexpr std::array<std::array<std::uint8_t, 5>, 95> kFont = {{
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5F, 0x00, 0x00}, {0x00, 0x07, 0x00, 0x07, 0x00},
    {0x14, 0x7F, 0x14, 0x7F, 0x14}, {0x24, 0x2A, 0x7F, 0x2A, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x55, 0x22, 0x50}, {0x00, 0x05, 0x03, 0x00, 0x00}, {0x00, 0x1C, 0x22, 0x41, 0x00},
    {0x00, 0x41, 0x22, 0x1C, 0x00}, {0x08, 0x2A, 0x1C, 0x2A, 0x08}, {0x08, 0x08, 0x3E, 0x08, 0x08},
    {0x00, 0x50, 0x30, 0x00, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08}, {0x00, 0x60, 0x60, 0x00, 0x00},
    {0x20, 0x10, 0x08, 0x04, 0x02}, {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
    {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31}, {0x18, 0x14, 0x12, 0x7F, 0x10},
    {0x27, 0x45, 0x45, 0x45, 0x39}, {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E}, {0x00, 0x36, 0x36, 0x00, 0x00},
    {0x00, 0x56, 0x36, 0x00, 0x00}, {0x00, 0x08, 0x14, 0x22, 0x41}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x41, 0x22, 0x14, 0x08, 0x00}, {0x02, 0x01, 0x51, 0x09, 0x06}, {0x32, 0x49, 0x79, 0x41, 0x3E},
    {0x7E, 0x11, 0x11, 0x11, 0x7E}, {0x7F, 0x49, 0x49, 0x49, 0x36}, {0x3E, 0x41, 0x41, 0x41, 0x22},
    {0x7F, 0x41, 0x41, 0x22, 0x1C}, {0x7F, 0x49, 0x49, 0x49, 0x41}, {0x7F, 0x09, 0x09, 0x01, 0x01},
    {0x3E, 0x41, 0x41, 0x51, 0x32}, {0x7F, 0x08, 0x08, 0x08, 0x7F}, {0x00, 0x41, 0x7F, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3F, 0x01}, {0x7F, 0x08, 0x14, 0x22, 0x41}, {0x7F, 0x40, 0x40, 0x40, 0x40},
    {0x7F, 0x02, 0x04, 0x02, 0x7F}, {0x7F, 0x04, 0x08, 0x10, 0x7F}, {0x3E, 0x41, 0x41, 0x41, 0x3E},
    {0x7F, 0x09, 0x09, 0x09, 0x06}, {0x3E, 0x41, 0x51, 0x21, 0x5E}, {0x7F, 0x09, 0x19, 0x29, 0x46},
    {0x46, 0x49, 0x49, 0x49, 0x31}, {0x01, 0x01, 0x7F, 0x01, 0x01}, {0x3F, 0x40, 0x40, 0x40, 0x3F},
    {0x1F, 0x20, 0x40, 0x20, 0x1F}, {0x7F, 0x20, 0x18, 0x20, 0x7F}, {0x63, 0x14, 0x08, 0x14, 0x63},
    {0x03, 0x04, 0x78, 0x04, 0x03}, {0x61, 0x51, 0x49, 0x45, 0x43}, {0x00, 0x00, 0x7F, 0x41, 0x41},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x41, 0x41, 0x7F, 0x00, 0x00}, {0x04, 0x02, 0x01, 0x02, 0x04},
    {0x40, 0x40, 0x40, 0x40, 0x40}, {0x00, 0x01, 0x02, 0x04, 0x00}, {0x20, 0x54, 0x54, 0x54, 0x78},
    {0x7F, 0x48, 0x44, 0x44, 0x38}, {0x38, 0x44, 0x44, 0x44, 0x20}, {0x38, 0x44, 0x44, 0x48, 0x7F},
    {0x38, 0x54, 0x54, 0x54, 0x18}, {0x08, 0x7E, 0x09, 0x01, 0x02}, {0x08, 0x14, 0x54, 0x54, 0x3C},
    {0x7F, 0x08, 0x04, 0x04, 0x78}, {0x00, 0x44, 0x7D, 0x40, 0x00}, {0x20, 0x40, 0x44, 0x3D, 0x00},
    {0x00, 0x7F, 0x10, 0x28, 0x44}, {0x00, 0x41, 0x7F, 0x40, 0x00}, {0x7C, 0x04, 0x18, 0x04, 0x78},
    {0x7C, 0x08, 0x04, 0x04, 0x78}, {0x38, 0x44, 0x44, 0x44, 0x38}, {0x7C, 0x14, 0x14, 0x14, 0x08},
    {0x08, 0x14, 0x14, 0x18, 0x7C}, {0x7C, 0x08, 0x04, 0x04, 0x08}, {0x48, 0x54, 0x54, 0x54, 0x20},
    {0x04, 0x3F, 0x44, 0x40, 0x20}, {0x3C, 0x40, 0x40, 0x20, 0x7C}, {0x1C, 0x20, 0x40, 0x20, 0x1C},
    {0x3C, 0x40, 0x30, 0x40, 0x3C}, {0x44, 0x28, 0x10, 0x28, 0x44}, {0x0C, 0x50, 0x50, 0x50, 0x3C},
    {0x44, 0x64, 0x54, 0x4C, 0x44}, {0x00, 0x08, 0x36, 0x41, 0x00}, {0x00, 0x00, 0x7F, 0x00, 0x00},
    {0x00, 0x41, 0x36, 0x08, 0x00}, {0x08, 0x04, 0x08, 0x10, 0x08},
}};

struct Element {
  std::string name;
  std::map<std::string, std::string> attrs;
  std::string text;
};

[[noreturn]] void malformed(const std::string& what) { throw DepictError(DepictError::Kind::MalformedSvg, what); }

std::string decode_entities(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos) malformed("unterminated entity");
    const auto ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else malformed("unknown entity &" + std::string(ent) + ";");
    i = semi;
  }
  return out;
}

// Flat element list; nesting is only used to attach character data to <text>.
std::vector<Element> parse_elements(std::string_view s) {
  std::vector<Element> out;
  std::vector<std::string> open;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  while (i < s.size()) {
    if (s[i] != '<') {
      const auto next = s.find('<', i);
      const auto chunk = s.substr(i, next == std::string_view::npos ? s.size() - i : next - i);
      if (!open.empty() && open.back() == "text" && !out.empty()) {
        out.back().text += decode_entities(chunk);
      } else if (chunk.find_first_not_of(" \t\r\n") != std::string_view::npos) {
        malformed("character data outside <text>");
      }
      i = next == std::string_view::npos ? s.size() : next;
      continue;
    }
    if (s.substr(i, 4) == "<!--") {
      const auto end = s.find("-->", i);
      if (end == std::string_view::npos) malformed("unterminated comment");
      i = end + 3;
      continue;
    }
    if (s.substr(i, 2) == "<?") {
      const auto end = s.find("?>", i);
      if (end == std::string_view::npos) malformed("unterminated declaration");
      i = end + 2;
      continue;
    }
    if (s.substr(i, 2) == "</") {
      const auto end = s.find('>', i);
      if (end == std::string_view::npos) malformed("unterminated closing tag");
      std::string name(s.substr(i + 2, end - i - 2));
      while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
      if (open.empty() || open.back() != name) malformed("mismatched closing tag </" + name + ">");
      open.pop_back();
      i = end + 1;
      continue;
    }
    ++i;
    Element el;
    while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == ':' || s[i] == '-' || s[i] == '_')) {
      el.name += s[i++];
    }
    if (el.name.empty()) malformed("empty tag name");
    bool self_closing = false;
    for (;;) {
      skip_ws();
      if (i >= s.size()) malformed("unterminated tag <" + el.name + ">");
      if (s[i] == '/') {
        if (i + 1 >= s.size() || s[i + 1] != '>') malformed("stray '/' in tag");
        self_closing = true;
        i += 2;
        break;
      }
      if (s[i] == '>') {
        ++i;
        break;
      }
      std::string key;
      while (i < s.size() && s[i] != '=' && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '>') key += s[i++];
      skip_ws();
      if (i >= s.size() || s[i] != '=') malformed("attribute without value: " + key);
      ++i;
      skip_ws();
      if (i >= s.size() || (s[i] != '"' && s[i] != '\'')) malformed("unquoted attribute: " + key);
      const char quote = s[i++];
      const auto end = s.find(quote, i);
      if (end == std::string_view::npos) malformed("unterminated attribute: " + key);
      el.attrs[key] = decode_entities(s.substr(i, end - i));
      i = end + 1;
    }
    out.push_back(std::move(el));
    if (!self_closing) open.push_back(out.back().name);
  }
  if (!open.empty()) malformed("unclosed element <" + open.back() + ">");
  return out;
}

double number_attr(const Element& el, const std::string& key, double fallback) {
  const auto it = el.attrs.find(key);
  if (it == el.attrs.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || !std::isfinite(v)) malformed("bad number in " + key + "=\"" + it->second + "\"");
  return v;
}

std::optional<std::array<std::uint8_t, 3>> parse_color(const std::string& text) {
  if (text == "none") return std::nullopt;
  if (text == "white") return std::array<std::uint8_t, 3>{255, 255, 255};
  if (text == "black") return std::array<std::uint8_t, 3>{0, 0, 0};
  if (text.size() == 7 && text[0] == '#') {
    std::array<std::uint8_t, 3> c{};
    for (int k = 0; k < 3; ++k) {
      const std::string hex = text.substr(1 + 2 * k, 2);
      if (!std::isxdigit(static_cast<unsigned char>(hex[0])) || !std::isxdigit(static_cast<unsigned char>(hex[1]))) {
        malformed("bad color " + text);
      }
      c[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(std::stoi(hex, nullptr, 16));
    }
    return c;
  }
  throw DepictError(DepictError::Kind::UnsupportedSvgFeature, "unsupported color " + text);
}

class Canvas {
 public:
  Canvas(int w, int h, double sx, double sy) : img_(w, h), sx_(sx), sy_(sy) {}

  void fill_rect(double x, double y, double w, double h, std::array<std::uint8_t, 3> c) {
    const int x0 = std::max(0, static_cast<int>(std::floor(x * sx_)));
    const int y0 = std::max(0, static_cast<int>(std::floor(y * sy_)));
    const int x1 = std::min(img_.width, static_cast<int>(std::ceil((x + w) * sx_)));
    const int y1 = std::min(img_.height, static_cast<int>(std::ceil((y + h) * sy_)));
    for (int py = y0; py < y1; ++py)
      for (int px = x0; px < x1; ++px) put(px, py, c);
  }

  void line(double ax, double ay, double bx, double by, double width, std::array<std::uint8_t, 3> c) {
    ax *= sx_;
    bx *= sx_;
    ay *= sy_;
    by *= sy_;
    const double half = std::max(0.5, 0.5 * width * std::min(sx_, sy_));
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half)));
    const int x1 = std::min(img_.width - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half)));
    const int y1 = std::min(img_.height - 1, static_cast<int>(std::ceil(std::max(ay, by) + half)));
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const double cx = px + 0.5, cy = py + 0.5;
        double t = len2 > 0 ? ((cx - ax) * dx + (cy - ay) * dy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double ex = cx - (ax + t * dx), ey = cy - (ay + t * dy);
        if (ex * ex + ey * ey <= half * half) put(px, py, c);
      }
    }
  }

  // Glyph cells are 6x8 font units scaled to font_size/8; `anchor` is
  // "start", "middle" or "end". Text is vertically centred on y.
  void text(double x, double y, double font_size, const std::string& anchor, const std::string& s,
            std::array<std::uint8_t, 3> c) {
    const double fs = font_size * std::min(sx_, sy_);
    const int scale = std::max(1, static_cast<int>(std::lround(fs / 8.0)));
    const int advance = 6 * scale;
    const int total_w = static_cast<int>(s.size()) * advance - scale;
    // Start-anchored text is laid out on a 0.75 font_size pitch; centre the glyph in each cell.
    const double cell = 0.75 * fs;
    int left = static_cast<int>(std::lround(x * sx_ + (cell - 5 * scale) / 2.0));
    if (anchor == "middle") left = static_cast<int>(std::lround(x * sx_)) - total_w / 2;
    if (anchor == "end") left = static_cast<int>(std::lround(x * sx_)) - total_w;
    const int top = static_cast<int>(std::lround(y * sy_)) - (7 * scale) / 2;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const unsigned char ch = static_cast<unsigned char>(s[k]);
      const auto& glyph = kFont[(ch >= 32 && ch <= 126) ? ch - 32 : '?' - 32];
      for (int col = 0; col < 5; ++col) {
        for (int row = 0; row < 7; ++row) {
          if (!((glyph[static_cast<std::size_t>(col)] >> row) & 1)) continue;
          for (int dy = 0; dy < scale; ++dy)
            for (int dx = 0; dx < scale; ++dx)
              put(left + static_cast<int>(k) * advance + col * scale + dx, top + row * scale + dy, c);
        }
      }
    }
  }

  RasterImage take() { return std::move(img_); }

 private:
  void put(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    std::uint8_t* p = img_.at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  RasterImage img_;
  double sx_;
  double sy_;
};

}  // namespace

std::size_t RasterImage::ink_pixels() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 2 < pixels.size(); i += 3) {
    if (pixels[i] != 255 || pixels[i + 1] != 255 || pixels[i + 2] != 255) ++n;
  }
  return n;
}

RasterImage rasterize(std::string_view svg, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("rasterize: non-positive size");
  const auto elements = parse_elements(svg);
  if (elements.empty() || elements.front().name != "svg") malformed("document root is not <svg>");
  const auto& root = elements.front();
  double vw = number_attr(root, "width", width), vh = number_attr(root, "height", height);
  if (const auto it = root.attrs.find("viewBox"); it != root.attrs.end()) {
    double x = 0, y = 0;
    if (std::sscanf(it->second.c_str(), "%lf %lf %lf %lf", &x, &y, &vw, &vh) != 4 || x != 0 || y != 0) {
      throw DepictError(DepictError::Kind::UnsupportedSvgFeature, "viewBox must be \"0 0 w h\"");
    }
  }
  if (vw <= 0 || vh <= 0) malformed("non-positive svg size");
  Canvas canvas(width, height, width / vw, height / vh);

  auto color_of = [](const Element& el, const std::string& key, const std::string& fallback) {
    const auto it = el.attrs.find(key);
    return parse_color(it == el.attrs.end() ? fallback : it->second);
  };

  for (std::size_t k = 1; k < elements.size(); ++k) {
    const auto& el = elements[k];
    if (el.name == "rect") {
      if (auto c = color_of(el, "fill", "black")) {
        canvas.fill_rect(number_attr(el, "x", 0), number_attr(el, "y", 0), number_attr(el, "width", 0),
                         number_attr(el, "height", 0), *c);
      }
    } else if (el.name == "line") {
      if (auto c = color_of(el, "stroke", "none")) {
        canvas.line(number_attr(el, "x1", 0), number_attr(el, "y1", 0), number_attr(el, "x2", 0),
                    number_attr(el, "y2", 0), number_attr(el, "stroke-width", 1), *c);
      }
    } else if (el.name == "polyline") {
      const auto c = color_of(el, "stroke", "none");
      const auto it = el.attrs.find("points");
      if (!c || it == el.attrs.end()) continue;
      std::string pts = it->second;
      std::replace(pts.begin(), pts.end(), ',', ' ');
      std::vector<double> v;
      const char* p = pts.c_str();
      char* end = nullptr;
      for (double d = std::strtod(p, &end); end != p; d = std::strtod(p, &end)) {
        v.push_back(d);
        p = end;
      }
      if (v.size() % 2 != 0) malformed("odd coordinate count in polyline");
      const double w = number_attr(el, "stroke-width", 1);
      for (std::size_t i = 2; i + 1 < v.size(); i += 2) canvas.line(v[i - 2], v[i - 1], v[i], v[i + 1], w, *c);
    } else if (el.name == "text") {
      if (auto c = color_of(el, "fill", "black")) {
        const auto anchor = el.attrs.count("text-anchor") ? el.attrs.at("text-anchor") : std::string("start");
        if (anchor != "start" && anchor != "middle" && anchor != "end") {
          throw DepictError(DepictError::Kind::UnsupportedSvgFeature, "text-anchor " + anchor);
        }
        canvas.text(number_attr(el, "x", 0), number_attr(el, "y", 0), number_attr(el, "font-size", 16), anchor, el.text,
                    *c);
      }
    } else {
      throw DepictError(DepictError::Kind::UnsupportedSvgFeature, "unsupported element <" + el.name + ">");
    }
  }
  return canvas.take();
}

RasterImage depict(const chem::MolecularGraph& graph, int width, int height) {
  SvgStyle style;
  style.width = width;
  style.height = height;
  return rasterize(render_svg(graph, layout_2d(graph), style), width, height);
}

}  // namespace molbench::depict
