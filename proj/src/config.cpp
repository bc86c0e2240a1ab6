#include "molbench/config.hpp"

#include <algorithm>
#include <cctype>

#include "molbench/util/io.hpp"

namespace molbench {

namespace {

class TomlReader {
 public:
  TomlReader(std::string_view text, std::string origin) : text_(text), origin_(std::move(origin)) {}

  nlohmann::json run() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (pos_ < text_.size()) {
      skip_space_and_comments(true);
      if (pos_ >= text_.size()) break;
      if (text_[pos_] == '[') {
        ++pos_;
        skip_space();
        const auto path = read_key_path();
        skip_space();
        expect(']');
        table = &root;
        for (const auto& part : path) {
          auto& next = (*table)[part];
          if (next.is_null()) next = nlohmann::json::object();
          if (!next.is_object()) fail("'" + part + "' is not a table");
          table = &next;
        }
      } else {
        const auto path = read_key_path();
        skip_space();
        expect('=');
        skip_space();
        nlohmann::json value = read_value();
        nlohmann::json* target = table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
          auto& next = (*target)[path[i]];
          if (next.is_null()) next = nlohmann::json::object();
          target = &next;
        }
        if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
        (*target)[path.back()] = std::move(value);
      }
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '#') skip_comment();
      if (pos_ < text_.size() && text_[pos_] != '\n' && text_[pos_] != '\r') fail("unexpected trailing text");
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + msg);
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  void skip_comment() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }
  void skip_space_and_comments(bool newlines) {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || (newlines && (c == '\n' || c == '\r'))) {
        ++pos_;
      } else if (c == '#') {
        skip_comment();
      } else {
        break;
      }
    }
  }

  std::vector<std::string> read_key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_space();
      std::string part;
      if (pos_ < text_.size() && text_[pos_] == '"') {
        part = read_basic_string();
      } else {
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '-')) {
          part += text_[pos_++];
        }
      }
      if (part.empty()) fail("expected a key");
      parts.push_back(part);
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        continue;
      }
      return parts;
    }
  }

  std::string read_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (pos_ >= text_.size() || text_[pos_] == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= text_.size()) fail("bad escape");
      const char e = text_[pos_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  std::string read_literal_string() {
    expect('\'');
    const auto end = text_.find('\'', pos_);
    if (end == std::string_view::npos || text_.substr(pos_, end - pos_).find('\n') != std::string_view::npos) {
      fail("unterminated literal string");
    }
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  nlohmann::json read_value() {
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return read_basic_string();
    if (c == '\'') return read_literal_string();
    if (c == '[') {
      ++pos_;
      nlohmann::json arr = nlohmann::json::array();
      while (true) {
        skip_space_and_comments(true);
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(read_value());
        skip_space_and_comments(true);
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
        } else if (pos_ >= text_.size() || text_[pos_] != ']') {
          fail("expected ',' or ']' in array");
        }
      }
    }
    if (text_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    std::size_t end = pos_;
    while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '+' ||
                                  text_[end] == '-' || text_[end] == '.' || text_[end] == '_')) {
      ++end;
    }
    std::string token(text_.substr(pos_, end - pos_));
    token.erase(std::remove(token.begin(), token.end(), '_'), token.end());
    if (token.empty()) fail("invalid value");
    pos_ = end;
    try {
      std::size_t used = 0;
      if (token.find_first_of(".eE") == std::string::npos && token != "inf" && token != "nan") {
        const long long v = std::stoll(token, &used);
        if (used == token.size()) return v;
      } else {
        const double d = std::stod(token, &used);
        if (used == token.size()) return d;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + token + "'");
  }

  std::string_view text_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

Config Config::parse(std::string_view text, const std::string& origin) {
  Config c(TomlReader(text, origin).run());
  c.origin_ = origin;
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse(text, path.string());
}

const nlohmann::json* Config::find(std::string_view dotted_key) const {
  const nlohmann::json* node = &tree_;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part(dotted_key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
    if (dot == std::string_view::npos) return node;
    start = dot + 1;
  }
}

std::string Config::get_string(std::string_view key, const std::string& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(origin_ + ": '" + std::string(key) + "' must be a string");
  return v->get<std::string>();
}

std::string Config::require_string(std::string_view key) const {
  if (!find(key)) throw ConfigError(origin_ + ": missing required key '" + std::string(key) + "'");
  return get_string(key, {});
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigError(origin_ + ": '" + std::string(key) + "' must be an integer");
  return v->get<std::int64_t>();
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(origin_ + ": '" + std::string(key) + "' must be a number");
  return v->get<double>();
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(origin_ + ": '" + std::string(key) + "' must be true or false");
  return v->get<bool>();
}

std::vector<std::string> Config::get_strings(std::string_view key) const {
  const auto* v = find(key);
  if (!v) return {};
  if (v->is_string()) return {v->get<std::string>()};
  if (!v->is_array()) throw ConfigError(origin_ + ": '" + std::string(key) + "' must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : *v) {
    if (!e.is_string()) throw ConfigError(origin_ + ": '" + std::string(key) + "' must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace molbench
