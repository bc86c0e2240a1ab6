#include "molbench/chem/selfies.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "molbench/chem/smiles.hpp"

namespace molbench::chem {

extern const char* const kBundledSelfiesTable;

namespace {

constexpr auto kNone = static_cast<std::size_t>(-1);

int parse_int(std::string_view s, std::size_t line_no) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::runtime_error("selfies table line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

bool organic_subset(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 9: case 15: case 16: case 17: case 35: case 53: return true;
    default: return false;
  }
}

// ---------------------------------------------------------------- tokens

enum class TokenKind { Atom, Branch, Ring, Dot, Nop, Epsilon };

struct Token {
  TokenKind kind = TokenKind::Atom;
  int bond = 1;  // requested order for atom/branch/ring
  int digits = 1;  // index symbols for branch/ring
  int atomic_number = 0;
  int charge = 0;
  std::optional<int> hydrogens;
  std::optional<int> isotope;
  bool plain = false;
};

int prefix_order(std::string_view prefix) {
  if (prefix.find('#') != std::string_view::npos) return 3;
  if (prefix.find('=') != std::string_view::npos) return 2;
  return 1;
}

std::optional<Token> classify(std::string_view tok) {
  Token t;
  if (tok == ".") {
    t.kind = TokenKind::Dot;
    return t;
  }
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return std::nullopt;
  std::string_view body = tok.substr(1, tok.size() - 2);
  if (body == "nop") {
    t.kind = TokenKind::Nop;
    return t;
  }
  if (body == "epsilon") {
    t.kind = TokenKind::Epsilon;
    return t;
  }
  std::size_t p = 0;
  while (p < body.size() && (body[p] == '=' || body[p] == '#' || body[p] == '-' || body[p] == '/' || body[p] == '\\')) ++p;
  const std::string_view prefix = body.substr(0, p);
  std::string_view rest = body.substr(p);
  t.bond = prefix_order(prefix);

  for (auto [word, kind] : {std::pair{std::string_view("Branch"), TokenKind::Branch},
                            std::pair{std::string_view("Ring"), TokenKind::Ring}}) {
    if (rest.size() == word.size() + 1 && rest.substr(0, word.size()) == word) {
      const char d = rest.back();
      if (d < '1' || d > '3') return std::nullopt;
      t.kind = kind;
      t.digits = d - '0';
      return t;
    }
  }
  // Atom: [bond][isotope]Symbol[@..][Hn][+n|-n]
  if (prefix.find('-') != std::string_view::npos && prefix.size() == 1) return std::nullopt;
  std::size_t q = 0;
  while (q < rest.size() && rest[q] >= '0' && rest[q] <= '9') ++q;
  if (q > 0) t.isotope = std::atoi(std::string(rest.substr(0, q)).c_str());
  if (q >= rest.size() || rest[q] < 'A' || rest[q] > 'Z') return std::nullopt;
  std::size_t sym_len = 1;
  if (q + 1 < rest.size() && rest[q + 1] >= 'a' && rest[q + 1] <= 'z') sym_len = 2;
  t.atomic_number = atomic_number(rest.substr(q, sym_len));
  if (t.atomic_number == 0 && sym_len == 2) {
    sym_len = 1;
    t.atomic_number = atomic_number(rest.substr(q, 1));
  }
  if (t.atomic_number == 0) return std::nullopt;
  q += sym_len;
  while (q < rest.size() && rest[q] == '@') ++q;
  if (q < rest.size() && rest[q] == 'H') {
    ++q;
    std::size_t s = q;
    while (q < rest.size() && rest[q] >= '0' && rest[q] <= '9') ++q;
    t.hydrogens = (q == s) ? 1 : std::atoi(std::string(rest.substr(s, q - s)).c_str());
  }
  if (q < rest.size() && (rest[q] == '+' || rest[q] == '-')) {
    const int sign = rest[q] == '+' ? 1 : -1;
    ++q;
    std::size_t s = q;
    while (q < rest.size() && rest[q] >= '0' && rest[q] <= '9') ++q;
    const int mag = (q == s) ? 1 : std::atoi(std::string(rest.substr(s, q - s)).c_str());
    t.charge = sign * mag;
  }
  if (q != rest.size()) return std::nullopt;
  t.plain = !t.hydrogens && t.charge == 0 && !t.isotope && organic_subset(t.atomic_number);
  if (t.bond == 1 && !prefix.empty() && prefix != "/" && prefix != "\\") return std::nullopt;
  return t;
}

// ---------------------------------------------------------------- decoding

struct DecodeAtom {
  Atom atom;
  int capacity = 0;  // bond units available (H already removed for bracket atoms)
};

struct RingRequest {
  std::size_t left;
  std::size_t right;
  int order;
};

class Decoder {
 public:
  Decoder(const SelfiesAlphabet& alpha, std::vector<Token> tokens, const std::vector<std::string>& raws)
      : alpha_(alpha), tokens_(std::move(tokens)), raws_(raws) {}

  MolecularGraph run() {
    while (next_ < tokens_.size()) {
      // A fragment runs until the next '.' token.
      std::size_t end = next_;
      while (end < tokens_.size() && tokens_[end].kind != TokenKind::Dot) ++end;
      limit_ = end;
      derive(kNone, std::nullopt, kNone);
      next_ = end + 1;
    }
    close_rings();
    std::vector<Atom> atoms;
    atoms.reserve(atoms_.size());
    for (auto& a : atoms_) atoms.push_back(a.atom);
    std::vector<Bond> bonds;
    bonds.reserve(bonds_.size());
    for (const auto& b : bonds_) bonds.push_back({b.left, b.right, static_cast<BondOrder>(b.order), 0});
    return MolecularGraph::build(std::move(atoms), std::move(bonds));
  }

 private:
  bool exhausted() const { return next_ >= limit_; }

  // Reads up to n index digits; missing digits count as zero.
  std::size_t read_index(int n, std::size_t& derived) {
    std::size_t q = 0;
    for (int i = 0; i < n; ++i) {
      q *= 16;
      if (exhausted()) continue;
      const int d = alpha_.index_of(raws_[next_]);
      ++next_;
      ++derived;
      q += static_cast<std::size_t>(std::max(d, 0));
    }
    return q;
  }

  int free_capacity(std::size_t i) const { return atoms_[i].capacity - used_[i]; }

  void add_bond(std::size_t a, std::size_t b, int order) {
    bonds_.push_back({a, b, order});
    used_[a] += order;
    used_[b] += order;
  }

  std::size_t derive(std::size_t max_derive, std::optional<int> init_state, std::size_t root) {
    std::size_t derived = 0;
    std::optional<int> state = init_state;
    std::size_t prev = root;
    while ((!state || *state > 0) && derived < max_derive && !exhausted()) {
      const Token& t = tokens_[next_];
      ++next_;
      ++derived;
      std::optional<int> next_state = state;
      switch (t.kind) {
        case TokenKind::Branch: {
          if (state && *state > 1) {
            const std::size_t q = read_index(t.digits, derived);
            const int binit = std::min(*state - 1, t.bond);
            derived += derive(q + 1, binit, prev);
            next_state = *state - binit;
          }
          break;
        }
        case TokenKind::Ring: {
          if (state) {
            const std::size_t q = read_index(t.digits, derived);
            const std::size_t left = prev >= q + 1 ? prev - (q + 1) : 0;
            const int order = std::min(*state, t.bond);
            rings_.push_back({left, prev, order});
            next_state = *state - order;
          }
          break;
        }
        case TokenKind::Epsilon:
          next_state = state ? *state : 0;
          break;
        case TokenKind::Nop:
        case TokenKind::Dot:
          break;
        case TokenKind::Atom: {
          DecodeAtom da;
          da.atom.atomic_number = t.atomic_number;
          da.atom.formal_charge = t.charge;
          da.atom.isotope = t.isotope;
          const int cap = alpha_.capacity(t.atomic_number, t.charge);
          if (!t.plain) da.atom.explicit_h = t.hydrogens.value_or(0);
          da.capacity = cap - (t.plain ? 0 : *da.atom.explicit_h);
          const int bond = state ? std::min({t.bond, *state, da.capacity}) : 0;
          atoms_.push_back(da);
          used_.push_back(0);
          const std::size_t idx = atoms_.size() - 1;
          if (bond > 0) add_bond(prev, idx, bond);
          prev = idx;
          next_state = da.capacity - bond;
          break;
        }
      }
      state = next_state;
    }
    // The remainder of a branch is consumed without effect.
    while (derived < max_derive && !exhausted()) {
      ++next_;
      ++derived;
    }
    return derived;
  }

  void close_rings() {
    for (const auto& r : rings_) {
      if (r.left == r.right || r.right == kNone) continue;
      int add = std::min({r.order, free_capacity(r.left), free_capacity(r.right)});
      auto it = std::find_if(bonds_.begin(), bonds_.end(), [&](const RingRequest& b) {
        return (b.left == r.left && b.right == r.right) || (b.left == r.right && b.right == r.left);
      });
      if (it != bonds_.end()) {
        add = std::min(add, 3 - it->order);
        if (add <= 0) continue;
        it->order += add;
        used_[r.left] += add;
        used_[r.right] += add;
      } else if (add > 0) {
        add_bond(r.left, r.right, add);
      }
    }
  }

  const SelfiesAlphabet& alpha_;
  std::vector<Token> tokens_;
  const std::vector<std::string>& raws_;
  std::size_t next_ = 0;
  std::size_t limit_ = 0;
  std::vector<DecodeAtom> atoms_;
  std::vector<int> used_;
  std::vector<RingRequest> bonds_;
  std::vector<RingRequest> rings_;
};

// ---------------------------------------------------------------- kekulization

std::vector<int> allowed_valences(int z, int charge) {
  std::vector<int> base;
  const auto model = ValenceModel::standard().allowed(z);
  if (!model.empty()) {
    base.assign(model.begin(), model.end());
  } else if (z == 33) {
    base = {3, 5};
  } else if (z == 34 || z == 52) {
    base = {2, 4, 6};
  } else {
    return {};
  }
  if (charge == 0) return base;
  std::vector<int> out;
  for (int v : base) {
    int s = 0;
    if (z == 5) {
      s = v - charge;
    } else if (z == 6 || z == 1) {
      s = v - std::abs(charge);
    } else if (z == 7 || z == 8 || z == 15 || z == 16 || z == 33 || z == 34 || z == 52) {
      s = v + charge;
    } else {
      s = v - std::abs(charge);
    }
    if (s >= 0) out.push_back(s);
  }
  return out;
}

class Matcher {
 public:
  explicit Matcher(std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj) : adj_(std::move(adj)) {
    mate_.assign(adj_.size(), kNone);
    active_.assign(adj_.size(), false);
  }

  void activate(std::size_t v) { active_[v] = true; }

  bool solve() { return search(); }
  std::size_t mate_bond(std::size_t v) const { return mate_bond_.count(v) ? mate_bond_.at(v) : kNone; }

 private:
  std::size_t options(std::size_t v) const {
    std::size_t n = 0;
    for (auto [u, b] : adj_[v]) {
      if (active_[u] && mate_[u] == kNone) ++n;
    }
    return n;
  }

  bool search() {
    if (++steps_ > 500000) return false;
    std::size_t best = kNone;
    std::size_t best_opts = kNone;
    for (std::size_t v = 0; v < adj_.size(); ++v) {
      if (!active_[v] || mate_[v] != kNone) continue;
      const std::size_t o = options(v);
      if (o < best_opts) {
        best = v;
        best_opts = o;
        if (o == 0) break;
      }
    }
    if (best == kNone) return true;
    if (best_opts == 0) return false;
    for (auto [u, b] : adj_[best]) {
      if (!active_[u] || mate_[u] != kNone) continue;
      mate_[best] = u;
      mate_[u] = best;
      mate_bond_[best] = b;
      mate_bond_[u] = b;
      if (search()) return true;
      mate_[best] = kNone;
      mate_[u] = kNone;
      mate_bond_.erase(best);
      mate_bond_.erase(u);
    }
    return false;
  }

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj_;
  std::vector<std::size_t> mate_;
  std::vector<bool> active_;
  std::map<std::size_t, std::size_t> mate_bond_;
  std::size_t steps_ = 0;
};

// ---------------------------------------------------------------- encoding

std::string index_digits(std::size_t q, const SelfiesAlphabet& alpha, std::vector<std::string>& out) {
  std::vector<std::size_t> digits;
  do {
    digits.push_back(q % 16);
    q /= 16;
  } while (q > 0);
  if (digits.size() > 3) return {};
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) out.push_back(alpha.index_tokens()[*it]);
  return std::to_string(digits.size());
}

std::string_view bond_prefix(int order) {
  switch (order) {
    case 2: return "=";
    case 3: return "#";
    default: return "";
  }
}

class Encoder {
 public:
  Encoder(const MolecularGraph& g, const SelfiesAlphabet& alpha) : g_(g), alpha_(alpha) {}

  std::string run() {
    const std::size_t n = g_.atom_count();
    check_capacities();
    order_ = canonical_order(g_);
    visited_.assign(n, false);
    pos_.assign(n, 0);
    children_.assign(n, {});
    rings_.assign(n, {});
    ring_bond_.assign(g_.bond_count(), false);
    std::vector<std::size_t> by_order(n);
    for (std::size_t i = 0; i < n; ++i) by_order[order_[i]] = i;

    std::string out;
    bool first = true;
    for (std::size_t start : by_order) {
      if (visited_[start]) continue;
      discover(start, kNone);
      std::vector<std::string> toks;
      generate(start, 0, toks);
      if (!first) out += '.';
      first = false;
      for (const auto& t : toks) out += t;
    }
    return out;
  }

 private:
  void check_capacities() const {
    for (std::size_t i = 0; i < g_.atom_count(); ++i) {
      const Atom& a = g_.atom(i);
      const int cap = alpha_.capacity(a.atomic_number, a.formal_charge);
      if (g_.bond_valence_sum(i) + a.hydrogen_count() > cap) {
        throw SelfiesError(SelfiesError::Kind::UnsupportedFeature, i,
                           "atom " + std::to_string(i) + " (" + std::string(a.symbol()) +
                               ") exceeds its SELFIES bonding capacity");
      }
    }
  }

  std::vector<NeighborRef> sorted_neighbors(std::size_t u) const {
    std::vector<NeighborRef> nbs(g_.neighbors(u).begin(), g_.neighbors(u).end());
    std::sort(nbs.begin(), nbs.end(), [&](const NeighborRef& a, const NeighborRef& b) { return order_[a.atom] < order_[b.atom]; });
    return nbs;
  }

  void discover(std::size_t u, std::size_t parent_bond) {
    visited_[u] = true;
    pos_[u] = counter_++;
    for (const auto& nb : sorted_neighbors(u)) {
      if (nb.bond == parent_bond || ring_bond_[nb.bond]) continue;
      if (visited_[nb.atom]) {
        ring_bond_[nb.bond] = true;
        rings_[u].push_back(nb);
      } else {
        children_[u].push_back(nb);
        discover(nb.atom, nb.bond);
      }
    }
  }

  std::string atom_token(std::size_t i, int in_order) const {
    const Atom& a = g_.atom(i);
    std::string tok = "[";
    tok += bond_prefix(in_order);
    const bool plain_ok = organic_subset(a.atomic_number) && a.formal_charge == 0 && !a.isotope;
    if (plain_ok) {
      const auto implied = ValenceModel::standard().implicit_hydrogens(a.atomic_number, false, g_.bond_valence_sum(i));
      if (implied && *implied == a.hydrogen_count()) return tok + std::string(a.symbol()) + "]";
    }
    if (a.isotope) tok += std::to_string(*a.isotope);
    tok += a.symbol();
    const int h = a.hydrogen_count();
    if (h > 0) tok += "H" + std::to_string(h);
    if (a.formal_charge != 0) {
      tok += a.formal_charge > 0 ? '+' : '-';
      tok += std::to_string(std::abs(a.formal_charge));
    }
    return tok + "]";
  }

  void generate(std::size_t u, int in_order, std::vector<std::string>& out) {
    out.push_back(atom_token(u, in_order));
    for (const auto& r : rings_[u]) {
      const std::size_t q = pos_[u] - pos_[r.atom] - 1;
      std::vector<std::string> idx;
      const std::string n = index_digits(q, alpha_, idx);
      if (n.empty()) throw SelfiesError(SelfiesError::Kind::UnsupportedFeature, u, "ring span too long");
      out.push_back("[" + std::string(bond_prefix(bond_valence(g_.bond(r.bond).order))) + "Ring" + n + "]");
      out.insert(out.end(), idx.begin(), idx.end());
    }
    const auto& kids = children_[u];
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const int order = bond_valence(g_.bond(kids[k].bond).order);
      if (k + 1 == kids.size()) {
        generate(kids[k].atom, order, out);
        break;
      }
      std::vector<std::string> body;
      generate(kids[k].atom, order, body);
      std::vector<std::string> idx;
      const std::string n = index_digits(body.size() - 1, alpha_, idx);
      if (n.empty()) throw SelfiesError(SelfiesError::Kind::UnsupportedFeature, u, "branch too long");
      out.push_back("[" + std::string(bond_prefix(order)) + "Branch" + n + "]");
      out.insert(out.end(), idx.begin(), idx.end());
      out.insert(out.end(), body.begin(), body.end());
    }
  }

  const MolecularGraph& g_;
  const SelfiesAlphabet& alpha_;
  std::vector<std::size_t> order_;
  std::vector<bool> visited_;
  std::vector<std::size_t> pos_;
  std::size_t counter_ = 0;
  std::vector<std::vector<NeighborRef>> children_;
  std::vector<std::vector<NeighborRef>> rings_;
  std::vector<bool> ring_bond_;
};

}  // namespace

// ---------------------------------------------------------------- SelfiesAlphabet

SelfiesAlphabet SelfiesAlphabet::parse(std::string_view text) {
  SelfiesAlphabet a;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "version") {
      std::string v;
      ls >> v;
      a.version_ = parse_int(v, line_no);
    } else if (key == "index") {
      std::string tok;
      while (ls >> tok) a.index_.push_back(tok);
    } else if (key == "capacity") {
      std::string el, cap;
      ls >> el >> cap;
      std::size_t s = 0;
      while (s < el.size() && el[s] != '+' && el[s] != '-') ++s;
      const int z = atomic_number(el.substr(0, s));
      if (z == 0) throw std::runtime_error("selfies table line " + std::to_string(line_no) + ": unknown element");
      const int charge = s < el.size() ? parse_int(el.substr(s + (el[s] == '+' ? 1 : 0)), line_no) : 0;
      a.capacity_[{z, charge}] = parse_int(cap, line_no);
    } else if (key == "default") {
      std::string v;
      ls >> v;
      a.default_capacity_ = parse_int(v, line_no);
    } else {
      throw std::runtime_error("selfies table line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (a.index_.size() != 16) throw std::runtime_error("selfies table: index alphabet must have 16 tokens");
  return a;
}

const SelfiesAlphabet& SelfiesAlphabet::bundled() {
  static const SelfiesAlphabet table = parse(kBundledSelfiesTable);
  return table;
}

int SelfiesAlphabet::index_of(std::string_view token) const {
  for (std::size_t i = 0; i < index_.size(); ++i) {
    if (index_[i] == token) return static_cast<int>(i);
  }
  return -1;
}

int SelfiesAlphabet::capacity(int z, int charge) const {
  if (auto it = capacity_.find({z, charge}); it != capacity_.end()) return it->second;
  if (ValenceModel::standard().allowed(z).empty()) return default_capacity_;
  return ValenceModel::standard().max_valence(z, charge);
}

// ---------------------------------------------------------------- public API

std::vector<std::string> tokenize_selfies(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '.') {
      out.emplace_back(".");
      ++i;
    } else if (text[i] == '[') {
      const auto close = text.find(']', i);
      if (close == std::string_view::npos) {
        throw SelfiesError(SelfiesError::Kind::UnknownToken, out.size(), "unterminated token at byte " + std::to_string(i));
      }
      out.emplace_back(text.substr(i, close - i + 1));
      i = close + 1;
    } else {
      throw SelfiesError(SelfiesError::Kind::UnknownToken, out.size(), "text outside brackets at byte " + std::to_string(i));
    }
  }
  return out;
}

MolecularGraph decode_selfies(std::string_view text) {
  if (text.empty()) throw SelfiesError(SelfiesError::Kind::Empty, 0, "empty SELFIES string");
  const auto raws = tokenize_selfies(text);
  const auto& alpha = SelfiesAlphabet::bundled();
  std::vector<Token> tokens;
  tokens.reserve(raws.size());
  for (std::size_t i = 0; i < raws.size(); ++i) {
    auto t = classify(raws[i]);
    if (t && t->kind == TokenKind::Atom && !t->plain && t->hydrogens.value_or(0) > alpha.capacity(t->atomic_number, t->charge)) {
      t.reset();
    }
    if (!t) throw SelfiesError(SelfiesError::Kind::UnknownToken, i, "unknown SELFIES token " + raws[i]);
    tokens.push_back(*t);
  }
  return Decoder(alpha, std::move(tokens), raws).run();
}

MolecularGraph kekulize(const MolecularGraph& g) {
  const std::size_t n = g.atom_count();
  bool any = false;
  for (const auto& b : g.bonds()) any = any || b.order == BondOrder::Aromatic;
  for (const auto& a : g.atoms()) any = any || a.aromatic;
  if (!any) return g;

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t b = 0; b < g.bond_count(); ++b) {
    const auto& bond = g.bond(b);
    if (bond.order != BondOrder::Aromatic) continue;
    adj[bond.begin].emplace_back(bond.end, b);
    adj[bond.end].emplace_back(bond.begin, b);
  }
  Matcher m(adj);
  for (std::size_t i = 0; i < n; ++i) {
    const Atom& a = g.atom(i);
    if (!a.aromatic || adj[i].empty()) continue;
    const int v = g.bond_valence_sum(i) + a.hydrogen_count();
    const auto allowed = allowed_valences(a.atomic_number, a.formal_charge);
    const bool fits = std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    const bool wants = std::find(allowed.begin(), allowed.end(), v + 1) != allowed.end();
    if (!fits && wants) m.activate(i);
  }
  if (!m.solve()) {
    throw SelfiesError(SelfiesError::Kind::UnsupportedFeature, 0, "aromatic system has no Kekule structure");
  }

  std::vector<Bond> bonds(g.bonds().begin(), g.bonds().end());
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (bonds[b].order == BondOrder::Aromatic) bonds[b].order = BondOrder::Single;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = m.mate_bond(i);
    if (b != kNone) bonds[b].order = BondOrder::Double;
  }
  std::vector<Atom> atoms(g.atoms().begin(), g.atoms().end());
  std::vector<int> sums(n, 0);
  for (const auto& b : bonds) {
    sums[b.begin] += bond_valence(b.order);
    sums[b.end] += bond_valence(b.order);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Atom& a = atoms[i];
    const int h = a.hydrogen_count();
    const bool was_aromatic = a.aromatic;
    a.aromatic = false;
    a.ring_member = false;
    if (!a.bracket() && was_aromatic) {
      const auto implied = ValenceModel::standard().implicit_hydrogens(a.atomic_number, false, sums[i]);
      if (!implied || *implied != h) a.explicit_h = h;
    }
    a.implicit_h = 0;
  }
  return MolecularGraph::build(std::move(atoms), std::move(bonds), g.source_text());
}

std::string encode_selfies(const MolecularGraph& graph) {
  if (graph.empty()) return {};
  const MolecularGraph k = kekulize(graph);
  for (std::size_t i = 0; i < k.atom_count(); ++i) {
    if (k.atom(i).aromatic) {
      throw SelfiesError(SelfiesError::Kind::UnsupportedFeature, i, "aromatic atom outside a kekulizable bond system");
    }
  }
  return Encoder(k, SelfiesAlphabet::bundled()).run();
}

}  // namespace molbench::chem
