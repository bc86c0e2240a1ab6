#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "molbench/chem/smiles.hpp"

namespace molbench::chem {

SmilesError::SmilesError(Kind kind, std::size_t offset, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " at offset " + std::to_string(offset) + ": " + message),
      kind_(kind),
      offset_(offset) {}

std::string_view to_string(SmilesError::Kind kind) {
  switch (kind) {
    case SmilesError::Kind::UnbalancedBranch: return "UnbalancedBranch";
    case SmilesError::Kind::UnclosedRing: return "UnclosedRing";
    case SmilesError::Kind::UnknownElement: return "UnknownElement";
    case SmilesError::Kind::ValenceViolation: return "ValenceViolation";
    case SmilesError::Kind::Syntax: return "Syntax";
  }
  return "Unknown";
}

namespace {

using Kind = SmilesError::Kind;

struct PendingBond {
  BondOrder order = BondOrder::Single;
  char stereo = 0;
  std::size_t offset = 0;
};

struct RingOpening {
  std::size_t atom;
  std::optional<PendingBond> bond;
  std::size_t offset;
};

struct RawBond {
  Bond bond;
  bool implicit_aromatic = false;
  std::size_t offset = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  MolecularGraph run() {
    if (text_.empty()) throw SmilesError(Kind::Syntax, 0, "empty SMILES");
    while (pos_ < text_.size()) step();
    if (!branches_.empty()) throw SmilesError(Kind::UnbalancedBranch, branches_.back().second, "unclosed branch");
    if (!rings_.empty()) {
      auto first = std::min_element(rings_.begin(), rings_.end(),
                                    [](const auto& a, const auto& b) { return a.second.offset < b.second.offset; });
      throw SmilesError(Kind::UnclosedRing, first->second.offset, "ring bond " + std::to_string(first->first) + " never closed");
    }
    if (pending_) throw SmilesError(Kind::Syntax, pending_->offset, "bond symbol without a following atom");
    if (atoms_.empty()) throw SmilesError(Kind::Syntax, 0, "no atoms");
    return finish();
  }

 private:
  void step() {
    const char c = text_[pos_];
    if (c == '[') {
      bracket_atom();
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '*') {
      organic_atom();
    } else if (c == '(') {
      if (!prev_ || pending_) throw SmilesError(Kind::Syntax, pos_, "branch must follow an atom");
      branches_.emplace_back(*prev_, pos_);
      ++pos_;
    } else if (c == ')') {
      if (branches_.empty()) throw SmilesError(Kind::UnbalancedBranch, pos_, "')' without matching '('");
      if (pending_) throw SmilesError(Kind::Syntax, pending_->offset, "bond symbol before ')'");
      if (last_was_open_) throw SmilesError(Kind::Syntax, pos_, "empty branch");
      prev_ = branches_.back().first;
      branches_.pop_back();
      ++pos_;
    } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\' || c == '$') {
      bond_symbol(c);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      ring_bond();
    } else if (c == '.') {
      if (pending_) throw SmilesError(Kind::Syntax, pos_, "bond symbol before '.'");
      if (!prev_) throw SmilesError(Kind::Syntax, pos_, "'.' must follow an atom");
      if (!branches_.empty()) throw SmilesError(Kind::Syntax, pos_, "'.' inside a branch");
      prev_.reset();
      ++pos_;
    } else {
      throw SmilesError(Kind::Syntax, pos_, std::string("unexpected character '") + c + "'");
    }
    last_was_open_ = (c == '(');
  }

  void bond_symbol(char c) {
    if (pending_) throw SmilesError(Kind::Syntax, pos_, "two consecutive bond symbols");
    if (!prev_) throw SmilesError(Kind::Syntax, pos_, "bond symbol must follow an atom");
    PendingBond b;
    b.offset = pos_;
    switch (c) {
      case '-': b.order = BondOrder::Single; break;
      case '=': b.order = BondOrder::Double; break;
      case '#': b.order = BondOrder::Triple; break;
      case ':': b.order = BondOrder::Aromatic; break;
      case '/':
      case '\\':
        b.order = BondOrder::Single;
        b.stereo = c;
        break;
      default: throw SmilesError(Kind::Syntax, pos_, "quadruple bonds are not supported");
    }
    pending_ = b;
    ++pos_;
  }

  void organic_atom() {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    Atom atom;
    auto next_is = [&](char n) { return pos_ + 1 < text_.size() && text_[pos_ + 1] == n; };
    switch (c) {
      case 'B':
        if (next_is('r')) { atom.atomic_number = 35; ++pos_; } else { atom.atomic_number = 5; }
        break;
      case 'C':
        if (next_is('l')) { atom.atomic_number = 17; ++pos_; } else { atom.atomic_number = 6; }
        break;
      case 'N': atom.atomic_number = 7; break;
      case 'O': atom.atomic_number = 8; break;
      case 'P': atom.atomic_number = 15; break;
      case 'S': atom.atomic_number = 16; break;
      case 'F': atom.atomic_number = 9; break;
      case 'I': atom.atomic_number = 53; break;
      case 'b': atom.atomic_number = 5; atom.aromatic = true; break;
      case 'c': atom.atomic_number = 6; atom.aromatic = true; break;
      case 'n': atom.atomic_number = 7; atom.aromatic = true; break;
      case 'o': atom.atomic_number = 8; atom.aromatic = true; break;
      case 'p': atom.atomic_number = 15; atom.aromatic = true; break;
      case 's': atom.atomic_number = 16; atom.aromatic = true; break;
      default: throw SmilesError(Kind::UnknownElement, start, std::string("unknown organic-subset atom '") + c + "'");
    }
    ++pos_;
    add_atom(std::move(atom), start);
  }

  void bracket_atom() {
    const std::size_t start = pos_;
    ++pos_;  // '['
    Atom atom;
    atom.explicit_h = 0;

    if (peek_digit()) atom.isotope = read_number();

    const std::size_t sym_at = pos_;
    if (pos_ >= text_.size()) throw SmilesError(Kind::Syntax, start, "unterminated bracket atom");
    const char c = text_[pos_];
    if (std::isupper(static_cast<unsigned char>(c))) {
      int z = 0;
      if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        z = atomic_number(text_.substr(pos_, 2));
        if (z) pos_ += 2;
      }
      if (!z) {
        z = atomic_number(text_.substr(pos_, 1));
        if (!z) throw SmilesError(Kind::UnknownElement, sym_at, "unknown element in bracket atom");
        pos_ += 1;
      }
      atom.atomic_number = z;
    } else if (std::islower(static_cast<unsigned char>(c))) {
      static const std::pair<std::string_view, int> kAromatic[] = {{"se", 34}, {"as", 33}, {"te", 52}, {"b", 5},
                                                                   {"c", 6},   {"n", 7},   {"o", 8},   {"p", 15},
                                                                   {"s", 16}};
      bool found = false;
      for (const auto& [sym, z] : kAromatic) {
        if (text_.substr(pos_, sym.size()) == sym) {
          atom.atomic_number = z;
          atom.aromatic = true;
          pos_ += sym.size();
          found = true;
          break;
        }
      }
      if (!found) throw SmilesError(Kind::UnknownElement, sym_at, "unknown aromatic element in bracket atom");
    } else {
      throw SmilesError(Kind::UnknownElement, sym_at, "expected element symbol");
    }

    if (pos_ < text_.size() && text_[pos_] == '@') {
      const std::size_t from = pos_;
      ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '@') {
        ++pos_;
      } else {
        while (pos_ < text_.size() && std::isupper(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != 'H') ++pos_;
        while (peek_digit()) ++pos_;
      }
      atom.chirality = std::string(text_.substr(from, pos_ - from));
    }

    if (pos_ < text_.size() && text_[pos_] == 'H') {
      ++pos_;
      atom.explicit_h = peek_digit() ? read_number() : 1;
    }

    if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
      const char sign = text_[pos_];
      ++pos_;
      int magnitude = 1;
      if (peek_digit()) {
        magnitude = read_number();
      } else {
        while (pos_ < text_.size() && text_[pos_] == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.formal_charge = sign == '+' ? magnitude : -magnitude;
    }

    if (pos_ < text_.size() && text_[pos_] == ':') {
      ++pos_;
      if (!peek_digit()) throw SmilesError(Kind::Syntax, pos_, "atom class requires digits");
      read_number();
    }

    if (pos_ >= text_.size() || text_[pos_] != ']') throw SmilesError(Kind::Syntax, pos_, "expected ']'");
    ++pos_;
    add_atom(std::move(atom), start);
  }

  void ring_bond() {
    const std::size_t start = pos_;
    if (!prev_) throw SmilesError(Kind::Syntax, pos_, "ring bond must follow an atom");
    int number = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        throw SmilesError(Kind::Syntax, pos_, "'%' must be followed by two digits");
      }
      number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
    }

    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_.emplace(number, RingOpening{*prev_, pending_, start});
      pending_.reset();
      return;
    }
    const RingOpening open = it->second;
    rings_.erase(it);
    if (open.atom == *prev_) throw SmilesError(Kind::Syntax, start, "ring bond closes on its own atom");
    std::optional<PendingBond> bond = pending_;
    pending_.reset();
    if (open.bond && bond && (open.bond->order != bond->order)) {
      throw SmilesError(Kind::Syntax, start, "conflicting ring-closure bond orders");
    }
    if (!bond) bond = open.bond;
    connect(open.atom, *prev_, bond, start);
  }

  void add_atom(Atom atom, std::size_t offset) {
    const std::size_t idx = atoms_.size();
    atoms_.push_back(std::move(atom));
    atom_offsets_.push_back(offset);
    if (prev_) connect(*prev_, idx, pending_, offset);
    pending_.reset();
    prev_ = idx;
  }

  void connect(std::size_t a, std::size_t b, const std::optional<PendingBond>& explicit_bond, std::size_t offset) {
    for (const auto& rb : bonds_) {
      if ((rb.bond.begin == a && rb.bond.end == b) || (rb.bond.begin == b && rb.bond.end == a)) {
        throw SmilesError(Kind::Syntax, offset, "duplicate bond between the same atoms");
      }
    }
    RawBond rb;
    rb.bond.begin = a;
    rb.bond.end = b;
    rb.offset = explicit_bond ? explicit_bond->offset : offset;
    if (explicit_bond) {
      rb.bond.order = explicit_bond->order;
      rb.bond.stereo = explicit_bond->stereo;
      if (rb.bond.order == BondOrder::Aromatic && !(atoms_[a].aromatic && atoms_[b].aromatic)) {
        throw SmilesError(Kind::Syntax, explicit_bond->offset, "aromatic bond between non-aromatic atoms");
      }
    } else if (atoms_[a].aromatic && atoms_[b].aromatic) {
      rb.bond.order = BondOrder::Aromatic;
      rb.implicit_aromatic = true;
    }
    bonds_.push_back(rb);
  }

  MolecularGraph finish() {
    std::vector<Bond> bonds;
    bonds.reserve(bonds_.size());
    for (const auto& rb : bonds_) bonds.push_back(rb.bond);
    // An implicit bond between two aromatic atoms that is not in a ring joins two
    // aromatic systems (biphenyl written without '-'); it is a single bond.
    const auto bridges = find_bridges(atoms_.size(), bonds);
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      if (bridges[i] && bonds_[i].implicit_aromatic) bonds[i].order = BondOrder::Single;
    }
    try {
      return MolecularGraph::build(std::move(atoms_), std::move(bonds), std::string(text_));
    } catch (const GraphError& e) {
      const std::size_t offset = e.atom() < atom_offsets_.size() ? atom_offsets_[e.atom()] : 0;
      if (e.kind() == GraphError::Kind::ValenceViolation) throw SmilesError(Kind::ValenceViolation, offset, e.what());
      throw SmilesError(Kind::Syntax, offset, e.what());
    }
  }

  bool peek_digit() const { return pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])); }

  int read_number() {
    int v = 0;
    while (peek_digit()) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > 100000) throw SmilesError(Kind::Syntax, pos_, "number too large");
      ++pos_;
    }
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Atom> atoms_;
  std::vector<std::size_t> atom_offsets_;
  std::vector<RawBond> bonds_;
  std::optional<std::size_t> prev_;
  std::optional<PendingBond> pending_;
  std::vector<std::pair<std::size_t, std::size_t>> branches_;  // (atom, offset of '(')
  std::map<int, RingOpening> rings_;
  bool last_was_open_ = false;
};

}  // namespace

MolecularGraph parse_smiles(std::string_view text) {
  try {
    return Parser(text).run();
  } catch (const SmilesError& e) {
    // Errors detected at end of input point at the last byte.
    if (!text.empty() && e.offset() >= text.size()) throw SmilesError(e.kind(), text.size() - 1, e.what());
    throw;
  }
}

}  // namespace molbench::chem
