#include <algorithm>
#include <map>
#include <cctype>
#include <cstdlib>
#include <numeric>
#include <set>
#include <tuple>

#include "molbench/chem/smiles.hpp"

namespace molbench::chem {

namespace {

using Key = std::vector<long>;

// Re-assign dense ranks from per-atom sort keys. Returns the number of classes.
std::size_t dense_rank(const std::vector<Key>& keys, std::vector<std::size_t>& ranks) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  ranks.assign(keys.size(), 0);
  std::size_t r = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i > 0 && keys[idx[i]] != keys[idx[i - 1]]) ++r;
    ranks[idx[i]] = r;
  }
  return keys.empty() ? 0 : r + 1;
}

std::size_t class_count(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) return 0;
  return *std::max_element(ranks.begin(), ranks.end()) + 1;
}

// Iterate neighbourhood refinement until the partition stops splitting.
void refine(const MolecularGraph& g, std::vector<std::size_t>& ranks) {
  std::size_t classes = class_count(ranks);
  std::vector<Key> keys(g.atom_count());
  while (true) {
    for (std::size_t i = 0; i < g.atom_count(); ++i) {
      std::vector<std::pair<long, long>> nbs;
      for (const auto& nb : g.neighbors(i)) {
        nbs.emplace_back(static_cast<long>(ranks[nb.atom]), static_cast<long>(g.bond(nb.bond).order));
      }
      std::sort(nbs.begin(), nbs.end());
      Key& k = keys[i];
      k.clear();
      k.push_back(static_cast<long>(ranks[i]));
      for (const auto& [r, o] : nbs) {
        k.push_back(r);
        k.push_back(o);
      }
    }
    const std::size_t next = dense_rank(keys, ranks);
    if (next == classes) break;
    classes = next;
  }
}

std::vector<std::size_t> initial_ranks(const MolecularGraph& g) {
  std::vector<Key> keys(g.atom_count());
  for (std::size_t i = 0; i < g.atom_count(); ++i) {
    const auto& a = g.atom(i);
    keys[i] = {a.atomic_number,
               a.formal_charge,
               static_cast<long>(g.degree(i)),
               a.hydrogen_count(),
               a.isotope.value_or(0),
               a.aromatic ? 1 : 0};
  }
  std::vector<std::size_t> ranks;
  dense_rank(keys, ranks);
  return ranks;
}

bool is_organic(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 9: case 15: case 16: case 17: case 35: case 53: return true;
    default: return false;
  }
}

bool aromatic_organic(int z) {
  switch (z) {
    case 5: case 6: case 7: case 8: case 15: case 16: return true;
    default: return false;
  }
}

std::string atom_text(const MolecularGraph& g, std::size_t i) {
  const Atom& a = g.atom(i);
  std::string sym(a.symbol());
  if (a.aromatic) {
    for (auto& ch : sym) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  const bool plain_ok = is_organic(a.atomic_number) && (!a.aromatic || aromatic_organic(a.atomic_number)) &&
                        a.formal_charge == 0 && !a.isotope;
  if (plain_ok) {
    const auto implied =
        ValenceModel::standard().implicit_hydrogens(a.atomic_number, a.aromatic, g.bond_valence_sum(i));
    if (implied && *implied == a.hydrogen_count()) return sym;
  }
  std::string out = "[";
  if (a.isotope) out += std::to_string(*a.isotope);
  out += sym;
  const int h = a.hydrogen_count();
  if (h > 0) {
    out += 'H';
    if (h > 1) out += std::to_string(h);
  }
  if (a.formal_charge != 0) {
    out += a.formal_charge > 0 ? '+' : '-';
    const int m = std::abs(a.formal_charge);
    if (m > 1) out += std::to_string(m);
  }
  out += ']';
  return out;
}

std::string bond_text(const MolecularGraph& g, const Bond& b) {
  const bool both_aromatic = g.atom(b.begin).aromatic && g.atom(b.end).aromatic;
  switch (b.order) {
    case BondOrder::Single: return both_aromatic ? "-" : "";
    case BondOrder::Double: return "=";
    case BondOrder::Triple: return "#";
    case BondOrder::Aromatic: return "";
  }
  return "";
}

std::string ring_label(int digit) {
  if (digit < 10) return std::string(1, static_cast<char>('0' + digit));
  return "%" + std::to_string(digit);
}

class Writer {
 public:
  Writer(const MolecularGraph& g, std::vector<std::size_t> order) : g_(g), order_(std::move(order)) {}

  std::string write(std::vector<std::size_t>& output_order) {
    const std::size_t n = g_.atom_count();
    visited_.assign(n, false);
    children_.assign(n, {});
    closures_.assign(n, {});
    ring_bond_.assign(g_.bond_count(), false);

    std::vector<std::size_t> by_order(n);
    for (std::size_t i = 0; i < n; ++i) by_order[order_[i]] = i;

    std::string out;
    for (std::size_t start : by_order) {
      if (visited_[start]) continue;
      discover(start, static_cast<std::size_t>(-1));
      if (!out.empty()) out += '.';
      emit(start, static_cast<std::size_t>(-1), out, output_order);
    }
    return out;
  }

 private:
  std::vector<NeighborRef> sorted_neighbors(std::size_t u) const {
    std::vector<NeighborRef> nbs(g_.neighbors(u).begin(), g_.neighbors(u).end());
    std::sort(nbs.begin(), nbs.end(), [&](const NeighborRef& a, const NeighborRef& b) { return order_[a.atom] < order_[b.atom]; });
    return nbs;
  }

  void discover(std::size_t u, std::size_t parent_bond) {
    visited_[u] = true;
    for (const auto& nb : sorted_neighbors(u)) {
      if (nb.bond == parent_bond || ring_bond_[nb.bond]) continue;
      if (visited_[nb.atom]) {
        ring_bond_[nb.bond] = true;
        closures_[u].push_back(nb);
        closures_[nb.atom].push_back({u, nb.bond});
      } else {
        children_[u].push_back(nb);
        discover(nb.atom, nb.bond);
      }
    }
  }

  void emit(std::size_t u, std::size_t parent_bond, std::string& out, std::vector<std::size_t>& output_order) {
    if (parent_bond != static_cast<std::size_t>(-1)) out += bond_text(g_, g_.bond(parent_bond));
    out += atom_text(g_, u);
    output_order.push_back(u);
    written_.insert(u);

    // Closings (partner already written) first, then openings; each by partner order.
    auto closures = closures_[u];
    std::sort(closures.begin(), closures.end(), [&](const NeighborRef& a, const NeighborRef& b) {
      const bool ca = written_.count(a.atom) && a.atom != u;
      const bool cb = written_.count(b.atom) && b.atom != u;
      if (ca != cb) return ca;
      return order_[a.atom] < order_[b.atom];
    });
    for (const auto& c : closures) {
      auto it = open_digits_.find(c.bond);
      if (it != open_digits_.end()) {
        out += ring_label(it->second);
        free_digit(it->second);
        open_digits_.erase(it);
      } else {
        const int d = take_digit();
        open_digits_[c.bond] = d;
        out += bond_text(g_, g_.bond(c.bond));
        out += ring_label(d);
      }
    }

    const auto& kids = children_[u];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const bool last = (i + 1 == kids.size());
      if (!last) out += '(';
      emit(kids[i].atom, kids[i].bond, out, output_order);
      if (!last) out += ')';
    }
  }

  int take_digit() {
    int d = 1;
    while (used_digits_.count(d)) ++d;
    used_digits_.insert(d);
    return d;
  }
  void free_digit(int d) { used_digits_.erase(d); }

  const MolecularGraph& g_;
  std::vector<std::size_t> order_;
  std::vector<bool> visited_;
  std::vector<std::vector<NeighborRef>> children_;
  std::vector<std::vector<NeighborRef>> closures_;
  std::vector<bool> ring_bond_;
  std::map<std::size_t, int> open_digits_;
  std::set<int> used_digits_;
  std::set<std::size_t> written_;
};

}  // namespace

std::vector<std::size_t> canonical_ranks(const MolecularGraph& graph) {
  auto ranks = initial_ranks(graph);
  refine(graph, ranks);
  return ranks;
}

std::vector<std::size_t> canonical_order(const MolecularGraph& graph) {
  auto ranks = canonical_ranks(graph);
  const std::size_t n = graph.atom_count();
  while (class_count(ranks) < n) {
    // Lowest rank value shared by more than one atom.
    std::vector<std::size_t> count(n, 0);
    for (auto r : ranks) ++count[r];
    std::size_t tied = 0;
    while (count[tied] < 2) ++tied;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (ranks[i] == tied) {
        chosen = i;
        break;
      }
    }
    std::vector<Key> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = {static_cast<long>(ranks[i]), (i == chosen) ? 0L : 1L};
    }
    dense_rank(keys, ranks);
    refine(graph, ranks);
  }
  return ranks;
}

std::string write_canonical_smiles(const MolecularGraph& graph, std::vector<std::size_t>& output_order) {
  output_order.clear();
  if (graph.empty()) return {};
  return Writer(graph, canonical_order(graph)).write(output_order);
}

std::string write_canonical_smiles(const MolecularGraph& graph) {
  std::vector<std::size_t> order;
  return write_canonical_smiles(graph, order);
}

}  // namespace molbench::chem
