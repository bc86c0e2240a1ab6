#include "molbench/chem/graph.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace molbench::chem {

namespace {

constexpr std::array<std::string_view, 119> kSymbols = {
    "",   "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",
    "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho",
    "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md",
    "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

// Elements whose valence grows with positive charge (electron-rich p-block).
bool charge_raises_valence(int z) {
  switch (z) {
    case 7: case 8: case 9: case 15: case 16: case 17: case 33: case 34: case 35: case 52: case 53:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string_view element_symbol(int z) {
  if (z <= 0 || z >= static_cast<int>(kSymbols.size())) return {};
  return kSymbols[static_cast<std::size_t>(z)];
}

int atomic_number(std::string_view symbol) {
  if (symbol.empty()) return 0;
  for (std::size_t z = 1; z < kSymbols.size(); ++z) {
    if (kSymbols[z] == symbol) return static_cast<int>(z);
  }
  return 0;
}

ValenceModel::ValenceModel() : table_(kSymbols.size()) {
  table_[1] = {1};
  table_[5] = {3};
  table_[6] = {4};
  table_[7] = {3, 5};
  table_[8] = {2};
  table_[9] = {1};
  table_[15] = {3, 5};
  table_[16] = {2, 4, 6};
  table_[17] = {1};
  table_[35] = {1};
  table_[53] = {1};
}

const ValenceModel& ValenceModel::standard() {
  static const ValenceModel model;
  return model;
}

std::span<const int> ValenceModel::allowed(int z) const {
  if (z <= 0 || z >= static_cast<int>(table_.size())) return {};
  return table_[static_cast<std::size_t>(z)];
}

std::optional<int> ValenceModel::implicit_hydrogens(int z, bool aromatic, int bond_sum) const {
  const auto valences = allowed(z);
  if (valences.empty()) return std::nullopt;
  if (aromatic) {
    // One valence unit is taken by the delocalised pi bond where the default valence leaves room.
    if (bond_sum > valences.back()) return std::nullopt;
    return std::max(0, valences.front() - bond_sum - 1);
  }
  for (int v : valences) {
    if (v >= bond_sum) return v - bond_sum;
  }
  return std::nullopt;
}

int ValenceModel::max_valence(int z, int charge) const {
  const auto valences = allowed(z);
  int base = valences.empty() ? 8 : valences.back();
  if (valences.empty() || charge == 0) return base;
  int shifted = 0;
  if (z == 5) {
    shifted = base - charge;  // B- is isoelectronic with C
  } else if (z == 6 || z == 1) {
    shifted = base - std::abs(charge);
  } else if (charge_raises_valence(z)) {
    shifted = base + charge;
  } else {
    shifted = base - std::abs(charge);
  }
  return std::max(0, shifted);
}

std::vector<bool> find_bridges(std::size_t n, std::span<const Bond> bonds) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    adj[bonds[b].begin].emplace_back(bonds[b].end, b);
    adj[bonds[b].end].emplace_back(bonds[b].begin, b);
  }
  std::vector<bool> bridge(bonds.size(), false);
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    std::size_t atom;
    std::size_t parent_bond;
    std::size_t next;
  };
  constexpr auto kNone = static_cast<std::size_t>(-1);
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    std::vector<Frame> stack{{root, kNone, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      auto& f = stack.back();
      if (f.next < adj[f.atom].size()) {
        auto [to, b] = adj[f.atom][f.next++];
        if (b == f.parent_bond) continue;
        if (disc[to] >= 0) {
          low[f.atom] = std::min(low[f.atom], disc[to]);
        } else {
          disc[to] = low[to] = timer++;
          stack.push_back({to, b, 0});
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          auto& parent = stack.back();
          low[parent.atom] = std::min(low[parent.atom], low[done.atom]);
          if (low[done.atom] > disc[parent.atom]) bridge[done.parent_bond] = true;
        }
      }
    }
  }
  return bridge;
}

MolecularGraph MolecularGraph::build(std::vector<Atom> atoms, std::vector<Bond> bonds, std::string source_text) {
  using Kind = GraphError::Kind;
  const std::size_t n = atoms.size();
  MolecularGraph g;

  std::vector<std::size_t> degree(n, 0);
  for (const auto& b : bonds) {
    if (b.begin >= n || b.end >= n) throw GraphError(Kind::InvalidIndex, b.begin, "bond endpoint out of range");
    if (b.begin == b.end) throw GraphError(Kind::SelfBond, b.begin, "bond joins an atom to itself");
    if (b.order == BondOrder::Aromatic && !(atoms[b.begin].aromatic && atoms[b.end].aromatic)) {
      throw GraphError(Kind::AromaticBondOnAliphaticAtom, b.begin, "aromatic bond between non-aromatic atoms");
    }
    ++degree[b.begin];
    ++degree[b.end];
  }
  g.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  g.adjacency_.resize(g.offsets_[n]);
  std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    g.adjacency_[fill[bonds[b].begin]++] = {bonds[b].end, b};
    g.adjacency_[fill[bonds[b].end]++] = {bonds[b].begin, b};
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto first = g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]);
    auto last = g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]);
    std::sort(first, last, [](const NeighborRef& a, const NeighborRef& b) { return a.atom < b.atom; });
    if (std::adjacent_find(first, last, [](const NeighborRef& a, const NeighborRef& b) { return a.atom == b.atom; }) !=
        last) {
      throw GraphError(Kind::ParallelBond, i, "more than one bond between the same atom pair");
    }
  }

  const auto bridges = find_bridges(n, bonds);
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (!bridges[b]) {
      atoms[bonds[b].begin].ring_member = true;
      atoms[bonds[b].end].ring_member = true;
    }
  }

  g.atoms_ = std::move(atoms);
  g.bonds_ = std::move(bonds);
  g.source_ = std::move(source_text);

  const auto& valence = ValenceModel::standard();
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = g.atoms_[i];
    if (a.explicit_h && *a.explicit_h < 0) throw GraphError(Kind::ValenceViolation, i, "negative hydrogen count");
    if (a.bracket()) {
      a.implicit_h = 0;
      continue;
    }
    const auto h = valence.implicit_hydrogens(a.atomic_number, a.aromatic, g.bond_valence_sum(i));
    if (!h) {
      throw GraphError(Kind::ValenceViolation, i,
                       "valence exceeded at atom " + std::to_string(i) + " (" + std::string(a.symbol()) + ")");
    }
    a.implicit_h = *h;
  }
  return g;
}

int MolecularGraph::bond_valence_sum(std::size_t atom) const {
  int sum = 0;
  for (const auto& nb : neighbors(atom)) sum += bond_valence(bonds_[nb.bond].order);
  return sum;
}

std::optional<std::size_t> MolecularGraph::bond_between(std::size_t a, std::size_t b) const {
  for (const auto& nb : neighbors(a)) {
    if (nb.atom == b) return nb.bond;
  }
  return std::nullopt;
}

std::vector<std::size_t> MolecularGraph::components() const {
  constexpr auto kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(atoms_.size(), kUnset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < atoms_.size(); ++s) {
    if (comp[s] != kUnset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto& nb : neighbors(u)) {
        if (comp[nb.atom] == kUnset) {
          comp[nb.atom] = next;
          stack.push_back(nb.atom);
        }
      }
    }
    ++next;
  }
  return comp;
}

MolecularGraph MolecularGraph::permuted(std::span<const std::size_t> order) const {
  std::vector<Atom> atoms(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    Atom a = atoms_[i];
    a.ring_member = false;
    a.implicit_h = 0;
    atoms[order[i]] = std::move(a);
  }
  std::vector<Bond> bonds;
  bonds.reserve(bonds_.size());
  for (const auto& b : bonds_) bonds.push_back({order[b.begin], order[b.end], b.order, b.stereo});
  return build(std::move(atoms), std::move(bonds), source_);
}

}  // namespace molbench::chem
