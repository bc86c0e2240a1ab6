#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace molbench::chem {

/// Atomic number -> symbol; returns an empty view for unknown numbers.
std::string_view element_symbol(int atomic_number);

/// Symbol ("C", "Cl", "Se") -> atomic number, or 0 if unrecognized. Case-sensitive.
int atomic_number(std::string_view symbol);

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

/// Valence contribution of a bond, counting an aromatic bond as 1.
constexpr int bond_valence(BondOrder order) {
  return order == BondOrder::Aromatic ? 1 : static_cast<int>(order);
}

struct Atom {
  int atomic_number = 6;
  int formal_charge = 0;
  bool aromatic = false;
  /// Present for bracket atoms; the H count is then taken verbatim.
  std::optional<int> explicit_h;
  std::optional<int> isotope;
  /// Stereo annotation as written ("@", "@@", ...). Not used for identity.
  std::string chirality;

  // Filled in by MolecularGraph::build.
  bool ring_member = false;
  int implicit_h = 0;

  bool bracket() const { return explicit_h.has_value(); }
  int hydrogen_count() const { return explicit_h.value_or(implicit_h); }
  std::string_view symbol() const { return element_symbol(atomic_number); }
};

struct Bond {
  std::size_t begin = 0;
  std::size_t end = 0;
  BondOrder order = BondOrder::Single;
  /// '/' or '\\' directional annotation, 0 if none. Not used for identity.
  char stereo = 0;

  std::size_t other(std::size_t atom) const { return atom == begin ? end : begin; }
};

/// Allowed valences of the organic subset: B 3; C 4; N 3,5; O 2; P 3,5; S 2,4,6; halogens 1.
class ValenceModel {
 public:
  static const ValenceModel& standard();

  /// Allowed valences for a neutral element; empty if the element is not modelled.
  std::span<const int> allowed(int atomic_number) const;

  /// Implicit H for an organic-subset atom with the given bond valence sum
  /// (aromatic bonds counted as 1). nullopt signals a valence violation.
  std::optional<int> implicit_hydrogens(int atomic_number, bool aromatic, int bond_sum) const;

  /// Largest valence an atom of this element and charge may carry
  /// (charge shifts the valence the way isoelectronic neighbours behave).
  int max_valence(int atomic_number, int formal_charge) const;

 private:
  ValenceModel();
  std::vector<std::vector<int>> table_;
};

struct NeighborRef {
  std::size_t atom;
  std::size_t bond;
};

/// Structural validation failure raised while building a graph.
class GraphError : public std::runtime_error {
 public:
  enum class Kind { InvalidIndex, SelfBond, ParallelBond, AromaticBondOnAliphaticAtom, ValenceViolation };
  GraphError(Kind kind, std::size_t atom, const std::string& what)
      : std::runtime_error(what), kind_(kind), atom_(atom) {}
  Kind kind() const { return kind_; }
  /// Offending atom index (first endpoint for bond errors).
  std::size_t atom() const { return atom_; }

 private:
  Kind kind_;
  std::size_t atom_;
};

/// Immutable molecular graph. Hydrogens are implicit or explicit counts on heavy
/// atoms unless written as bracket [H] atoms.
class MolecularGraph {
 public:
  MolecularGraph() = default;

  /// Validates the atoms and bonds, computes ring flags and implicit H counts.
  /// Throws GraphError when an invariant does not hold.
  static MolecularGraph build(std::vector<Atom> atoms, std::vector<Bond> bonds, std::string source_text = {});

  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }
  const Atom& atom(std::size_t i) const { return atoms_[i]; }
  const Bond& bond(std::size_t i) const { return bonds_[i]; }
  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  bool empty() const { return atoms_.empty(); }
  const std::string& source_text() const { return source_; }

  std::span<const NeighborRef> neighbors(std::size_t atom) const {
    return {adjacency_.data() + offsets_[atom], adjacency_.data() + offsets_[atom + 1]};
  }
  std::size_t degree(std::size_t atom) const { return offsets_[atom + 1] - offsets_[atom]; }

  /// Sum of bond valences at an atom, aromatic bonds counted as 1.
  int bond_valence_sum(std::size_t atom) const;

  /// Index of the bond joining a and b, if any.
  std::optional<std::size_t> bond_between(std::size_t a, std::size_t b) const;

  /// Connected component id per atom, numbered in order of first atom index.
  std::vector<std::size_t> components() const;

  /// Graph with atoms renumbered so that new index = order[old index].
  MolecularGraph permuted(std::span<const std::size_t> order) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::string source_;
  std::vector<NeighborRef> adjacency_;
  std::vector<std::size_t> offsets_{0};
};

/// Bonds that are bridges (not part of any cycle), by bond index.
std::vector<bool> find_bridges(std::size_t atom_count, std::span<const Bond> bonds);

}  // namespace molbench::chem
