#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "molbench/chem/graph.hpp"

namespace molbench::chem {

class SmilesError : public std::runtime_error {
 public:
  enum class Kind { UnbalancedBranch, UnclosedRing, UnknownElement, ValenceViolation, Syntax };

  SmilesError(Kind kind, std::size_t offset, const std::string& message);

  Kind kind() const { return kind_; }
  /// Byte offset into the input where the problem was detected.
  std::size_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::size_t offset_;
};

std::string_view to_string(SmilesError::Kind kind);

/// Parses the organic subset, bracket atoms, charges, isotopes, ring closures
/// (digits and %nn) and aromatic lowercase atoms. Stereo marks are kept as
/// annotations only.
MolecularGraph parse_smiles(std::string_view text);

/// Morgan-style refined symmetry classes: dense ranks starting at 0, equal for
/// atoms the refinement cannot tell apart. Invariant under atom renumbering.
std::vector<std::size_t> canonical_ranks(const MolecularGraph& graph);

/// Total canonical order: canonical_ranks with ties broken one at a time
/// (lowest rank class first, lowest index within it) and re-refined.
std::vector<std::size_t> canonical_order(const MolecularGraph& graph);

/// Deterministic SMILES that is identical for isomorphic graphs. Stereo is not written.
std::string write_canonical_smiles(const MolecularGraph& graph);

/// Same as write_canonical_smiles but also reports the atom output order.
std::string write_canonical_smiles(const MolecularGraph& graph, std::vector<std::size_t>& output_order);

}  // namespace molbench::chem
