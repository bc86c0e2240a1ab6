#pragma once

#include <vector>

#include "molbench/chem/graph.hpp"

namespace molbench::depict::detail {

/// Copy of `graph` with atom i moved to index rank[i] and bonds sorted by
/// endpoint, so anything computed on it depends only on the canonical order.
chem::MolecularGraph canonical_copy(const chem::MolecularGraph& graph, const std::vector<std::size_t>& rank);

}  // namespace molbench::depict::detail
