#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "molbench/chem/smiles.hpp"
#include "molbench/fingerprint.hpp"
#include "molbench/util/rng.hpp"

namespace molbench::testing {

/// Unique canonical SMILES built by chaining drug-like building blocks.
/// Many outputs share large substructures, so high-similarity pairs exist.
inline std::vector<std::string> generate_molecules(std::size_t count, std::uint64_t seed) {
  static const std::vector<std::string> cores = {"c1ccccc1", "c1ccncc1", "C1CCNCC1", "C1CCOCC1", "c1ccc2ccccc2c1",
                                                 "c1ccsc1",  "c1cc[nH]c1", "C1CCCCC1", "c1cnc2ccccc2c1"};
  static const std::vector<std::string> links = {"C", "CC", "N", "O", "C(=O)N", "C(=O)O", "CN", "S(=O)(=O)N", "C=C", "OC"};
  static const std::vector<std::string> starts = {"C", "CC", "N", "O", "C(C)C", "OC", "NC", "CC(C)(C)"};
  static const std::vector<std::string> caps = {"C", "F", "Cl", "Br", "O", "N", "C(F)(F)F", "C#N", "OC", "C(C)C"};
  util::Xoshiro256 rng(seed);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.below(v.size())]; };
  std::set<std::string> seen;
  std::vector<std::string> out;
  std::size_t guard = 0;
  while (out.size() < count && guard++ < count * 100) {
    std::string s = pick(starts);
    const auto n = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < n; ++i) {
      s += pick(links);
      s += pick(cores);
    }
    if (rng.below(2)) s += pick(caps);
    const auto canon = chem::write_canonical_smiles(chem::parse_smiles(s));
    if (seen.insert(canon).second) out.push_back(canon);
  }
  return out;
}

inline std::set<std::size_t> bit_set(const Fingerprint& fp) {
  std::set<std::size_t> s;
  for (std::size_t b = 0; b < fp.width(); ++b) {
    if (fp.test(b)) s.insert(b);
  }
  return s;
}

// Set-based Tanimoto, independent of the word-level implementation.
inline double oracle_tanimoto(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::vector<std::size_t> both, either;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(either));
  return either.empty() ? 0.0 : static_cast<double>(both.size()) / static_cast<double>(either.size());
}

// Direct evaluation in long double: explicit exponentials, explicit
// normalization, one sum per anchor over every other vector.
inline double oracle_ntxent(const std::vector<std::vector<double>>& z, const std::vector<std::size_t>& pair_of,
                            double tau) {
  const std::size_t m = z.size();
  auto cos = [&](std::size_t a, std::size_t b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t t = 0; t < z[a].size(); ++t) {
      dot += static_cast<long double>(z[a][t]) * z[b][t];
      na += static_cast<long double>(z[a][t]) * z[a][t];
      nb += static_cast<long double>(z[b][t]) * z[b][t];
    }
    return dot / std::sqrt(na * nb);
  };
  long double sum = 0;
  for (std::size_t i = 0; i < m; ++i) {
    long double denom = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (k != i) denom += std::exp(cos(i, k) / tau);
    sum += -std::log(std::exp(cos(i, pair_of[i]) / tau) / denom);
  }
  return static_cast<double>(sum / static_cast<long double>(m));
}

}  // namespace molbench::testing
