#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "molbench/chem/graph.hpp"

namespace molbench {

struct MoleculeId {
  std::uint64_t value = 0;
  auto operator<=>(const MoleculeId&) const = default;
};

class FingerprintError : public std::runtime_error {
 public:
  enum class Kind { WidthMismatch, DuplicateId, BadIndexFile };
  FingerprintError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Fixed-width bitset of hashed circular atom environments.
class Fingerprint {
 public:
  Fingerprint() = default;
  Fingerprint(std::size_t width, int radius, MoleculeId id = {});

  std::size_t width() const { return width_; }
  int radius() const { return radius_; }
  MoleculeId source_id() const { return id_; }
  void set_source_id(MoleculeId id) { id_ = id; }

  void set(std::size_t bit) { words_[bit / 64] |= std::uint64_t{1} << (bit % 64); }
  bool test(std::size_t bit) const { return (words_[bit / 64] >> (bit % 64)) & 1U; }
  std::size_t popcount() const;

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::vector<std::uint64_t>& words() { return words_; }

  bool operator==(const Fingerprint& o) const { return width_ == o.width_ && words_ == o.words_; }

 private:
  std::size_t width_ = 0;
  int radius_ = 0;
  MoleculeId id_;
  std::vector<std::uint64_t> words_;
};

inline constexpr std::size_t kDefaultFingerprintWidth = 2048;
inline constexpr int kDefaultFingerprintRadius = 2;

/// ECFP-style fingerprint. Atom invariant (Z, charge, degree, H count, ring flag)
/// and each iteration's (radius, own id, sorted (bond code, neighbour id) list)
/// are hashed with FNV-1a-64 over little-endian fields; bit = id mod width.
Fingerprint morgan_fingerprint(const chem::MolecularGraph& graph, int radius = kDefaultFingerprintRadius,
                               std::size_t width = kDefaultFingerprintWidth, MoleculeId id = {});

/// |a and b| / |a or b|; 0 when both are empty. Throws WidthMismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

struct Neighbor {
  MoleculeId id;
  double score = 0.0;
  bool operator==(const Neighbor&) const = default;
};

/// Exact-scan similarity index with unique ids.
class SimilarityIndex {
 public:
  explicit SimilarityIndex(std::size_t width = kDefaultFingerprintWidth, int radius = kDefaultFingerprintRadius)
      : width_(width), radius_(radius) {}

  /// Adds an entry under fp.source_id(). With a non-empty canonical key, a
  /// second molecule with the same key is ignored and false is returned.
  bool add(const Fingerprint& fp, const std::string& canonical = {});

  const std::vector<Fingerprint>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t width() const { return width_; }
  int radius() const { return radius_; }

  /// Binary layout, all little-endian:
  ///   "MBFP" | u32 version (1) | u32 width | u32 radius | u64 count
  ///   count x ( u64 id | ceil(width/64) x u64 words )
  void save(const std::filesystem::path& path) const;
  static SimilarityIndex load(const std::filesystem::path& path);

 private:
  std::size_t width_;
  int radius_;
  std::vector<Fingerprint> entries_;
  std::unordered_set<std::uint64_t> ids_;
  std::unordered_set<std::string> canonical_;
};

/// Descending score, ties by ascending id; the query's own id is skipped.
std::vector<Neighbor> top_k_similar(const Fingerprint& query, const SimilarityIndex& index, std::size_t k);

enum class PairStrategy { Aug, TAug };
std::string to_string(PairStrategy s);

struct PositivePair {
  MoleculeId anchor;
  MoleculeId positive;
  double similarity = 0.0;
  PairStrategy strategy = PairStrategy::TAug;
  bool operator==(const PositivePair&) const = default;
};

struct MiningResult {
  std::vector<PositivePair> pairs;   // grouped by anchor in index order
  std::vector<MoleculeId> skipped;   // anchors without any partner above threshold
};

inline constexpr double kPositiveThreshold = 0.85;
inline constexpr std::size_t kPositivesPerAnchor = 3;

/// Up to m partners per anchor with score strictly above threshold.
MiningResult mine_tanimoto_positives(const SimilarityIndex& index, double threshold = kPositiveThreshold,
                                     std::size_t m = kPositivesPerAnchor);

}  // namespace molbench
