#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "molbench/dataset.hpp"
#include "molbench/fingerprint.hpp"

namespace molbench::contrastive {

class ContrastiveError : public std::runtime_error {
 public:
  enum class Kind { ZeroVector, DimensionMismatch, InvalidBatch, InvalidParam, NonFinite, BadManifest };
  ContrastiveError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

double cosine_sim(std::span<const double> a, std::span<const double> b);

/// Scales to unit L2 norm. Throws ZeroVector.
std::vector<double> normalized(std::span<const double> v);

struct EmbeddingBatch {
  std::vector<std::vector<double>> vectors;  // 2N unit vectors
  std::vector<std::size_t> pair_of;          // positive partner of each vector

  /// Layout [a_0..a_{N-1}, b_0..b_{N-1}] with a_i and b_i paired; inputs are
  /// normalized.
  static EmbeddingBatch from_pairs(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

  std::size_t pairs() const { return vectors.size() / 2; }
  /// Throws InvalidBatch (odd size, bad pairing, norm off by more than 1e-6)
  /// or DimensionMismatch.
  void validate() const;
};

struct LossParams {
  double tau = 0.5;
  double lambda = 1.0;
  void validate() const;
};

/// Mean over all 2N anchors of -log(exp(s_ip/tau) / sum_{k != i} exp(s_ik/tau)),
/// with s the cosine similarity and p the anchor's partner.
double ntxent_loss(const EmbeddingBatch& batch, double tau = 0.5);

/// task + lambda * contrastive. Throws NonFinite or InvalidParam (lambda < 0).
double total_loss(double task_loss, double contrastive_loss, double lambda = 1.0);

struct PairEntry {
  PairStrategy strategy = PairStrategy::Aug;
  std::size_t anchor = 0;
  std::string anchor_image;
  std::size_t positive = 0;
  std::string positive_image;
  std::optional<double> score;         // T-Aug only
  std::vector<std::string> transforms;  // Aug only, two names
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  /// Validates the per-strategy invariants; throws BadManifest.
  static PairEntry from_json(const nlohmann::json& j);
  bool operator==(const PairEntry&) const = default;
};

struct PairManifest {
  PairStrategy strategy = PairStrategy::Aug;
  std::uint64_t seed = 0;
  std::vector<PairEntry> entries;
  std::vector<std::size_t> skipped;  // anchors without a partner
};

inline constexpr int kPairSchemaVersion = 1;

/// Aug: two distinct transforms per molecule, drawn from a generator seeded by
/// (seed, id) so the result does not depend on worker count. T-Aug: Tanimoto
/// positives above 0.85, at most three per anchor, one entry per direction.
PairManifest build_pair_manifest(const std::vector<dataset::MoleculeRecord>& records, PairStrategy strategy,
                                 std::uint64_t seed, unsigned workers = 0);

void write_pair_manifest(const std::filesystem::path& path, const PairManifest& manifest);
/// Entries only; skipped anchors are not stored.
PairManifest read_pair_manifest(const std::filesystem::path& path);

/// JSONL, one {"id": string, "vector": [..]} per line.
using EmbeddingTable = std::map<std::string, std::vector<double>>;
void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::filesystem::path& path);

/// A batch as logged by a trainer: ordered (anchor, positive) ids, the
/// temperature and the loss it computed.
struct SavedBatch {
  std::vector<std::pair<std::string, std::string>> pairs;
  double tau = 0.5;
  std::optional<double> logged_loss;

  nlohmann::json to_json() const;
  static SavedBatch from_json(const nlohmann::json& j);
  /// Looks up both sides in the table; throws InvalidBatch on a missing id.
  EmbeddingBatch resolve(const EmbeddingTable& table) const;
};

/// Job description handed to the external fine-tuning adapter.
struct TrainJob {
  std::string base_model = "blip2";
  int lora_rank = 16;
  int lora_alpha = 32;
  double lora_dropout = 0.05;
  /// vision_encoder is listed unless the contrastive stage is on (lambda > 0
  /// with a pair manifest).
  std::vector<std::string> frozen;
  double lambda = 1.0;
  double tau = 0.5;
  int epochs = 1;
  double fraction = 1.0;  // share of the training split used, in (0, 1]
  std::uint64_t seed = 42;
  std::string dataset_manifest;
  std::string split;
  std::string pair_manifest;  // empty when no contrastive stage
  std::string predictions_out = "predictions.jsonl";
  std::string embeddings_out = "embeddings.jsonl";

  /// Fills `frozen` from lambda and pair_manifest.
  void resolve_frozen();
  /// Throws InvalidParam.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainJob from_json(const nlohmann::json& j);
};

inline constexpr int kTrainJobSchemaVersion = 1;

}  // namespace molbench::contrastive
