#include "molbench/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "molbench/chem/smiles.hpp"
#include "molbench/depict.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/parallel.hpp"
#include "molbench/util/rng.hpp"

namespace molbench::contrastive {

using Kind = ContrastiveError::Kind;
using nlohmann::json;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) throw ContrastiveError(Kind::NonFinite, "embedding holds a non-finite value");
}

PairStrategy parse_strategy(const std::string& s) {
  if (s == "Aug") return PairStrategy::Aug;
  if (s == "T-Aug") return PairStrategy::TAug;
  throw ContrastiveError(Kind::BadManifest, "unknown pair strategy '" + s + "'");
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t id) { return seed ^ (id * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL); }

}  // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ContrastiveError(Kind::DimensionMismatch,
                           "dimensions differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  require_finite(a);
  require_finite(b);
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ContrastiveError(Kind::ZeroVector, "cosine of a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

std::vector<double> normalized(std::span<const double> v) {
  require_finite(v);
  const double n = norm(v);
  if (n == 0.0) throw ContrastiveError(Kind::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

EmbeddingBatch EmbeddingBatch::from_pairs(const std::vector<std::vector<double>>& a,
                                          const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size() || a.empty())
    throw ContrastiveError(Kind::InvalidBatch, "need the same positive number of anchors and positives");
  EmbeddingBatch batch;
  const std::size_t n = a.size();
  for (const auto& v : a) batch.vectors.push_back(normalized(v));
  for (const auto& v : b) batch.vectors.push_back(normalized(v));
  batch.pair_of.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.pair_of[i] = i + n;
    batch.pair_of[i + n] = i;
  }
  batch.validate();
  return batch;
}

void EmbeddingBatch::validate() const {
  const std::size_t m = vectors.size();
  if (m == 0 || m % 2 != 0) throw ContrastiveError(Kind::InvalidBatch, "batch needs 2N vectors, got " + std::to_string(m));
  if (pair_of.size() != m) throw ContrastiveError(Kind::InvalidBatch, "pair_of has the wrong length");
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = pair_of[i];
    if (j >= m || j == i || pair_of[j] != i)
      throw ContrastiveError(Kind::InvalidBatch, "pair_of is not a fixed-point-free involution at " + std::to_string(i));
    if (vectors[i].size() != vectors[0].size())
      throw ContrastiveError(Kind::DimensionMismatch, "vector " + std::to_string(i) + " has a different dimension");
    require_finite(vectors[i]);
    if (std::fabs(norm(vectors[i]) - 1.0) > 1e-6)
      throw ContrastiveError(Kind::InvalidBatch, "vector " + std::to_string(i) + " is not unit length");
  }
}

void LossParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ContrastiveError(Kind::InvalidParam, "tau must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContrastiveError(Kind::InvalidParam, "lambda must be >= 0");
}

double ntxent_loss(const EmbeddingBatch& batch, double tau) {
  LossParams{tau, 0.0}.validate();
  batch.validate();
  const std::size_t m = batch.vectors.size();
  std::vector<double> sim(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = i + 1; k < m; ++k)
      sim[i * m + k] = sim[k * m + i] = cosine_sim(batch.vectors[i], batch.vectors[k]) / tau;

  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    // log-sum-exp over k != i, shifted by the largest term
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k)
      if (k != i) hi = std::max(hi, sim[i * m + k]);
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      if (k != i) acc += std::exp(sim[i * m + k] - hi);
    total += hi + std::log(acc) - sim[i * m + batch.pair_of[i]];
  }
  return std::max(0.0, total / static_cast<double>(m));
}

double total_loss(double task_loss, double contrastive_loss, double lambda) {
  if (!std::isfinite(task_loss) || !std::isfinite(contrastive_loss) || !std::isfinite(lambda))
    throw ContrastiveError(Kind::NonFinite, "loss terms must be finite");
  if (lambda < 0.0) throw ContrastiveError(Kind::InvalidParam, "lambda must be >= 0");
  return task_loss + lambda * contrastive_loss;
}

json PairEntry::to_json() const {
  json j{{"schema_version", kPairSchemaVersion},
         {"strategy", molbench::to_string(strategy)},
         {"anchor", {{"id", anchor}, {"image", anchor_image}}},
         {"positive", {{"id", positive}, {"image", positive_image}}},
         {"score", score ? json(*score) : json(nullptr)},
         {"transforms", transforms},
         {"seed", seed}};
  return j;
}

PairEntry PairEntry::from_json(const json& j) {
  PairEntry e;
  try {
    if (j.at("schema_version").get<int>() != kPairSchemaVersion)
      throw ContrastiveError(Kind::BadManifest, "unsupported pair schema version");
    e.strategy = parse_strategy(j.at("strategy").get<std::string>());
    e.anchor = j.at("anchor").at("id").get<std::size_t>();
    e.anchor_image = j.at("anchor").at("image").get<std::string>();
    e.positive = j.at("positive").at("id").get<std::size_t>();
    e.positive_image = j.at("positive").at("image").get<std::string>();
    if (!j.at("score").is_null()) e.score = j.at("score").get<double>();
    e.transforms = j.at("transforms").get<std::vector<std::string>>();
    e.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& ex) {
    throw ContrastiveError(Kind::BadManifest, std::string("malformed pair entry: ") + ex.what());
  }
  if (e.strategy == PairStrategy::Aug) {
    if (e.transforms.size() != 2 || e.score || e.anchor != e.positive)
      throw ContrastiveError(Kind::BadManifest, "Aug entries name one molecule and exactly two transforms");
    for (const auto& t : e.transforms)
      if (!depict::parse_transform(t)) throw ContrastiveError(Kind::BadManifest, "unknown transform '" + t + "'");
  } else {
    if (!e.transforms.empty() || !e.score || !(*e.score > kPositiveThreshold) || e.anchor == e.positive)
      throw ContrastiveError(Kind::BadManifest, "T-Aug entries need two molecules and a score above 0.85");
  }
  return e;
}

PairManifest build_pair_manifest(const std::vector<dataset::MoleculeRecord>& records, PairStrategy strategy,
                                 std::uint64_t seed, unsigned workers) {
  PairManifest manifest;
  manifest.strategy = strategy;
  manifest.seed = seed;
  std::vector<const dataset::MoleculeRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  if (strategy == PairStrategy::Aug) {
    const auto pool = depict::augmentation_transforms();
    manifest.entries.resize(sorted.size());
    util::parallel_for(sorted.size(), workers, [&](std::size_t i) {
      const auto& r = *sorted[i];
      util::Xoshiro256 rng(mix(seed, r.id));
      const auto first = static_cast<std::size_t>(rng.below(pool.size()));
      auto second = static_cast<std::size_t>(rng.below(pool.size() - 1));
      if (second >= first) ++second;
      PairEntry& e = manifest.entries[i];
      e.strategy = strategy;
      e.anchor = e.positive = r.id;
      e.anchor_image = e.positive_image = r.image_path;
      e.transforms = {pool[first].name(), pool[second].name()};
      e.seed = seed;
    });
    return manifest;
  }

  std::vector<Fingerprint> fps(sorted.size());
  util::parallel_for(sorted.size(), workers, [&](std::size_t i) {
    fps[i] = morgan_fingerprint(chem::parse_smiles(sorted[i]->canonical), kDefaultFingerprintRadius,
                                kDefaultFingerprintWidth, MoleculeId{sorted[i]->id});
  });
  SimilarityIndex index;
  std::map<std::size_t, const dataset::MoleculeRecord*> by_id;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (index.add(fps[i], sorted[i]->canonical))
      by_id.emplace(sorted[i]->id, sorted[i]);
    else
      manifest.skipped.push_back(sorted[i]->id);
  }
  const auto mined = mine_tanimoto_positives(index, kPositiveThreshold, kPositivesPerAnchor);
  for (const auto& p : mined.pairs) {
    PairEntry e;
    e.strategy = strategy;
    e.anchor = p.anchor.value;
    e.positive = p.positive.value;
    e.anchor_image = by_id.at(e.anchor)->image_path;
    e.positive_image = by_id.at(e.positive)->image_path;
    e.score = p.similarity;
    e.seed = seed;
    manifest.entries.push_back(std::move(e));
  }
  for (const auto& id : mined.skipped) manifest.skipped.push_back(id.value);
  std::sort(manifest.skipped.begin(), manifest.skipped.end());
  return manifest;
}

void write_pair_manifest(const std::filesystem::path& path, const PairManifest& manifest) {
  std::vector<json> rows;
  rows.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) rows.push_back(e.to_json());
  util::write_jsonl(path, rows);
}

PairManifest read_pair_manifest(const std::filesystem::path& path) {
  PairManifest manifest;
  bool first = true;
  for (const auto& row : util::read_jsonl(path)) {
    auto e = PairEntry::from_json(row);
    if (first) {
      manifest.strategy = e.strategy;
      manifest.seed = e.seed;
      first = false;
    } else if (e.strategy != manifest.strategy || e.seed != manifest.seed) {
      throw ContrastiveError(Kind::BadManifest, "entries disagree on strategy or seed");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::vector<json> rows;
  for (const auto& [id, v] : table) rows.push_back({{"id", id}, {"vector", v}});
  util::write_jsonl(path, rows);
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  EmbeddingTable table;
  std::optional<std::size_t> dim;
  for (const auto& row : util::read_jsonl(path)) {
    std::string id;
    std::vector<double> v;
    try {
      id = row.at("id").get<std::string>();
      v = row.at("vector").get<std::vector<double>>();
    } catch (const json::exception& ex) {
      throw ContrastiveError(Kind::InvalidBatch, std::string("malformed embedding row: ") + ex.what());
    }
    if (dim && *dim != v.size()) throw ContrastiveError(Kind::DimensionMismatch, "embedding '" + id + "' has a different dimension");
    dim = v.size();
    if (!table.emplace(id, std::move(v)).second) throw ContrastiveError(Kind::InvalidBatch, "duplicate embedding id '" + id + "'");
  }
  return table;
}

json SavedBatch::to_json() const {
  json p = json::array();
  for (const auto& [a, b] : pairs) p.push_back({a, b});
  return {{"pairs", p}, {"tau", tau}, {"loss", logged_loss ? json(*logged_loss) : json(nullptr)}};
}

SavedBatch SavedBatch::from_json(const json& j) {
  SavedBatch s;
  try {
    for (const auto& p : j.at("pairs")) s.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    s.tau = j.value("tau", 0.5);
    if (j.contains("loss") && !j.at("loss").is_null()) s.logged_loss = j.at("loss").get<double>();
  } catch (const json::exception& ex) {
    throw ContrastiveError(Kind::InvalidBatch, std::string("malformed saved batch: ") + ex.what());
  }
  return s;
}

EmbeddingBatch SavedBatch::resolve(const EmbeddingTable& table) const {
  auto lookup = [&](const std::string& id) -> const std::vector<double>& {
    auto it = table.find(id);
    if (it == table.end()) throw ContrastiveError(Kind::InvalidBatch, "no embedding for '" + id + "'");
    return it->second;
  };
  std::vector<std::vector<double>> a, b;
  for (const auto& [x, y] : pairs) {
    a.push_back(lookup(x));
    b.push_back(lookup(y));
  }
  return EmbeddingBatch::from_pairs(a, b);
}

void TrainJob::resolve_frozen() {
  frozen.clear();
  if (!(lambda > 0.0 && !pair_manifest.empty())) frozen.push_back("vision_encoder");
}

void TrainJob::validate() const {
  if (base_model.empty()) throw ContrastiveError(Kind::InvalidParam, "base_model is empty");
  if (lora_rank < 1 || lora_alpha < 1) throw ContrastiveError(Kind::InvalidParam, "LoRA rank and alpha must be >= 1");
  if (!(lora_dropout >= 0.0 && lora_dropout < 1.0)) throw ContrastiveError(Kind::InvalidParam, "LoRA dropout must lie in [0, 1)");
  LossParams{tau, lambda}.validate();
  if (epochs < 1) throw ContrastiveError(Kind::InvalidParam, "epochs must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ContrastiveError(Kind::InvalidParam, "fraction must lie in (0, 1]");
  if (dataset_manifest.empty()) throw ContrastiveError(Kind::InvalidParam, "dataset_manifest is empty");
}

json TrainJob::to_json() const {
  return {{"schema_version", kTrainJobSchemaVersion},
          {"base_model", base_model},
          {"lora", {{"rank", lora_rank}, {"alpha", lora_alpha}, {"dropout", lora_dropout}}},
          {"frozen", frozen},
          {"loss", {{"lambda", lambda}, {"tau", tau}}},
          {"epochs", epochs},
          {"fraction", fraction},
          {"seed", seed},
          {"inputs", {{"dataset_manifest", dataset_manifest}, {"split", split}, {"pair_manifest", pair_manifest}}},
          {"outputs", {{"predictions", predictions_out}, {"embeddings", embeddings_out}}}};
}

TrainJob TrainJob::from_json(const json& j) {
  TrainJob t;
  try {
    if (j.at("schema_version").get<int>() != kTrainJobSchemaVersion)
      throw ContrastiveError(Kind::InvalidParam, "unsupported train job schema version");
    t.base_model = j.at("base_model").get<std::string>();
    t.lora_rank = j.at("lora").at("rank").get<int>();
    t.lora_alpha = j.at("lora").at("alpha").get<int>();
    t.lora_dropout = j.at("lora").at("dropout").get<double>();
    t.frozen = j.at("frozen").get<std::vector<std::string>>();
    t.lambda = j.at("loss").at("lambda").get<double>();
    t.tau = j.at("loss").at("tau").get<double>();
    t.epochs = j.at("epochs").get<int>();
    t.fraction = j.at("fraction").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.dataset_manifest = j.at("inputs").at("dataset_manifest").get<std::string>();
    t.split = j.at("inputs").at("split").get<std::string>();
    t.pair_manifest = j.at("inputs").at("pair_manifest").get<std::string>();
    t.predictions_out = j.at("outputs").at("predictions").get<std::string>();
    t.embeddings_out = j.at("outputs").at("embeddings").get<std::string>();
  } catch (const json::exception& ex) {
    throw ContrastiveError(Kind::InvalidParam, std::string("malformed train job: ") + ex.what());
  }
  t.validate();
  return t;
}

}  // namespace molbench::contrastive
