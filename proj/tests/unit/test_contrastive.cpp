#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "fixtures.hpp"
#include "molbench/contrastive.hpp"
#include "molbench/depict.hpp"
#include "molbench/util/io.hpp"

using namespace molbench;
using namespace molbench::contrastive;
using Kind = ContrastiveError::Kind;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("molbench_contrastive_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<double> random_vector(util::Xoshiro256& rng, std::size_t d) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.unit() * 2.0 - 1.0;
  return v;
}

EmbeddingBatch random_batch(util::Xoshiro256& rng, std::size_t n, std::size_t d) {
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    a.push_back(random_vector(rng, d));
    b.push_back(random_vector(rng, d));
  }
  return EmbeddingBatch::from_pairs(a, b);
}

std::vector<dataset::MoleculeRecord> records_from(const std::vector<std::string>& smiles) {
  std::vector<dataset::MoleculeRecord> out;
  for (std::size_t i = 0; i < smiles.size(); ++i) {
    dataset::MoleculeRecord r;
    r.id = i;
    r.smiles = r.canonical = chem::write_canonical_smiles(chem::parse_smiles(smiles[i]));
    r.image_path = depict::image_relpath("fixture", r.canonical);
    out.push_back(r);
  }
  return out;
}

ContrastiveError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ContrastiveError& e) {
    return e.kind();
  }
  FAIL("expected ContrastiveError");
  return Kind::InvalidBatch;
}

}  // namespace

TEST_CASE("cosine similarity", "[contrastive]") {
  const std::vector<double> x{0.3, -1.2, 4.0};
  const std::vector<double> neg{-0.3, 1.2, -4.0};
  CHECK(cosine_sim(x, x) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_sim(x, neg) == Catch::Approx(-1.0).epsilon(1e-15));
  CHECK(cosine_sim(std::vector<double>{1, 0, 0}, std::vector<double>{0, 1, 0}) == 0.0);
  CHECK(kind_of([] { cosine_sim(std::vector<double>{0, 0}, std::vector<double>{1, 0}); }) == Kind::ZeroVector);
  CHECK(kind_of([] { cosine_sim(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}); }) == Kind::DimensionMismatch);
  CHECK(kind_of([] { cosine_sim(std::vector<double>{NAN, 0}, std::vector<double>{1, 0}); }) == Kind::NonFinite);
}

TEST_CASE("batch validation", "[contrastive]") {
  auto b = EmbeddingBatch::from_pairs({{3, 4}}, {{0, 2}});
  CHECK(b.vectors[0] == std::vector<double>{0.6, 0.8});
  CHECK(b.pair_of == std::vector<std::size_t>{1, 0});

  auto odd = b;
  odd.vectors.push_back({1, 0});
  odd.pair_of.push_back(0);
  CHECK(kind_of([&] { odd.validate(); }) == Kind::InvalidBatch);
  auto fixed = b;
  fixed.pair_of = {0, 1};
  CHECK(kind_of([&] { fixed.validate(); }) == Kind::InvalidBatch);
  auto loose = b;
  loose.vectors[1] = {0, 1.01};
  CHECK(kind_of([&] { loose.validate(); }) == Kind::InvalidBatch);
  CHECK(kind_of([] { EmbeddingBatch::from_pairs({{1, 0}}, {{1, 0, 0}}); }) == Kind::DimensionMismatch);
  CHECK(kind_of([] { EmbeddingBatch::from_pairs({}, {}); }) == Kind::InvalidBatch);
  CHECK(kind_of([&] { ntxent_loss(b, 0.0); }) == Kind::InvalidParam);
}

TEST_CASE("NT-Xent fixtures", "[contrastive]") {
  util::Xoshiro256 rng(5);
  for (int i = 0; i < 20; ++i) CHECK(ntxent_loss(random_batch(rng, 1, 1 + rng.below(8))) == 0.0);

  // a0=(1,0) b0=(0,1) a1=(-1,0) b1=(0,-1): every anchor sees its positive at
  // cosine 0, one negative at 0 and one at -1, so each term is log(2 + e^-2).
  const auto square = EmbeddingBatch::from_pairs({{1, 0}, {-1, 0}}, {{0, 1}, {0, -1}});
  CHECK(ntxent_loss(square, 0.5) == Catch::Approx(std::log(2.0 + std::exp(-2.0))).epsilon(1e-15));

  // as tau grows every similarity term tends to exp(0)
  for (std::size_t n : {2, 3, 5, 8}) {
    const auto batch = random_batch(rng, n, 6);
    CHECK(std::fabs(ntxent_loss(batch, 1e6) - std::log(2.0 * n - 1.0)) < 1e-3);
  }
}

TEST_CASE("NT-Xent agrees with the direct sum", "[contrastive]") {
  util::Xoshiro256 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const std::size_t d = 1 + rng.below(16);
    const double tau = 0.05 + rng.unit() * 2.0;
    const auto batch = random_batch(rng, n, d);
    const double got = ntxent_loss(batch, tau);
    REQUIRE(got >= 0.0);
    REQUIRE(std::fabs(got - testing::oracle_ntxent(batch.vectors, batch.pair_of, tau)) <= 1e-9);
  }
}

TEST_CASE("NT-Xent properties", "[contrastive]") {
  util::Xoshiro256 rng(13);
  int monotone_checks = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto batch = random_batch(rng, n, 8);
    const double base = ntxent_loss(batch);

    // permuting pairs (and swapping sides) leaves the value unchanged
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    util::shuffle(order, rng);
    std::vector<std::vector<double>> a, b;
    for (auto i : order) {
      a.push_back(batch.vectors[n + i]);
      b.push_back(batch.vectors[i]);
    }
    CHECK(std::fabs(ntxent_loss(EmbeddingBatch::from_pairs(a, b)) - base) <= 1e-9);

    // pulling b_0 halfway towards a_0 lowers the loss
    std::vector<std::vector<double>> a2, b2;
    for (std::size_t i = 0; i < n; ++i) {
      a2.push_back(batch.vectors[i]);
      b2.push_back(batch.vectors[n + i]);
    }
    if (cosine_sim(a2[0], b2[0]) > 0.999) continue;
    for (std::size_t t = 0; t < b2[0].size(); ++t) b2[0][t] = 0.5 * (b2[0][t] + a2[0][t]);
    // skip the rare case where the midpoint also moves towards a negative
    const auto moved = EmbeddingBatch::from_pairs(a2, b2);
    bool only_positive = true;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      if (k == 0 || k == n) continue;
      if (cosine_sim(moved.vectors[n], moved.vectors[k]) > cosine_sim(batch.vectors[n], batch.vectors[k]))
        only_positive = false;
    }
    if (!only_positive) continue;
    CHECK(ntxent_loss(moved) < base);
    ++monotone_checks;
  }
  CHECK(monotone_checks >= 10);
}

TEST_CASE("total loss", "[contrastive]") {
  CHECK(total_loss(1.0, 2.0, 0.5) == 2.0);
  CHECK(total_loss(0.75, 9.0, 0.0) == 0.75);
  CHECK(total_loss(0.75, 0.25) == 1.0);
  CHECK(kind_of([] { total_loss(1.0, 1.0, -0.1); }) == Kind::InvalidParam);
  CHECK(kind_of([] { total_loss(INFINITY, 1.0, 1.0); }) == Kind::NonFinite);
  CHECK(kind_of([] { LossParams{0.5, -1.0}.validate(); }) == Kind::InvalidParam);
}

TEST_CASE("Aug manifest", "[contrastive]") {
  const auto one = build_pair_manifest(records_from({"CCO"}), PairStrategy::Aug, 42);
  REQUIRE(one.entries.size() == 1);
  const auto& e = one.entries[0];
  CHECK(e.anchor == e.positive);
  CHECK(e.transforms.size() == 2);
  CHECK(e.transforms[0] != e.transforms[1]);
  for (const auto& t : e.transforms) CHECK(depict::parse_transform(t));
  CHECK_FALSE(e.score);

  const auto recs = records_from(testing::generate_molecules(100, 3));
  const auto dir = scratch("aug");
  write_pair_manifest(dir / "a.jsonl", build_pair_manifest(recs, PairStrategy::Aug, 7, 1));
  write_pair_manifest(dir / "b.jsonl", build_pair_manifest(recs, PairStrategy::Aug, 7, 8));
  write_pair_manifest(dir / "c.jsonl", build_pair_manifest(recs, PairStrategy::Aug, 8, 8));
  CHECK(util::read_file(dir / "a.jsonl") == util::read_file(dir / "b.jsonl"));
  CHECK(util::read_file(dir / "a.jsonl") != util::read_file(dir / "c.jsonl"));
  const auto back = read_pair_manifest(dir / "a.jsonl");
  CHECK(back.entries == build_pair_manifest(recs, PairStrategy::Aug, 7).entries);
  CHECK(back.seed == 7);

  // every transform shows up somewhere across 100 draws
  std::set<std::string> used;
  for (const auto& x : back.entries) used.insert(x.transforms.begin(), x.transforms.end());
  CHECK(used.size() == depict::augmentation_transforms().size());
}

TEST_CASE("T-Aug manifest", "[contrastive]") {
  const auto none = build_pair_manifest(records_from({"C", "O", "N", "S"}), PairStrategy::TAug, 1);
  CHECK(none.entries.empty());
  CHECK(none.skipped == std::vector<std::size_t>{0, 1, 2, 3});

  // methyl homologs of the first 30 molecules supply close pairs
  auto smiles = testing::generate_molecules(70, 21);
  for (std::size_t i = 0; i < 30; ++i) smiles.push_back("C" + smiles[i]);
  const auto recs = records_from(smiles);
  const auto got = build_pair_manifest(recs, PairStrategy::TAug, 1);

  std::vector<std::set<std::size_t>> bits;
  for (const auto& r : recs) bits.push_back(testing::bit_set(morgan_fingerprint(chem::parse_smiles(r.canonical))));
  std::vector<PairEntry> want;
  std::vector<std::size_t> want_skipped;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> hits;
    for (std::size_t j = 0; j < recs.size(); ++j) {
      if (j == i) continue;
      const double s = testing::oracle_tanimoto(bits[i], bits[j]);
      if (s > 0.85) hits.emplace_back(s, j);
    }
    std::sort(hits.begin(), hits.end(), [](auto& x, auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    if (hits.empty()) want_skipped.push_back(i);
    for (std::size_t h = 0; h < std::min<std::size_t>(3, hits.size()); ++h) {
      PairEntry e;
      e.strategy = PairStrategy::TAug;
      e.anchor = i;
      e.positive = hits[h].second;
      e.anchor_image = recs[i].image_path;
      e.positive_image = recs[hits[h].second].image_path;
      e.score = hits[h].first;
      e.seed = 1;
      want.push_back(e);
    }
  }
  REQUIRE(want.size() >= 10);
  CHECK(got.entries == want);
  CHECK(got.skipped == want_skipped);
  for (const auto& e : got.entries) CHECK(*e.score > 0.85);

  const auto dir = scratch("taug");
  write_pair_manifest(dir / "t.jsonl", got);
  CHECK(read_pair_manifest(dir / "t.jsonl").entries == got.entries);
}

TEST_CASE("manifest rows are validated", "[contrastive]") {
  PairEntry aug;
  aug.transforms = {"Rotate90", "FlipH"};
  CHECK(PairEntry::from_json(aug.to_json()) == aug);
  auto j = aug.to_json();
  j["transforms"] = {"Rotate90"};
  CHECK(kind_of([&] { PairEntry::from_json(j); }) == Kind::BadManifest);
  j["transforms"] = {"Rotate90", "Twirl"};
  CHECK(kind_of([&] { PairEntry::from_json(j); }) == Kind::BadManifest);

  PairEntry t;
  t.strategy = PairStrategy::TAug;
  t.positive = 1;
  t.score = 0.9;
  CHECK(PairEntry::from_json(t.to_json()) == t);
  t.score = 0.85;
  CHECK(kind_of([&] { PairEntry::from_json(t.to_json()); }) == Kind::BadManifest);
  CHECK(kind_of([] { PairEntry::from_json(nlohmann::json::object()); }) == Kind::BadManifest);
}

TEST_CASE("embedding export round trip", "[contrastive]") {
  const auto dir = scratch("emb");
  util::Xoshiro256 rng(31);
  EmbeddingTable table;
  for (int i = 0; i < 6; ++i) table["m" + std::to_string(i)] = random_vector(rng, 5);
  write_embeddings(dir / "e.jsonl", table);
  const auto back = read_embeddings(dir / "e.jsonl");
  CHECK(back == table);

  SavedBatch saved;
  saved.pairs = {{"m0", "m1"}, {"m2", "m3"}, {"m4", "m5"}};
  saved.tau = 0.5;
  const auto batch = saved.resolve(back);
  saved.logged_loss = ntxent_loss(batch, saved.tau);
  const auto again = SavedBatch::from_json(nlohmann::json::parse(saved.to_json().dump()));
  CHECK(again.pairs == saved.pairs);
  CHECK(std::fabs(ntxent_loss(again.resolve(back), again.tau) - *again.logged_loss) <= 1e-12);

  saved.pairs.push_back({"m0", "missing"});
  CHECK(kind_of([&] { saved.resolve(back); }) == Kind::InvalidBatch);

  util::write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1]}\n");
  CHECK(kind_of([&] { read_embeddings(dir / "bad.jsonl"); }) == Kind::DimensionMismatch);
}

TEST_CASE("train job file", "[contrastive]") {
  TrainJob job;
  job.dataset_manifest = "cur/manifest.jsonl";
  job.resolve_frozen();
  CHECK(job.frozen == std::vector<std::string>{"vision_encoder"});
  job.pair_manifest = "pairs.jsonl";
  job.resolve_frozen();
  CHECK(job.frozen.empty());
  job.lambda = 0.0;
  job.resolve_frozen();
  CHECK(job.frozen == std::vector<std::string>{"vision_encoder"});

  job.fraction = 0.6;
  const auto j = job.to_json();
  CHECK(j["schema_version"] == kTrainJobSchemaVersion);
  CHECK(j["lora"]["rank"] == 16);
  const auto back = TrainJob::from_json(j);
  CHECK(back.to_json() == j);

  for (double f : {0.0, -0.2, 1.01}) {
    auto bad = job;
    bad.fraction = f;
    CHECK(kind_of([&] { bad.validate(); }) == Kind::InvalidParam);
  }
  auto neg = job;
  neg.lambda = -1.0;
  CHECK(kind_of([&] { neg.validate(); }) == Kind::InvalidParam);
}
