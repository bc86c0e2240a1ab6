#include "molbench/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include "molbench/util/hash.hpp"

namespace molbench {

Fingerprint::Fingerprint(std::size_t width, int radius, MoleculeId id)
    : width_(width), radius_(radius), id_(id), words_((width + 63) / 64, 0) {}

std::size_t Fingerprint::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Fingerprint morgan_fingerprint(const chem::MolecularGraph& g, int radius, std::size_t width, MoleculeId id) {
  if (width == 0) throw std::invalid_argument("fingerprint width must be positive");
  Fingerprint fp(width, radius, id);
  const std::size_t n = g.atom_count();
  std::vector<std::uint64_t> ids(n), next(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = g.atom(i);
    ids[i] = util::Fnv1a64()
                 .i32(a.atomic_number)
                 .i32(a.formal_charge)
                 .i32(static_cast<std::int32_t>(g.degree(i)))
                 .i32(a.hydrogen_count())
                 .i32(a.ring_member ? 1 : 0)
                 .value();
    fp.set(ids[i] % width);
  }
  std::vector<std::pair<std::int32_t, std::uint64_t>> env;
  for (int r = 1; r <= radius; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      env.clear();
      for (const auto& nb : g.neighbors(i)) {
        env.emplace_back(static_cast<std::int32_t>(g.bond(nb.bond).order), ids[nb.atom]);
      }
      std::sort(env.begin(), env.end());
      util::Fnv1a64 h;
      h.i32(r).u64(ids[i]);
      for (const auto& [code, nid] : env) h.i32(code).u64(nid);
      next[i] = h.value();
      fp.set(next[i] % width);
    }
    ids.swap(next);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.width() != b.width()) {
    throw FingerprintError(FingerprintError::Kind::WidthMismatch,
                           "fingerprint widths differ: " + std::to_string(a.width()) + " vs " + std::to_string(b.width()));
  }
  const auto& wa = a.words();
  const auto& wb = b.words();
  std::uint64_t both = 0, either = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    both += static_cast<std::uint64_t>(std::popcount(wa[i] & wb[i]));
    either += static_cast<std::uint64_t>(std::popcount(wa[i] | wb[i]));
  }
  if (either == 0) return 0.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

bool SimilarityIndex::add(const Fingerprint& fp, const std::string& canonical) {
  if (fp.width() != width_) {
    throw FingerprintError(FingerprintError::Kind::WidthMismatch, "fingerprint width does not match the index");
  }
  if (ids_.count(fp.source_id().value)) {
    throw FingerprintError(FingerprintError::Kind::DuplicateId, "duplicate id " + std::to_string(fp.source_id().value));
  }
  if (!canonical.empty() && !canonical_.insert(canonical).second) return false;
  ids_.insert(fp.source_id().value);
  entries_.push_back(fp);
  return true;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  std::uint64_t take(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > data_.size()) {
      throw FingerprintError(FingerprintError::Kind::BadIndexFile, "index file truncated");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::string_view raw(std::size_t n) {
    if (pos_ + n > data_.size()) throw FingerprintError(FingerprintError::Kind::BadIndexFile, "index file truncated");
    auto v = std::string_view(data_).substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void SimilarityIndex::save(const std::filesystem::path& path) const {
  std::string out = "MBFP";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(width_));
  put_u32(out, static_cast<std::uint32_t>(radius_));
  put_u64(out, entries_.size());
  for (const auto& e : entries_) {
    put_u64(out, e.source_id().value);
    for (auto w : e.words()) put_u64(out, w);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

SimilarityIndex SimilarityIndex::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FingerprintError(FingerprintError::Kind::BadIndexFile, "cannot open " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(f), {}));
  if (r.raw(4) != "MBFP") throw FingerprintError(FingerprintError::Kind::BadIndexFile, "bad magic");
  if (r.take(4) != 1) throw FingerprintError(FingerprintError::Kind::BadIndexFile, "unsupported index version");
  const auto width = static_cast<std::size_t>(r.take(4));
  const auto radius = static_cast<int>(r.take(4));
  const auto count = r.take(8);
  SimilarityIndex index(width, radius);
  for (std::uint64_t i = 0; i < count; ++i) {
    Fingerprint fp(width, radius, MoleculeId{r.take(8)});
    for (auto& w : fp.words()) w = r.take(8);
    index.add(fp);
  }
  if (!r.done()) throw FingerprintError(FingerprintError::Kind::BadIndexFile, "trailing bytes in index file");
  return index;
}

namespace {

bool ranks_before(const Neighbor& a, const Neighbor& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

}  // namespace

std::vector<Neighbor> top_k_similar(const Fingerprint& query, const SimilarityIndex& index, std::size_t k) {
  if (k == 0) return {};
  std::vector<Neighbor> all;
  all.reserve(index.size());
  for (const auto& e : index.entries()) {
    if (e.source_id() == query.source_id()) continue;
    all.push_back({e.source_id(), tanimoto(query, e)});
  }
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), ranks_before);
  all.resize(keep);
  return all;
}

std::string to_string(PairStrategy s) { return s == PairStrategy::Aug ? "Aug" : "T-Aug"; }

MiningResult mine_tanimoto_positives(const SimilarityIndex& index, double threshold, std::size_t m) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in (0, 1]");
  MiningResult result;
  const auto& entries = index.entries();
  std::vector<Neighbor> hits;
  for (std::size_t a = 0; a < entries.size(); ++a) {
    hits.clear();
    for (std::size_t b = 0; b < entries.size(); ++b) {
      if (a == b) continue;
      const double s = tanimoto(entries[a], entries[b]);
      if (s > threshold) hits.push_back({entries[b].source_id(), s});
    }
    if (hits.empty()) {
      result.skipped.push_back(entries[a].source_id());
      continue;
    }
    const std::size_t keep = std::min(m, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), ranks_before);
    for (std::size_t i = 0; i < keep; ++i) {
      result.pairs.push_back({entries[a].source_id(), hits[i].id, hits[i].score, PairStrategy::TAug});
    }
  }
  return result;
}

}  // namespace molbench
