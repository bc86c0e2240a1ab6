#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "molbench/chem/smiles.hpp"
#include "molbench/depict.hpp"
#include "internal.hpp"

namespace molbench::depict {

using chem::MolecularGraph;

bool Layout2D::contains(std::size_t atom) const { return std::find(atoms.begin(), atoms.end(), atom) != atoms.end(); }

namespace {

constexpr auto kNone = static_cast<std::size_t>(-1);
constexpr double kPi = std::numbers::pi;

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
double norm(Point a) { return std::hypot(a.x, a.y); }
Point unit(Point a) {
  const double n = norm(a);
  return n > 1e-12 ? a * (1.0 / n) : Point{1.0, 0.0};
}
Point polar(double angle) { return {std::cos(angle), std::sin(angle)}; }
double angle_of(Point a) { return std::atan2(a.y, a.x); }
Point rotate(Point a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {a.x * c - a.y * s, a.x * s + a.y * c};
}

Point centroid(const std::vector<Point>& pts) {
  Point c;
  for (const auto& p : pts) c = c + p;
  return pts.empty() ? c : c * (1.0 / static_cast<double>(pts.size()));
}

// ---------------------------------------------------------------- rings

using BondSet = std::vector<std::uint64_t>;

struct Candidate {
  std::vector<std::size_t> atoms;
  BondSet bonds;
};

// Shortest-path BFS tree restricted to ring bonds.
void bfs_tree(const MolecularGraph& g, const std::vector<bool>& ring_bond, std::size_t root,
              std::vector<std::size_t>& parent, std::vector<std::size_t>& parent_bond, std::vector<int>& depth) {
  const std::size_t n = g.atom_count();
  parent.assign(n, kNone);
  parent_bond.assign(n, kNone);
  depth.assign(n, -1);
  std::deque<std::size_t> q{root};
  depth[root] = 0;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop_front();
    for (const auto& nb : g.neighbors(u)) {
      if (!ring_bond[nb.bond] || depth[nb.atom] >= 0) continue;
      depth[nb.atom] = depth[u] + 1;
      parent[nb.atom] = u;
      parent_bond[nb.atom] = nb.bond;
      q.push_back(nb.atom);
    }
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> smallest_rings(const MolecularGraph& g) {
  const std::size_t n = g.atom_count();
  const std::size_t m = g.bond_count();
  const auto bridges = chem::find_bridges(n, g.bonds());
  std::vector<bool> ring_bond(m);
  std::size_t ring_bonds = 0;
  std::set<std::size_t> ring_atoms;
  for (std::size_t b = 0; b < m; ++b) {
    ring_bond[b] = !bridges[b];
    if (ring_bond[b]) {
      ++ring_bonds;
      ring_atoms.insert(g.bond(b).begin);
      ring_atoms.insert(g.bond(b).end);
    }
  }
  if (ring_bonds == 0) return {};

  // Components of the ring-bond subgraph for the cyclomatic number.
  std::map<std::size_t, std::size_t> comp;
  std::size_t comps = 0;
  for (auto s : ring_atoms) {
    if (comp.count(s)) continue;
    std::vector<std::size_t> stack{s};
    comp[s] = comps;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (const auto& nb : g.neighbors(u)) {
        if (ring_bond[nb.bond] && !comp.count(nb.atom)) {
          comp[nb.atom] = comps;
          stack.push_back(nb.atom);
        }
      }
    }
    ++comps;
  }
  const std::size_t cyclomatic = ring_bonds - ring_atoms.size() + comps;
  const std::size_t words = (m + 63) / 64;

  // Horton candidates: for each root and each non-tree ring bond (x, y), the
  // cycle root..x + (x,y) + y..root when the two tree paths only share the root.
  std::vector<Candidate> cands;
  std::set<BondSet> seen;
  std::vector<std::size_t> parent, parent_bond;
  std::vector<int> depth;
  for (auto r : ring_atoms) {
    bfs_tree(g, ring_bond, r, parent, parent_bond, depth);
    for (std::size_t b = 0; b < m; ++b) {
      if (!ring_bond[b]) continue;
      const auto x = g.bond(b).begin, y = g.bond(b).end;
      if (depth[x] < 0 || depth[y] < 0 || parent_bond[x] == b || parent_bond[y] == b) continue;
      std::vector<std::size_t> px, py;
      for (auto u = x; u != kNone; u = parent[u]) px.push_back(u);
      for (auto u = y; u != kNone; u = parent[u]) py.push_back(u);
      std::set<std::size_t> sx(px.begin(), px.end());
      std::size_t shared = 0;
      for (auto u : py) shared += sx.count(u);
      if (shared != 1) continue;
      Candidate c;
      c.bonds.assign(words, 0);
      auto mark = [&](std::size_t bond) { c.bonds[bond / 64] |= std::uint64_t{1} << (bond % 64); };
      mark(b);
      for (auto u = x; parent[u] != kNone; u = parent[u]) mark(parent_bond[u]);
      for (auto u = y; parent[u] != kNone; u = parent[u]) mark(parent_bond[u]);
      if (!seen.insert(c.bonds).second) continue;
      // Ring order: root .. x then y .. (excluding root).
      c.atoms.assign(px.rbegin(), px.rend());
      for (std::size_t i = 0; i + 1 < py.size(); ++i) c.atoms.push_back(py[i]);
      cands.push_back(std::move(c));
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.atoms.size() != b.atoms.size()) return a.atoms.size() < b.atoms.size();
    auto sa = a.atoms, sb = b.atoms;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return sa < sb;
  });

  // Greedy GF(2) independence.
  std::vector<BondSet> basis;
  std::vector<std::size_t> pivots;
  std::vector<std::vector<std::size_t>> rings;
  for (auto& c : cands) {
    if (rings.size() == cyclomatic) break;
    BondSet v = c.bonds;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if ((v[pivots[i] / 64] >> (pivots[i] % 64)) & 1U) {
        for (std::size_t w = 0; w < words; ++w) v[w] ^= basis[i][w];
      }
    }
    std::size_t pivot = kNone;
    for (std::size_t w = 0; w < words && pivot == kNone; ++w) {
      if (v[w]) pivot = w * 64 + static_cast<std::size_t>(std::countr_zero(v[w]));
    }
    if (pivot == kNone) continue;
    basis.push_back(v);
    pivots.push_back(pivot);
    rings.push_back(c.atoms);
  }
  return rings;
}

namespace {

// Places `count` atoms on a circular arc from p to q with unit spacing, bulging
// away from `away`. Falls back to a straight line when the chord is too long.
std::vector<Point> arc_between(Point p, Point q, std::size_t count, Point away) {
  std::vector<Point> out;
  const double segments = static_cast<double>(count + 1);
  const Point chord = q - p;
  const double c = norm(chord);
  if (c >= segments - 1e-9 || c < 1e-9) {
    for (std::size_t i = 1; i <= count; ++i) out.push_back(p + chord * (static_cast<double>(i) / segments));
    return out;
  }
  // chord(theta) = sin(segments*theta/2) / sin(theta/2), decreasing on (0, 2pi/segments).
  double lo = 1e-9, hi = 2 * kPi / segments;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double len = std::sin(segments * mid / 2) / std::sin(mid / 2);
    (len > c ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  const double radius = 1.0 / (2 * std::sin(theta / 2));
  const double total = segments * theta;
  const Point mid = (p + q) * 0.5;
  Point normal = unit(Point{-chord.y, chord.x});
  if ((normal.x * (mid.x - away.x) + normal.y * (mid.y - away.y)) < 0) normal = normal * -1.0;
  const Point center = mid - normal * (radius * std::cos(total / 2));
  const double start = angle_of(p - center);
  // Step in whichever direction keeps the arc on the bulge side.
  const Point apex = center + normal * radius;
  const double mid_step = total / 2;
  const double sign =
      norm(center + polar(start + mid_step) * radius - apex) <= norm(center + polar(start - mid_step) * radius - apex) ? 1.0
                                                                                                                        : -1.0;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(center + polar(start + sign * theta * static_cast<double>(i)) * radius);
  return out;
}

class LayoutBuilder {
 public:
  explicit LayoutBuilder(const MolecularGraph& g) : g_(g) {}

  Layout2D run() {
    Layout2D out;
    const std::size_t n = g_.atom_count();
    out.coords.assign(n, Point{});
    if (n == 0) return out;
    order_ = chem::canonical_order(g_);

    // Largest fragment; ties go to the fragment holding the lowest canonical atom.
    const auto comp = g_.components();
    const std::size_t ncomp = *std::max_element(comp.begin(), comp.end()) + 1;
    std::vector<std::size_t> size(ncomp, 0), best_rank(ncomp, kNone);
    for (std::size_t i = 0; i < n; ++i) {
      ++size[comp[i]];
      best_rank[comp[i]] = std::min(best_rank[comp[i]], order_[i]);
    }
    std::size_t chosen = 0;
    for (std::size_t c = 1; c < ncomp; ++c) {
      if (size[c] > size[chosen] || (size[c] == size[chosen] && best_rank[c] < best_rank[chosen])) chosen = c;
    }
    if (ncomp > 1) {
      out.diagnostics.push_back("disconnected graph: drew largest fragment (" + std::to_string(size[chosen]) + " of " +
                                std::to_string(n) + " atoms)");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (comp[i] == chosen) out.atoms.push_back(i);
    }
    std::sort(out.atoms.begin(), out.atoms.end(), [&](auto a, auto b) { return order_[a] < order_[b]; });
    in_fragment_.assign(n, false);
    for (auto a : out.atoms) in_fragment_[a] = true;

    pos_.assign(n, Point{});
    placed_.assign(n, false);
    turn_.assign(n, 1);
    build_ring_systems();
    place_all(out.atoms);
    relax(out.atoms);

    for (auto a : out.atoms) {
      if (!std::isfinite(pos_[a].x) || !std::isfinite(pos_[a].y)) {
        throw DepictError(DepictError::Kind::LayoutFailure, "non-finite coordinate for atom " + std::to_string(a));
      }
      out.coords[a] = pos_[a];
    }
    out.close_contacts = count_contacts(out.atoms, 0.3);
    if (out.close_contacts > 0) {
      out.diagnostics.push_back(std::to_string(out.close_contacts) + " non-bonded contacts closer than 0.3");
    }
    return out;
  }

 private:
  struct RingSystem {
    std::vector<std::size_t> atoms;  // canonical order
    std::map<std::size_t, Point> local;
  };

  void build_ring_systems() {
    const auto rings = smallest_rings(g_);
    const std::size_t n = g_.atom_count();
    system_of_.assign(n, kNone);
    // Union rings that share an atom.
    std::vector<std::size_t> parent(rings.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<std::size_t> owner(n, kNone);
    for (std::size_t r = 0; r < rings.size(); ++r) {
      for (auto a : rings[r]) {
        if (owner[a] == kNone) {
          owner[a] = r;
        } else {
          parent[find(r)] = find(owner[a]);
        }
      }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < rings.size(); ++r) groups[find(r)].push_back(r);
    for (const auto& [root, members] : groups) {
      if (!in_fragment_[rings[members.front()].front()]) continue;
      RingSystem sys;
      std::vector<std::vector<std::size_t>> rs;
      for (auto r : members) rs.push_back(rings[r]);
      place_system(rs, sys);
      for (const auto& [a, p] : sys.local) {
        sys.atoms.push_back(a);
        system_of_[a] = systems_.size();
      }
      std::sort(sys.atoms.begin(), sys.atoms.end(), [&](auto a, auto b) { return order_[a] < order_[b]; });
      systems_.push_back(std::move(sys));
    }
  }

  void place_system(const std::vector<std::vector<std::size_t>>& rings, RingSystem& sys) {
    auto& local = sys.local;
    std::vector<bool> done(rings.size(), false);
    // First ring: a regular polygon, pointy side up, starting from its lowest canonical atom.
    {
      auto ring = rings[0];
      const std::size_t k = ring.size();
      const double radius = 1.0 / (2 * std::sin(kPi / static_cast<double>(k)));
      for (std::size_t i = 0; i < k; ++i) {
        local[ring[i]] = polar(kPi / 2 + 2 * kPi * static_cast<double>(i) / static_cast<double>(k)) * radius;
      }
      done[0] = true;
    }
    while (true) {
      std::size_t next = kNone, best = 0;
      for (std::size_t r = 0; r < rings.size(); ++r) {
        if (done[r]) continue;
        std::size_t cnt = 0;
        for (auto a : rings[r]) cnt += local.count(a);
        if (cnt > best) {
          best = cnt;
          next = r;
        }
      }
      if (next == kNone) break;
      done[next] = true;
      const auto& ring = rings[next];
      const std::size_t k = ring.size();
      std::vector<Point> placed_pts;
      for (const auto& [a, p] : local) placed_pts.push_back(p);
      const Point sys_center = centroid(placed_pts);
      if (best == k) continue;
      if (best == 1) {
        std::size_t at = 0;
        while (!local.count(ring[at])) ++at;
        const Point a = local[ring[at]];
        const double radius = 1.0 / (2 * std::sin(kPi / static_cast<double>(k)));
        const Point center = a + unit(a - sys_center) * radius;
        const double start = angle_of(a - center);
        for (std::size_t s = 1; s < k; ++s) {
          local[ring[(at + s) % k]] = center + polar(start + 2 * kPi * static_cast<double>(s) / static_cast<double>(k)) * radius;
        }
        continue;
      }
      // Fill each run of unplaced atoms between two placed ones.
      std::size_t start = 0;
      while (!local.count(ring[start])) ++start;
      std::size_t i = 0;
      while (i < k) {
        const std::size_t idx = (start + i) % k;
        if (local.count(ring[idx])) {
          ++i;
          continue;
        }
        const std::size_t before = ring[(start + i + k - 1) % k];
        std::vector<std::size_t> run;
        while (i < k && !local.count(ring[(start + i) % k])) {
          run.push_back(ring[(start + i) % k]);
          ++i;
        }
        const std::size_t after = ring[(start + i) % k];
        // Bulge away from already placed rings holding both ends, if any.
        std::vector<Point> ref;
        for (std::size_t r = 0; r < rings.size(); ++r) {
          if (!done[r] || r == next) continue;
          const auto& o = rings[r];
          if (std::find(o.begin(), o.end(), before) != o.end() && std::find(o.begin(), o.end(), after) != o.end()) {
            for (auto a : o) {
              if (local.count(a)) ref.push_back(local[a]);
            }
          }
        }
        const Point away = ref.empty() ? sys_center : centroid(ref);
        const auto pts = arc_between(local[before], local[after], run.size(), away);
        for (std::size_t j = 0; j < run.size(); ++j) local[run[j]] = pts[j];
      }
    }
  }

  std::vector<std::size_t> sorted_neighbors(std::size_t u) const {
    std::vector<std::size_t> out;
    for (const auto& nb : g_.neighbors(u)) out.push_back(nb.atom);
    std::sort(out.begin(), out.end(), [&](auto a, auto b) { return order_[a] < order_[b]; });
    return out;
  }

  void place_system_at(std::size_t sys_index, std::size_t entry, Point at, Point dir, std::deque<std::size_t>& queue) {
    auto& sys = systems_[sys_index];
    std::vector<Point> pts;
    for (const auto& [a, p] : sys.local) pts.push_back(p);
    const Point c = centroid(pts);
    const Point e = sys.local.at(entry);
    const double rot = angle_of(dir) - angle_of(c - e);
    for (auto a : sys.atoms) {
      pos_[a] = at + rotate(sys.local.at(a) - e, rot);
      placed_[a] = true;
      queue.push_back(a);
    }
  }

  void place_atom(std::size_t v, Point at, Point dir, int turn, std::deque<std::size_t>& queue) {
    if (system_of_[v] != kNone) {
      place_system_at(system_of_[v], v, at, dir, queue);
      return;
    }
    pos_[v] = at;
    placed_[v] = true;
    turn_[v] = turn;
    queue.push_back(v);
  }

  bool linear_center(std::size_t u) const {
    int doubles = 0;
    for (const auto& nb : g_.neighbors(u)) {
      const auto o = g_.bond(nb.bond).order;
      if (o == chem::BondOrder::Triple) return true;
      doubles += o == chem::BondOrder::Double;
    }
    return doubles >= 2;
  }

  void place_all(const std::vector<std::size_t>& atoms) {
    std::deque<std::size_t> queue;
    // Seed with the largest ring system, else the first atom in canonical order.
    std::size_t seed_sys = kNone;
    for (std::size_t s = 0; s < systems_.size(); ++s) {
      if (seed_sys == kNone || systems_[s].atoms.size() > systems_[seed_sys].atoms.size()) seed_sys = s;
    }
    if (seed_sys != kNone) {
      for (auto a : systems_[seed_sys].atoms) {
        pos_[a] = systems_[seed_sys].local.at(a);
        placed_[a] = true;
        queue.push_back(a);
      }
    } else {
      pos_[atoms.front()] = Point{0, 0};
      placed_[atoms.front()] = true;
      queue.push_back(atoms.front());
    }

    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      std::vector<std::size_t> todo, done;
      for (auto v : sorted_neighbors(u)) (placed_[v] ? done : todo).push_back(v);
      if (todo.empty()) continue;
      const std::size_t k = todo.size();

      if (system_of_[u] != kNone) {
        Point out;
        for (auto w : done) {
          if (system_of_[w] == system_of_[u]) out = out + unit(pos_[u] - pos_[w]);
        }
        if (norm(out) < 1e-6) {
          std::vector<Point> pts;
          for (auto a : systems_[system_of_[u]].atoms) pts.push_back(pos_[a]);
          out = pos_[u] - centroid(pts);
        }
        const double base = angle_of(out);
        const double spread = k == 1 ? 0.0 : (k == 2 ? kPi / 6 : kPi / 3);
        for (std::size_t i = 0; i < k; ++i) {
          const double a = k == 1 ? base : base - spread + 2 * spread * static_cast<double>(i) / static_cast<double>(k - 1);
          place_atom(todo[i], pos_[u] + polar(a), polar(a), 1, queue);
        }
        continue;
      }

      if (done.empty()) {
        const double step = 2 * kPi / static_cast<double>(std::max<std::size_t>(k, 3));
        for (std::size_t i = 0; i < k; ++i) {
          const double a = -kPi / 6 + step * static_cast<double>(i);
          place_atom(todo[i], pos_[u] + polar(a), polar(a), 1, queue);
        }
        continue;
      }

      const Point back = unit(pos_[done.front()] - pos_[u]);
      if (k == 1 && done.size() == 1) {
        Point dir;
        int turn = -turn_[u];
        if (linear_center(u)) {
          dir = back * -1.0;
          turn = turn_[u];
        } else {
          // Of the two 120 degree options keep the roomier one (trans zigzag);
          // the alternating turn flag decides ties.
          const Point preferred = rotate(back * -1.0, (kPi / 3) * turn_[u]);
          const Point other = rotate(back * -1.0, -(kPi / 3) * turn_[u]);
          dir = preferred;
          if (clearance(pos_[u] + other, u) > clearance(pos_[u] + preferred, u) + 1e-6) {
            dir = other;
            turn = turn_[u];
          }
        }
        place_atom(todo[0], pos_[u] + dir, dir, turn, queue);
        continue;
      }
      // Spread the free neighbours evenly over the largest angular gap.
      std::vector<double> taken;
      for (auto w : done) taken.push_back(angle_of(pos_[w] - pos_[u]));
      std::sort(taken.begin(), taken.end());
      double gap_start = taken.back(), gap = 2 * kPi;
      if (taken.size() > 1) {
        gap = 0;
        for (std::size_t i = 0; i < taken.size(); ++i) {
          const double a = taken[i];
          const double b = i + 1 < taken.size() ? taken[i + 1] : taken[0] + 2 * kPi;
          if (b - a > gap + 1e-9) {
            gap = b - a;
            gap_start = a;
          }
        }
      }
      // Largest branch takes the roomiest slot so the backbone keeps zigzagging.
      std::vector<double> slots;
      for (std::size_t i = 0; i < k; ++i) slots.push_back(gap_start + gap * static_cast<double>(i + 1) / static_cast<double>(k + 1));
      std::vector<double> room;
      for (double a : slots) room.push_back(clearance(pos_[u] + polar(a), u));
      std::vector<std::size_t> slot_order(k);
      std::iota(slot_order.begin(), slot_order.end(), 0);
      std::stable_sort(slot_order.begin(), slot_order.end(), [&](auto a, auto b) { return room[a] > room[b] + 1e-6; });
      std::vector<std::size_t> sizes;
      for (auto v : todo) sizes.push_back(branch_size(v, u));
      std::vector<std::size_t> child_order(k);
      std::iota(child_order.begin(), child_order.end(), 0);
      std::stable_sort(child_order.begin(), child_order.end(), [&](auto a, auto b) { return sizes[a] > sizes[b]; });
      for (std::size_t i = 0; i < k; ++i) {
        const double a = slots[slot_order[i]];
        place_atom(todo[child_order[i]], pos_[u] + polar(a), polar(a), -turn_[u], queue);
      }
    }
  }

  // Unplaced atoms reachable from v without passing through `from`.
  std::size_t branch_size(std::size_t v, std::size_t from) const {
    std::vector<bool> seen(pos_.size(), false);
    seen[from] = seen[v] = true;
    std::vector<std::size_t> stack{v};
    std::size_t n = 0;
    while (!stack.empty()) {
      const auto a = stack.back();
      stack.pop_back();
      ++n;
      for (const auto& nb : g_.neighbors(a)) {
        if (seen[nb.atom] || placed_[nb.atom]) continue;
        seen[nb.atom] = true;
        stack.push_back(nb.atom);
      }
    }
    return n;
  }

  // Distance from p to the nearest placed atom other than `skip`.
  double clearance(Point p, std::size_t skip) const {
    double best = std::numeric_limits<double>::max();
    for (std::size_t a = 0; a < pos_.size(); ++a) {
      if (placed_[a] && a != skip) best = std::min(best, norm(pos_[a] - p));
    }
    return best;
  }

  bool bonded(std::size_t a, std::size_t b) const { return g_.bond_between(a, b).has_value(); }

  std::size_t count_contacts(const std::vector<std::size_t>& atoms, double limit) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      for (std::size_t j = i + 1; j < atoms.size(); ++j) {
        if (!bonded(atoms[i], atoms[j]) && norm(pos_[atoms[i]] - pos_[atoms[j]]) < limit) ++n;
      }
    }
    return n;
  }

  // Runs only when some non-bonded pair is closer than half a bond. Pairs are
  // visited in canonical order, so the result is fixed for a given graph.
  void relax(const std::vector<std::size_t>& atoms) {
    if (count_contacts(atoms, 0.5) == 0) return;
    constexpr int kIterations = 200;
    constexpr double kClear = 0.8;
    for (int it = 0; it < kIterations; ++it) {
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
          const auto a = atoms[i], b = atoms[j];
          Point d = pos_[b] - pos_[a];
          double len = norm(d);
          if (len < 1e-9) {
            // Coincident atoms: separate along a direction fixed by their ranks.
            d = polar(static_cast<double>(order_[a] + 2 * order_[b]));
            len = 0.0;
          }
          const Point u = len > 0.0 ? d * (1.0 / len) : d;
          if (bonded(a, b)) {
            const double shift = 0.25 * (len - 1.0);
            pos_[a] = pos_[a] + u * shift;
            pos_[b] = pos_[b] - u * shift;
          } else if (len < kClear) {
            const double shift = 0.25 * (kClear - len);
            pos_[a] = pos_[a] - u * shift;
            pos_[b] = pos_[b] + u * shift;
          }
        }
      }
    }
  }

  const MolecularGraph& g_;
  std::vector<std::size_t> order_;
  std::vector<bool> in_fragment_;
  std::vector<Point> pos_;
  std::vector<bool> placed_;
  std::vector<int> turn_;
  std::vector<std::size_t> system_of_;
  std::vector<RingSystem> systems_;
};

}  // namespace

namespace detail {

MolecularGraph canonical_copy(const MolecularGraph& graph, const std::vector<std::size_t>& rank) {
  std::vector<chem::Atom> atoms(graph.atom_count());
  for (std::size_t i = 0; i < graph.atom_count(); ++i) atoms[rank[i]] = graph.atom(i);
  std::vector<chem::Bond> bonds;
  bonds.reserve(graph.bond_count());
  for (const auto& b : graph.bonds()) {
    chem::Bond nb = b;
    nb.begin = std::min(rank[b.begin], rank[b.end]);
    nb.end = std::max(rank[b.begin], rank[b.end]);
    bonds.push_back(nb);
  }
  std::sort(bonds.begin(), bonds.end(), [](const chem::Bond& a, const chem::Bond& b) {
    return std::pair(a.begin, a.end) < std::pair(b.begin, b.end);
  });
  return MolecularGraph::build(std::move(atoms), std::move(bonds), graph.source_text());
}

}  // namespace detail

Layout2D layout_2d(const MolecularGraph& graph) {
  if (graph.empty()) return {};
  const auto rank = chem::canonical_order(graph);
  const Layout2D canon = LayoutBuilder(detail::canonical_copy(graph, rank)).run();
  std::vector<std::size_t> original(rank.size());
  for (std::size_t i = 0; i < rank.size(); ++i) original[rank[i]] = i;
  Layout2D out;
  out.coords.resize(graph.atom_count());
  for (auto c : canon.atoms) out.atoms.push_back(original[c]);
  for (std::size_t i = 0; i < graph.atom_count(); ++i) out.coords[i] = canon.coords[rank[i]];
  out.diagnostics = canon.diagnostics;
  out.close_contacts = canon.close_contacts;
  return out;
}

}  // namespace molbench::depict
