#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "proxyprints/minutiae.hpp"

namespace proxyprints {

// Non-negative integer similarity score. Calibrated so that scores above 40
// indicate a true match and genuine self-matches of full templates land in
// the hundreds.
struct MatchScore {
  int value = 0;
};

inline constexpr int kMatchThreshold = 40;

inline bool decide(MatchScore s, int threshold = kMatchThreshold) {
  return s.value > threshold;
}

namespace detail {

// Matching model: a correspondence set {a_i -> b_i} (injective) is consistent
// when every two correspondences agree on the inter-minutia distance and on
// both angles between each minutia direction and the connecting segment.
// These features are invariant under rigid motion, so the cluster search is
// rotation/translation invariant by construction. The score is the largest
// consistent cluster, scaled by 3.

inline constexpr double kDistTol = 8.0;                     // pixels
inline constexpr double kAngleTol = 11.25 * kPi / 180.0;    // radians
inline constexpr int kScoreScale = 3;
inline constexpr std::size_t kMatcherMinutiaCap = 160;      // per template
inline constexpr std::size_t kMaxSeeds = 800;
inline constexpr std::size_t kExactCliqueLimit = 64;        // vertices

struct PairEntry {
  double d;      // inter-minutia distance
  double beta1;  // segment angle relative to minutia i direction
  double beta2;  // segment angle relative to minutia j direction
  int i, j;
};

struct MatchView {
  std::vector<double> x, y, ang;
};

inline MatchView make_view(const Template& t) {
  // quality-capped view; full templates in this pipeline stay well below the cap
  std::vector<int> order(t.minutiae.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  if (t.minutiae.size() > kMatcherMinutiaCap) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return t.minutiae[a].quality > t.minutiae[b].quality;
    });
    order.resize(kMatcherMinutiaCap);
    std::sort(order.begin(), order.end());
  }
  MatchView v;
  for (int idx : order) {
    v.x.push_back(t.minutiae[idx].x);
    v.y.push_back(t.minutiae[idx].y);
    v.ang.push_back(t.minutiae[idx].angle);
  }
  return v;
}

inline std::vector<PairEntry> build_pair_table(const MatchView& v) {
  std::vector<PairEntry> table;
  const int n = int(v.x.size());
  table.reserve(std::size_t(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double dx = v.x[j] - v.x[i], dy = v.y[j] - v.y[i];
      double d = std::hypot(dx, dy);
      if (d < 1.0) continue;
      double seg = std::atan2(dy, dx);
      table.push_back({d, wrap_pi(seg - v.ang[i]), wrap_pi(seg - v.ang[j]), i, j});
    }
  std::stable_sort(table.begin(), table.end(),
                   [](const PairEntry& a, const PairEntry& b) { return a.d < b.d; });
  return table;
}

// full pairwise-consistency test between two correspondences
inline bool correspondences_compatible(const MatchView& a, const MatchView& b, int a1, int b1,
                                       int a2, int b2) {
  if (a1 == a2 || b1 == b2) return false;
  double dax = a.x[a2] - a.x[a1], day = a.y[a2] - a.y[a1];
  double dbx = b.x[b2] - b.x[b1], dby = b.y[b2] - b.y[b1];
  double da = std::hypot(dax, day), db = std::hypot(dbx, dby);
  if (std::abs(da - db) > kDistTol) return false;
  double sa = std::atan2(day, dax), sb = std::atan2(dby, dbx);
  if (std::abs(wrap_pi((sa - a.ang[a1]) - (sb - b.ang[b1]))) > kAngleTol) return false;
  if (std::abs(wrap_pi((sa - a.ang[a2]) - (sb - b.ang[b2]))) > kAngleTol) return false;
  return true;
}

struct CorrespondenceGraph {
  // vertex v = candidate correspondence (a_idx[v] -> b_idx[v]), sorted by (a,b)
  std::vector<int> a_idx, b_idx;
  std::vector<std::pair<int, int>> seeds;  // vertex-id pairs, generation order
};

inline CorrespondenceGraph build_graph(const MatchView& a, const MatchView& b) {
  auto ta = build_pair_table(a);
  auto tb = build_pair_table(b);

  // distance-window sweep over the two sorted tables
  std::vector<std::pair<int, int>> raw_seeds;  // (a_minutia*nb+b_minutia) pairs, see below
  std::vector<std::uint64_t> seed_keys;
  const int nb = int(b.x.size());
  auto key = [&](int ai, int bi) { return std::uint64_t(ai) * nb + bi; };

  std::unordered_map<std::uint64_t, int> vertex_of;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> seed_list;

  std::size_t lo = 0;
  for (const auto& pa : ta) {
    while (lo < tb.size() && tb[lo].d < pa.d - kDistTol) ++lo;
    for (std::size_t k = lo; k < tb.size() && tb[k].d <= pa.d + kDistTol; ++k) {
      const auto& pb = tb[k];
      // direct orientation: (i->i, j->j)
      if (std::abs(wrap_pi(pa.beta1 - pb.beta1)) <= kAngleTol &&
          std::abs(wrap_pi(pa.beta2 - pb.beta2)) <= kAngleTol)
        seed_list.push_back({key(pa.i, pb.i), key(pa.j, pb.j)});
      // reversed orientation: (i->j, j->i); the segment flips by pi on one side
      if (std::abs(wrap_pi(pa.beta1 - wrap_pi(pb.beta2 + kPi))) <= kAngleTol &&
          std::abs(wrap_pi(pa.beta2 - wrap_pi(pb.beta1 + kPi))) <= kAngleTol)
        seed_list.push_back({key(pa.i, pb.j), key(pa.j, pb.i)});
      if (seed_list.size() >= 4 * kMaxSeeds) break;
    }
    if (seed_list.size() >= 4 * kMaxSeeds) break;
  }

  CorrespondenceGraph g;
  for (const auto& [k1, k2] : seed_list) {
    for (auto k : {k1, k2})
      if (!vertex_of.count(k)) {
        vertex_of.emplace(k, 0);
      }
  }
  // canonical vertex order
  std::vector<std::uint64_t> keys;
  keys.reserve(vertex_of.size());
  for (const auto& [k, _] : vertex_of) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (std::size_t v = 0; v < keys.size(); ++v) {
    vertex_of[keys[v]] = int(v);
    g.a_idx.push_back(int(keys[v] / nb));
    g.b_idx.push_back(int(keys[v] % nb));
  }
  for (const auto& [k1, k2] : seed_list) {
    g.seeds.push_back({vertex_of[k1], vertex_of[k2]});
    if (g.seeds.size() >= kMaxSeeds) break;
  }
  return g;
}

// exact maximum clique by branch and bound, for small graphs (bitmask sets)
struct SmallCliqueSolver {
  int n;
  std::vector<std::uint64_t> adj;
  int best = 0;

  void search(std::uint64_t cand, int size) {
    if (size + __builtin_popcountll(cand) <= best) return;
    while (cand) {
      if (size + __builtin_popcountll(cand) <= best) return;
      int v = __builtin_ctzll(cand);
      cand &= cand - 1;
      search(cand & adj[v], size + 1);
      if (size + 1 > best) best = size + 1;
    }
  }
};

inline int largest_cluster(const MatchView& a, const MatchView& b) {
  CorrespondenceGraph g = build_graph(a, b);
  const int nv = int(g.a_idx.size());
  if (nv < 2) return 0;

  auto compat = [&](int v1, int v2) {
    return correspondences_compatible(a, b, g.a_idx[v1], g.b_idx[v1], g.a_idx[v2], g.b_idx[v2]);
  };

  if (std::size_t(nv) <= kExactCliqueLimit) {
    SmallCliqueSolver solver;
    solver.n = nv;
    solver.adj.assign(nv, 0);
    for (int i = 0; i < nv; ++i)
      for (int j = i + 1; j < nv; ++j)
        if (compat(i, j)) {
          solver.adj[i] |= 1ULL << j;
          solver.adj[j] |= 1ULL << i;
        }
    solver.search(~0ULL >> (64 - nv), 0);
    return solver.best >= 2 ? solver.best : 0;
  }

  // greedy growth from each seed edge, deterministic order
  const int max_possible = int(std::min(a.x.size(), b.x.size()));
  std::vector<int> clique, cand, next_cand;
  int best = 0;
  for (const auto& [v1, v2] : g.seeds) {
    if (!compat(v1, v2)) continue;  // injectivity guard for degenerate seeds
    clique.assign({v1, v2});
    cand.clear();
    for (int v = 0; v < nv; ++v)
      if (v != v1 && v != v2 && compat(v, v1) && compat(v, v2)) cand.push_back(v);
    while (!cand.empty()) {
      int v = cand.front();
      clique.push_back(v);
      next_cand.clear();
      for (int u : cand)
        if (u != v && compat(u, v)) next_cand.push_back(u);
      cand.swap(next_cand);
    }
    if (int(clique.size()) > best) best = int(clique.size());
    if (best >= max_possible) break;
  }
  return best >= 2 ? best : 0;
}

// canonical operand order so the score is exactly symmetric
inline bool template_precedes(const Template& a, const Template& b) {
  if (a.minutiae.size() != b.minutiae.size()) return a.minutiae.size() < b.minutiae.size();
  for (std::size_t i = 0; i < a.minutiae.size(); ++i) {
    const auto &ma = a.minutiae[i], &mb = b.minutiae[i];
    if (ma.x != mb.x) return ma.x < mb.x;
    if (ma.y != mb.y) return ma.y < mb.y;
    if (ma.angle != mb.angle) return ma.angle < mb.angle;
  }
  return false;
}

}  // namespace detail

inline MatchScore match(const Template& a, const Template& b) {
  if (a.minutiae.size() < 2 || b.minutiae.size() < 2)
    throw InvalidArgument("matching requires at least 2 minutiae per template");
  const Template& first = detail::template_precedes(b, a) ? b : a;
  const Template& second = (&first == &a) ? b : a;
  auto va = detail::make_view(first);
  auto vb = detail::make_view(second);
  int cluster = detail::largest_cluster(va, vb);
  return MatchScore{cluster * detail::kScoreScale};
}

}  // namespace proxyprints
