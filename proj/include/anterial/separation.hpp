#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <vector>

#include "anterial/graph.hpp"

namespace anterial {

struct SeparationQuery {
  NodeSet a;
  NodeSet b;
  NodeSet z;
};

namespace detail {

inline void check_query(const MixedGraph& g, const SeparationQuery& q) {
  check_nodes(g, q.a);
  check_nodes(g, q.b);
  check_nodes(g, q.z);
  auto overlap = [](const NodeSet& x, const NodeSet& y) {
    for (int v : x)
      if (y.count(v)) return true;
    return false;
  };
  if (overlap(q.a, q.b) || overlap(q.a, q.z) || overlap(q.b, q.z))
    throw Error(ErrorCode::OverlappingSets, "separation query sets must be disjoint");
}

// Reachability state while scanning a walk: the node we are at, the mark with
// which the current section was entered (sources get a synthetic tail), and
// whether the current section has touched Z so far. At most 4|V| states.
struct WalkState {
  int node;
  bool entered_with_head;
  bool z_seen;
  int key(int n) const { return node + n * (static_cast<int>(entered_with_head) + 2 * static_cast<int>(z_seen)); }
};

}  // namespace detail

// A Z-connecting walk from A to B as an alternating node/edge index sequence,
// or nothing when A and B are separated given Z. Every collider section of
// the witness intersects Z and every non-collider section avoids Z.
inline std::optional<std::vector<int>> connecting_walk(const MixedGraph& g, const SeparationQuery& q) {
  detail::check_query(g, q);
  if (q.a.empty() || q.b.empty()) return std::nullopt;

  std::vector<char> in_z(g.n(), 0), in_b(g.n(), 0);
  for (int v : q.z) in_z[v] = 1;
  for (int v : q.b) in_b[v] = 1;

  int states = 4 * g.n();
  std::vector<int> prev_state(states, -2), prev_edge(states, -1);
  std::deque<detail::WalkState> queue;
  for (int s : q.a) {
    detail::WalkState st{s, false, false};
    if (prev_state[st.key(g.n())] == -2) {
      prev_state[st.key(g.n())] = -1;
      queue.push_back(st);
    }
  }

  auto build_walk = [&](detail::WalkState st) {
    std::vector<int> walk;  // node, edge, node, edge, ..., node
    int k = st.key(g.n());
    while (k != -1) {
      walk.push_back(k % g.n());
      if (prev_edge[k] >= 0) walk.push_back(prev_edge[k]);
      k = prev_state[k];
    }
    std::reverse(walk.begin(), walk.end());
    return walk;
  };

  while (!queue.empty()) {
    detail::WalkState st = queue.front();
    queue.pop_front();
    if (in_b[st.node] && !st.z_seen) return build_walk(st);
    for (int ei : g.adj[st.node]) {
      const Edge& e = g.edges[ei];
      int y = e.other(st.node);
      detail::WalkState next{};
      if (e.undirected()) {
        next = {y, st.entered_with_head, st.z_seen || in_z[y] != 0};
      } else {
        bool exit_head = e.mark_at(st.node) == Mark::head;
        bool collider = st.entered_with_head && exit_head;
        if (collider ? !st.z_seen : st.z_seen) continue;
        next = {y, e.mark_at(y) == Mark::head, in_z[y] != 0};
      }
      int k = next.key(g.n());
      if (prev_state[k] != -2) continue;
      prev_state[k] = st.key(g.n());
      prev_edge[k] = ei;
      queue.push_back(next);
    }
  }
  return std::nullopt;
}

inline bool separated(const MixedGraph& g, const SeparationQuery& q) {
  return !connecting_walk(g, q).has_value();
}

inline bool separated(const MixedGraph& g, const NodeSet& a, const NodeSet& b, const NodeSet& z) {
  return separated(g, SeparationQuery{a, b, z});
}

// Standalone walk validator: decomposes an explicit walk into sections and
// checks the collider/non-collider Z conditions directly. Used to certify
// witnesses and by the brute-force oracle.
inline bool walk_is_z_connecting(const MixedGraph& g, const std::vector<int>& walk, const NodeSet& z) {
  if (walk.empty() || walk.size() % 2 == 0) return false;
  size_t count = walk.size() / 2;
  for (size_t s = 0; s < count; ++s) {
    const Edge& e = g.edges[walk[2 * s + 1]];
    int x = walk[2 * s], y = walk[2 * s + 2];
    if (!(e.touches(x) && e.touches(y) && e.other(x) == y)) return false;
  }
  // section = maximal run of undirected edges; singleton sections otherwise
  size_t pos = 0;  // node position (0-based over nodes only)
  while (pos <= count) {
    size_t end = pos;
    while (end < count && g.edges[walk[2 * end + 1]].undirected()) ++end;
    bool left_head = false, right_head = false, has_left = pos > 0, has_right = end < count;
    if (has_left) {
      const Edge& e = g.edges[walk[2 * pos - 1]];
      left_head = e.mark_at(walk[2 * pos]) == Mark::head;
    }
    if (has_right) {
      const Edge& e = g.edges[walk[2 * end + 1]];
      right_head = e.mark_at(walk[2 * end]) == Mark::head;
    }
    bool touches_z = false;
    for (size_t p = pos; p <= end; ++p) touches_z |= z.count(walk[2 * p]) > 0;
    bool collider = has_left && has_right && left_head && right_head;
    if (collider != touches_z) return false;
    pos = end + 1;
  }
  return true;
}

// Walk enumeration oracle. Searches walks with per-branch state pruning and
// certifies any hit with the standalone validator; exists to cross-validate
// connecting_walk.
inline bool separated_bruteforce(const MixedGraph& g, const SeparationQuery& q) {
  if (g.n() > 10) throw Error(ErrorCode::GraphTooLarge, "brute-force separation is guarded at 10 nodes");
  detail::check_query(g, q);
  if (q.a.empty() || q.b.empty()) return true;

  std::vector<char> in_z(g.n(), 0), in_b(g.n(), 0);
  for (int v : q.z) in_z[v] = 1;
  for (int v : q.b) in_b[v] = 1;

  std::vector<int> walk;
  std::vector<char> on_branch(4 * g.n(), 0);
  bool found = false;

  auto dfs = [&](auto&& self, detail::WalkState st) -> void {
    if (found) return;
    if (in_b[st.node] && !st.z_seen) {
      if (walk_is_z_connecting(g, walk, q.z)) {
        found = true;
        return;
      }
    }
    for (int ei : g.adj[st.node]) {
      const Edge& e = g.edges[ei];
      int y = e.other(st.node);
      detail::WalkState next{};
      if (e.undirected()) {
        next = {y, st.entered_with_head, st.z_seen || in_z[y] != 0};
      } else {
        bool collider = st.entered_with_head && e.mark_at(st.node) == Mark::head;
        if (collider ? !st.z_seen : st.z_seen) continue;  // invalid section close
        next = {y, e.mark_at(y) == Mark::head, in_z[y] != 0};
      }
      int k = next.key(g.n());
      if (on_branch[k]) continue;  // a state revisit never helps on one walk
      on_branch[k] = 1;
      walk.push_back(ei);
      walk.push_back(y);
      self(self, next);
      walk.pop_back();
      walk.pop_back();
      on_branch[k] = 0;
      if (found) return;
    }
  };

  for (int s : q.a) {
    detail::WalkState st{s, false, false};
    walk = {s};
    std::fill(on_branch.begin(), on_branch.end(), 0);
    on_branch[st.key(g.n())] = 1;
    dfs(dfs, st);
    if (found) return false;
  }
  return true;
}

// Two graphs over the same labels induce the same separations. Singleton
// pairs with every conditioning set suffice because graphical separation
// satisfies composition.
inline bool markov_equivalent(const MixedGraph& g1, const MixedGraph& g2) {
  std::vector<std::string> l1 = g1.labels, l2 = g2.labels;
  std::sort(l1.begin(), l1.end());
  std::sort(l2.begin(), l2.end());
  if (l1 != l2) throw Error(ErrorCode::NodeSetMismatch, "graphs carry different node labels");
  if (g1.n() > 12) throw Error(ErrorCode::GraphTooLarge, "markov_equivalent is guarded at 12 nodes");

  int n = g1.n();
  std::vector<int> map2(n);  // g1 id -> g2 id
  for (int i = 0; i < n; ++i) map2[i] = g2.id_of(g1.labels[i]);

  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      rest.clear();
      for (int k = 0; k < n; ++k)
        if (k != i && k != j) rest.push_back(k);
      for (std::uint64_t mask = 0; mask < (1ull << rest.size()); ++mask) {
        NodeSet z1, z2;
        for (size_t t = 0; t < rest.size(); ++t)
          if (mask & (1ull << t)) {
            z1.insert(rest[t]);
            z2.insert(map2[rest[t]]);
          }
        bool s1 = separated(g1, {i}, {j}, z1);
        bool s2 = separated(g2, {map2[i]}, {map2[j]}, z2);
        if (s1 != s2) return false;
      }
    }
  return true;
}

// Smallest separating subset of `candidates`, ties broken lexicographically
// in label order; nothing when no subset separates.
inline std::optional<NodeSet> find_separating_set(const MixedGraph& g, int i, int j, const NodeSet& candidates) {
  if (i == j) throw Error(ErrorCode::InvalidQuery, "endpoints coincide");
  if (candidates.count(i) || candidates.count(j))
    throw Error(ErrorCode::OverlappingSets, "candidates must exclude the endpoints");

  std::vector<int> cand(candidates.begin(), candidates.end());
  std::sort(cand.begin(), cand.end(), [&](int a, int b) { return node_less(g, a, b); });

  size_t m = cand.size();
  for (size_t k = 0; k <= m; ++k) {
    std::vector<size_t> pick(k);
    for (size_t t = 0; t < k; ++t) pick[t] = t;
    while (true) {
      NodeSet z;
      for (size_t t : pick) z.insert(cand[t]);
      if (separated(g, {i}, {j}, z)) return z;
      // next combination in lexicographic order
      size_t t = k;
      while (t > 0 && pick[t - 1] == m - (k - (t - 1))) --t;
      if (t == 0) break;
      ++pick[t - 1];
      for (size_t s = t; s < k; ++s) pick[s] = pick[s - 1] + 1;
    }
  }
  return std::nullopt;
}

}  // namespace anterial
