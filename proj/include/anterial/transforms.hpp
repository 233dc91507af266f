#pragma once

// Marginalisation and conditioning of anterial graphs. Both reduce to one
// projection that drops M and C from the node set while preserving, for all
// remaining singletons i, j and every remaining conditioning set D,
//   separated(result, i, j | D)  <=>  separated(input, i, j | D ∪ C).
//
// The construction reads that contract back as a definition. A kept pair
// stays adjacent exactly when no D drawn from the other kept nodes separates
// it once C is folded in, and a single candidate settles that existential:
// the kept anteriors of the pair and C. Whatever separates the pair at all
// also separates it there, because any connecting walk given a smaller set
// still has every collider section anchored inside that anterior closure.
// Edge marks then express anteriority in the input graph: a tail where the
// endpoint stays anterior to the other end or to C, an arrowhead where it
// does not. Anteriority chains along every semi-directed path such a typing
// can build, so the result is anterial without any after-care.

#include <vector>

#include "anterial/errors.hpp"
#include "anterial/graph.hpp"
#include "anterial/separation.hpp"

namespace anterial {

// Remove M and C in one pass. Labels of remaining nodes are preserved.
inline MixedGraph project(const MixedGraph& g, const NodeSet& m, const NodeSet& c) {
  check_nodes(g, m);
  check_nodes(g, c);
  for (int x : m)
    if (c.count(x))
      throw Error(ErrorCode::OverlappingSets,
                  "node '" + g.labels[x] + "' is both marginalised and conditioned on");
  if (!classify(g).is_anterial)
    throw Error(ErrorCode::NotAnterial, "projection is defined on anterial graphs");
  if (m.empty() && c.empty()) return g;

  const int n = g.n();
  std::vector<char> gone(n, 0);
  for (int x : m) gone[x] = 1;
  for (int x : c) gone[x] = 1;

  std::vector<int> kept;
  std::vector<int> remap(n, -1);
  for (int i = 0; i < n; ++i)
    if (!gone[i]) {
      remap[i] = static_cast<int>(kept.size());
      kept.push_back(i);
    }

  std::vector<std::string> labels;
  labels.reserve(kept.size());
  for (int x : kept) labels.push_back(g.labels[x]);

  std::vector<Edge> edges;
  for (size_t p = 0; p < kept.size(); ++p)
    for (size_t q = p + 1; q < kept.size(); ++q) {
      int a = kept[p], b = kept[q];
      NodeSet anchor = c;
      anchor.insert(a);
      anchor.insert(b);
      NodeSet star = c;
      for (int x : anterior(g, anchor))
        if (!gone[x] && x != a && x != b) star.insert(x);
      if (separated(g, {a}, {b}, star)) continue;
      Edge t = detail::anterior_typed_edge(g, a, b, c);
      edges.push_back(Edge{remap[t.u], remap[t.v], t.at_u, t.at_v}.canonical());
    }

  MixedGraph r = build_graph(labels, edges);
  if (!classify(r).is_anterial)
    throw Error(ErrorCode::NonAnterialResult, "projection produced a non-anterial graph");
  return r;
}

inline MixedGraph marginalize(const MixedGraph& g, const NodeSet& m) { return project(g, m, {}); }

inline MixedGraph condition(const MixedGraph& g, const NodeSet& c) { return project(g, {}, c); }

// Exact equality of marginalising in two steps versus at once.
inline bool compose_check(const MixedGraph& g, const NodeSet& m1, const NodeSet& m2) {
  check_nodes(g, m1);
  check_nodes(g, m2);
  for (int x : m1)
    if (m2.count(x))
      throw Error(ErrorCode::OverlappingSets, "marginal sets overlap at '" + g.labels[x] + "'");
  NodeSet both = m1;
  both.insert(m2.begin(), m2.end());
  MixedGraph h = marginalize(g, m1);
  NodeSet m2h;
  for (int x : m2) m2h.insert(h.id_of(g.labels[x]));
  return graphs_equal(marginalize(h, m2h), marginalize(g, both));
}

}  // namespace anterial
