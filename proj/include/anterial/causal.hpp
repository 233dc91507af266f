#pragma once

// Graphical interventions and counterfactual constructions on
// chain-connected anterial graphs. do_graph cuts the mechanisms of the
// treated nodes, phi places the observational and intervened worlds side by
// side with the shared-error bidirected edges, swaig marginalises the
// observational copies downstream of the treatment, and
// parallel_worlds_swig builds the full single-world intervention graph for
// DAGs from a cascade of intervened worlds.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "anterial/errors.hpp"
#include "anterial/graph.hpp"
#include "anterial/transforms.hpp"

namespace anterial {

// Superscript for nodes of the world where `bases` were intervened on.
// Bases are sorted so the label is independent of treatment order.
inline std::string do_suffix(std::vector<std::string> bases) {
  std::sort(bases.begin(), bases.end(), label_less);
  std::string s = "^do(";
  for (size_t i = 0; i < bases.size(); ++i) {
    if (i) s += ',';
    s += bases[i];
  }
  return s + ")";
}

inline std::string do_label(const std::string& base, const std::vector<std::string>& world) {
  return world.empty() ? base : base + do_suffix(world);
}

// Inverse of do_label: ("5^do(2,3)") -> {"5", {"2","3"}}.
inline std::pair<std::string, std::vector<std::string>> split_do_label(const std::string& label) {
  auto pos = label.find("^do(");
  if (pos == std::string::npos || label.back() != ')')
    return {label, {}};
  std::vector<std::string> world;
  std::string inner = label.substr(pos + 4, label.size() - pos - 5);
  std::string cur;
  for (char ch : inner) {
    if (ch == ',') {
      world.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) world.push_back(cur);
  return {label.substr(0, pos), world};
}

namespace detail {

inline void require_chain_connected_anterial(const MixedGraph& g, const char* op) {
  GraphClassReport r = classify(g);
  if (!r.is_anterial || !r.is_chain_connected)
    throw Error(ErrorCode::NotChainConnectedAnterial,
                std::string(op) + " needs a chain-connected anterial graph" +
                    (r.witnesses.empty() ? "" : ": " + r.witnesses.front().second));
}

}  // namespace detail

// Cut the mechanisms of the treated nodes: undirected edges at a treated
// node become directed out of it (or vanish between two treated nodes), and
// every edge with an arrowhead into a treated node is removed.
inline MixedGraph do_graph(const MixedGraph& g, const NodeSet& c) {
  check_nodes(g, c);
  detail::require_chain_connected_anterial(g, "do_graph");

  std::vector<Edge> edges;
  for (const Edge& e : g.edges) {
    bool cu = c.count(e.u) > 0, cv = c.count(e.v) > 0;
    if (e.undirected()) {
      if (cu && cv) continue;
      if (cu)
        edges.push_back(make_directed(e.u, e.v));
      else if (cv)
        edges.push_back(make_directed(e.v, e.u));
      else
        edges.push_back(e);
    } else if (e.directed()) {
      int head = e.at_u == Mark::head ? e.u : e.v;
      if (c.count(head)) continue;
      edges.push_back(e);
    } else {
      if (cu || cv) continue;
      edges.push_back(e);
    }
  }
  return build_graph(g.labels, edges);
}

// Counterfactual graph: the observational world next to the relabelled
// intervened world. Nodes the treatment cannot reach are identical in both
// worlds and keep a single copy; the surviving intervened copies pick up
// bidirected edges wherever the two worlds share a part error.
inline MixedGraph phi(const MixedGraph& g, const NodeSet& c) {
  check_nodes(g, c);
  MixedGraph dog = do_graph(g, c);

  std::vector<std::string> bases;
  for (int x : c) bases.push_back(g.labels[x]);
  const std::string suffix = c.empty() ? "" : do_suffix(bases);

  // the intervened copy of i collapses into i when no semi-directed path
  // leads from the treatment to i: the two variables coincide
  const int n = g.n();
  auto downstream = detail::reach(g, c, detail::semi_out);
  std::vector<int> do_id(n, -1);
  std::vector<std::string> labels = g.labels;
  for (int i = 0; i < n; ++i)
    if (downstream[i]) {
      do_id[i] = static_cast<int>(labels.size());
      labels.push_back(g.labels[i] + suffix);
    }

  std::set<Edge> edges(g.edges.begin(), g.edges.end());
  auto mapped = [&](int i) { return do_id[i] >= 0 ? do_id[i] : i; };
  for (const Edge& e : dog.edges) {
    Edge f = e;
    f.u = mapped(e.u);
    f.v = mapped(e.v);
    edges.insert(f.canonical());
  }

  auto cc = chain_components(g);
  for (int i = 0; i < n; ++i) {
    if (do_id[i] < 0 || c.count(i)) continue;
    edges.insert(make_bidirected(do_id[i], i).canonical());
    for (const Edge& e : g.edges)
      if (e.bidirected() && e.touches(i))
        edges.insert(make_bidirected(do_id[i], e.other(i)).canonical());
    for (int j : cc.parts[cc.component_of[i]])
      if (j != i) edges.insert(make_bidirected(do_id[i], j).canonical());
  }

  return build_graph(labels, {edges.begin(), edges.end()});
}

// Single-world graph: only one version of each variable remains, so shared
// errors between worlds can no longer surface as cross-world bidirected
// edges.
inline MixedGraph swaig(const MixedGraph& g, const NodeSet& c) {
  MixedGraph f = phi(g, c);
  NodeSet m;
  for (int x : posterior(g, c)) m.insert(f.id_of(g.labels[x]));
  return marginalize(f, m);
}

// The parallel-worlds construction for DAGs. World k intervenes on the
// first k treatments; copies of a node merge across consecutive worlds as
// long as no intervention in between changes its value, and the surviving
// copies form the single-world intervention graph.
inline MixedGraph parallel_worlds_swig(const MixedGraph& g, const std::vector<int>& c_ordered) {
  if (!classify(g).is_dag)
    throw Error(ErrorCode::NotDag, "parallel_worlds_swig needs a DAG");
  {
    NodeSet seen;
    for (int x : c_ordered) {
      check_nodes(g, {x});
      if (!seen.insert(x).second)
        throw Error(ErrorCode::InvalidOrder,
                    "treatment '" + g.labels[x] + "' listed twice");
    }
  }
  const int nt = static_cast<int>(c_ordered.size());
  if (nt == 0) return g;
  // ancestors first: a later treatment may not reach an earlier one
  for (int q = 1; q < nt; ++q)
    for (int p = 0; p < q; ++p)
      if (detail::semi_reaches(g, c_ordered[q], c_ordered[p]))
        throw Error(ErrorCode::InvalidOrder,
                    "treatment '" + g.labels[c_ordered[q]] + "' is an ancestor of earlier '" +
                        g.labels[c_ordered[p]] + "'");

  const int n = g.n();
  std::vector<MixedGraph> worlds;
  worlds.reserve(nt + 1);
  worlds.push_back(g);
  NodeSet prefix;
  for (int k = 0; k < nt; ++k) {
    prefix.insert(c_ordered[k]);
    worlds.push_back(do_graph(g, prefix));
  }

  // strict descendants of a source set within one world
  auto strict_desc = [](const MixedGraph& w, const NodeSet& srcs) {
    NodeSet kids;
    for (int s : srcs)
      for (int ei : w.adj[s]) {
        const Edge& e = w.edges[ei];
        if (e.mark_at(s) == Mark::tail) kids.insert(e.other(s));
      }
    return detail::reach(w, kids, detail::semi_out);
  };

  // de[i]: the copies settled in world i, where the value of a node is
  // fixed by the first i interventions and untouched by the later ones
  std::vector<std::vector<char>> de(nt + 1, std::vector<char>(n, 0));
  {
    NodeSet all(c_ordered.begin(), c_ordered.end());
    auto down = strict_desc(g, all);
    for (int j = 0; j < n; ++j) de[0][j] = !down[j];
  }
  for (int i = 1; i <= nt; ++i) {
    auto own = strict_desc(worlds[i], {c_ordered[i - 1]});
    NodeSet later(c_ordered.begin() + i, c_ordered.end());
    auto cut = strict_desc(worlds[i], later);
    for (int j = 0; j < n; ++j)
      de[i][j] = (j == c_ordered[i - 1] || own[j]) && !cut[j];
  }

  // copy (j, k) lives at index k * n + j; merge by pointing at the target
  std::vector<int> rep((nt + 1) * n);
  for (size_t x = 0; x < rep.size(); ++x) rep[x] = static_cast<int>(x);
  std::vector<int> tpos(n, -1);
  for (int k = 0; k < nt; ++k) tpos[c_ordered[k]] = k + 1;
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j < n; ++j) {
      if (!de[i][j]) continue;
      int upto;
      if (tpos[j] < 0)
        upto = nt;  // never intervened on, identical in every later world
      else if (i < tpos[j])
        upto = tpos[j] - 1;  // still random until its own world
      else
        upto = nt;  // fixed value, shared by every later world
      for (int k = i + 1; k <= upto; ++k) rep[k * n + j] = i * n + j;
    }

  // survivors: one copy per de membership plus whatever in the last world
  // was never merged away
  std::set<int> alive;
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j < n; ++j) {
      if (i < nt ? de[i][j] != 0 : rep[i * n + j] == i * n + j) alive.insert(i * n + j);
    }

  std::vector<std::string> labels;
  std::map<int, int> out_id;
  for (int i = 0; i <= nt; ++i)
    for (int j = 0; j < n; ++j) {
      int cp = i * n + j;
      if (!alive.count(cp)) continue;
      std::vector<std::string> world_bases;
      for (int k = 0; k < i; ++k) world_bases.push_back(g.labels[c_ordered[k]]);
      out_id[cp] = static_cast<int>(labels.size());
      labels.push_back(do_label(g.labels[j], world_bases));
    }

  std::set<Edge> edges;
  for (int k = 0; k <= nt; ++k)
    for (const Edge& e : worlds[k].edges) {
      int ru = rep[k * n + e.u], rv = rep[k * n + e.v];
      if (!alive.count(ru) || !alive.count(rv)) continue;
      Edge f = e;
      f.u = out_id[ru];
      f.v = out_id[rv];
      edges.insert(f.canonical());
    }

  return build_graph(labels, {edges.begin(), edges.end()});
}

}  // namespace anterial
