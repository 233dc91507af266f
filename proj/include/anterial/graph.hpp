#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "anterial/errors.hpp"

namespace anterial {

using NodeSet = std::set<int>;

enum class Mark : std::uint8_t { tail, head };

// One edge of a mixed graph. tail-tail is undirected, tail-head directed,
// head-head bidirected. Canonical storage: directed edges keep the tail
// endpoint in u; symmetric edges keep u < v.
struct Edge {
  int u = -1;
  int v = -1;
  Mark at_u = Mark::tail;
  Mark at_v = Mark::tail;

  bool directed() const { return at_u != at_v; }
  bool undirected() const { return at_u == Mark::tail && at_v == Mark::tail; }
  bool bidirected() const { return at_u == Mark::head && at_v == Mark::head; }

  bool touches(int x) const { return u == x || v == x; }
  int other(int x) const { return u == x ? v : u; }
  Mark mark_at(int x) const { return u == x ? at_u : at_v; }

  Edge canonical() const {
    Edge e = *this;
    bool swap = e.directed() ? (e.at_u == Mark::head) : (e.u > e.v);
    if (swap) {
      std::swap(e.u, e.v);
      std::swap(e.at_u, e.at_v);
    }
    return e;
  }

  friend bool operator==(const Edge& a, const Edge& b) {
    Edge x = a.canonical(), y = b.canonical();
    return x.u == y.u && x.v == y.v && x.at_u == y.at_u && x.at_v == y.at_v;
  }
  friend bool operator<(const Edge& a, const Edge& b) {
    Edge x = a.canonical(), y = b.canonical();
    auto kx = std::tuple(x.u, x.v, x.at_u, x.at_v);
    auto ky = std::tuple(y.u, y.v, y.at_u, y.at_v);
    return kx < ky;
  }
};

inline Edge make_directed(int tail, int head) { return Edge{tail, head, Mark::tail, Mark::head}; }
inline Edge make_undirected(int a, int b) { return Edge{a, b, Mark::tail, Mark::tail}.canonical(); }
inline Edge make_bidirected(int a, int b) { return Edge{a, b, Mark::head, Mark::head}.canonical(); }

struct MixedGraph {
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> index;
  std::vector<Edge> edges;
  std::vector<std::vector<int>> adj;  // node -> incident edge positions

  int n() const { return static_cast<int>(labels.size()); }

  int id_of(const std::string& label) const {
    auto it = index.find(label);
    if (it == index.end()) throw Error(ErrorCode::UnknownNode, "no node labelled '" + label + "'");
    return it->second;
  }

  bool has_label(const std::string& label) const { return index.count(label) > 0; }

  const Edge* edge_between(int a, int b) const {
    for (int ei : adj[a]) {
      const Edge& e = edges[ei];
      if (e.touches(b)) return &e;
    }
    return nullptr;
  }

  bool adjacent(int a, int b) const { return edge_between(a, b) != nullptr; }
};

// Ordering used wherever a deterministic node scan is required: labels with a
// numeric prefix sort by (value, full label), others after them by label.
inline bool label_less(const std::string& a, const std::string& b) {
  auto prefix = [](const std::string& s) -> std::optional<long long> {
    size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == 0 || i > 18) return std::nullopt;
    return std::stoll(s.substr(0, i));
  };
  auto pa = prefix(a), pb = prefix(b);
  if (pa && pb) {
    if (*pa != *pb) return *pa < *pb;
    return a < b;
  }
  if (pa != pb) return pa.has_value();
  return a < b;
}

inline bool node_less(const MixedGraph& g, int a, int b) {
  return label_less(g.labels[a], g.labels[b]);
}

// Node ids in label order, for deterministic iteration.
inline std::vector<int> nodes_in_label_order(const MixedGraph& g) {
  std::vector<int> order(g.n());
  for (int i = 0; i < g.n(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return node_less(g, a, b); });
  return order;
}

inline MixedGraph build_graph(const std::vector<std::string>& labels, const std::vector<Edge>& edges) {
  MixedGraph g;
  g.labels = labels;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (!g.index.emplace(labels[i], i).second)
      throw Error(ErrorCode::DuplicateLabel, "label '" + labels[i] + "' appears twice");
  }
  g.adj.assign(labels.size(), {});
  for (const Edge& raw : edges) {
    Edge e = raw.canonical();
    if (e.u < 0 || e.v < 0 || e.u >= g.n() || e.v >= g.n())
      throw Error(ErrorCode::UnknownNode, "edge endpoint out of range");
    if (e.u == e.v) throw Error(ErrorCode::SelfLoop, "self loop at '" + labels[e.u] + "'");
    if (g.adjacent(e.u, e.v))
      throw Error(ErrorCode::DuplicateEdge,
                  "pair ('" + labels[e.u] + "','" + labels[e.v] + "') already has an edge");
    int pos = static_cast<int>(g.edges.size());
    g.edges.push_back(e);
    g.adj[e.u].push_back(pos);
    g.adj[e.v].push_back(pos);
  }
  return g;
}

// Edges in display form: "u -> v", "u -- v", "u <-> v".
inline std::string edge_to_string(const MixedGraph& g, const Edge& e) {
  int u = e.u, v = e.v;
  if (e.at_u == Mark::head && e.at_v == Mark::tail) std::swap(u, v);
  const char* op = e.bidirected() ? " <-> " : (e.undirected() ? " -- " : " -> ");
  if (!e.bidirected() && !e.undirected())
    return g.labels[u] + op + g.labels[v];
  if (label_less(g.labels[v], g.labels[u])) std::swap(u, v);
  return g.labels[u] + op + g.labels[v];
}

inline std::string graph_summary(const MixedGraph& g) {
  std::vector<std::string> parts;
  for (const Edge& e : g.edges) parts.push_back(edge_to_string(g, e));
  std::sort(parts.begin(), parts.end(), label_less);
  std::string out = "{";
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out + "}";
}

inline bool graphs_equal(const MixedGraph& a, const MixedGraph& b) {
  if (a.labels != b.labels) return false;
  auto key = [](const MixedGraph& g) {
    std::vector<std::tuple<std::string, std::string, int, int>> k;
    for (const Edge& raw : g.edges) {
      Edge e = raw.canonical();
      k.emplace_back(g.labels[e.u], g.labels[e.v], static_cast<int>(e.at_u), static_cast<int>(e.at_v));
    }
    std::sort(k.begin(), k.end());
    return k;
  };
  return key(a) == key(b);
}

namespace detail {

// Out-neighbours in the semi-directed sense: follow directed edges tail to
// head and undirected edges both ways. Bidirected edges never contribute.
inline std::vector<int> semi_out(const MixedGraph& g, int x) {
  std::vector<int> out;
  for (int ei : g.adj[x]) {
    const Edge& e = g.edges[ei];
    if (e.undirected()) out.push_back(e.other(x));
    else if (e.directed() && e.mark_at(x) == Mark::tail) out.push_back(e.other(x));
  }
  return out;
}

inline std::vector<int> semi_in(const MixedGraph& g, int x) {
  std::vector<int> in;
  for (int ei : g.adj[x]) {
    const Edge& e = g.edges[ei];
    if (e.undirected()) in.push_back(e.other(x));
    else if (e.directed() && e.mark_at(x) == Mark::head) in.push_back(e.other(x));
  }
  return in;
}

// Nodes reachable from `from` by semi-directed walks, `from` included.
template <typename Neigh>
std::vector<char> reach(const MixedGraph& g, const NodeSet& from, Neigh neigh) {
  std::vector<char> seen(g.n(), 0);
  std::deque<int> queue;
  for (int s : from) {
    seen[s] = 1;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    for (int y : neigh(g, x))
      if (!seen[y]) {
        seen[y] = 1;
        queue.push_back(y);
      }
  }
  return seen;
}

inline bool semi_reaches(const MixedGraph& g, int from, int to) {
  return reach(g, NodeSet{from}, semi_out)[to] != 0;
}

}  // namespace detail

inline void check_nodes(const MixedGraph& g, const NodeSet& s) {
  for (int x : s)
    if (x < 0 || x >= g.n()) throw Error(ErrorCode::UnknownNode, "node id out of range");
}

// Anterior of c: nodes with a semi-directed path into c, excluding c itself.
inline NodeSet anterior(const MixedGraph& g, const NodeSet& c) {
  check_nodes(g, c);
  auto seen = detail::reach(g, c, detail::semi_in);
  NodeSet out;
  for (int i = 0; i < g.n(); ++i)
    if (seen[i] && !c.count(i)) out.insert(i);
  return out;
}

// Posterior of c: nodes reachable from c by semi-directed paths, excluding c.
inline NodeSet posterior(const MixedGraph& g, const NodeSet& c) {
  check_nodes(g, c);
  auto seen = detail::reach(g, c, detail::semi_out);
  NodeSet out;
  for (int i = 0; i < g.n(); ++i)
    if (seen[i] && !c.count(i)) out.insert(i);
  return out;
}

struct ChainComponents {
  std::vector<NodeSet> parts;     // ordered by smallest member id
  std::vector<int> component_of;  // node -> index into parts
};

inline ChainComponents chain_components(const MixedGraph& g) {
  ChainComponents cc;
  cc.component_of.assign(g.n(), -1);
  for (int s = 0; s < g.n(); ++s) {
    if (cc.component_of[s] != -1) continue;
    int id = static_cast<int>(cc.parts.size());
    NodeSet part;
    std::deque<int> queue{s};
    cc.component_of[s] = id;
    while (!queue.empty()) {
      int x = queue.front();
      queue.pop_front();
      part.insert(x);
      for (int ei : g.adj[x]) {
        const Edge& e = g.edges[ei];
        if (!e.undirected()) continue;
        int y = e.other(x);
        if (cc.component_of[y] == -1) {
          cc.component_of[y] = id;
          queue.push_back(y);
        }
      }
    }
    cc.parts.push_back(std::move(part));
  }
  return cc;
}

enum class RelativeKind { ne, pa, ant, sant, po };

// Relational queries, all excluding the query set itself.
inline NodeSet relatives(const MixedGraph& g, const NodeSet& c, RelativeKind kind) {
  check_nodes(g, c);
  NodeSet out;
  switch (kind) {
    case RelativeKind::ne:
      for (int x : c)
        for (int ei : g.adj[x]) {
          const Edge& e = g.edges[ei];
          if (e.undirected() && !c.count(e.other(x))) out.insert(e.other(x));
        }
      return out;
    case RelativeKind::pa:
      for (int x : c)
        for (int ei : g.adj[x]) {
          const Edge& e = g.edges[ei];
          if (e.directed() && e.mark_at(x) == Mark::head && !c.count(e.other(x))) out.insert(e.other(x));
        }
      return out;
    case RelativeKind::ant:
      return anterior(g, c);
    case RelativeKind::sant: {
      NodeSet ant = anterior(g, c);
      auto cc = chain_components(g);
      for (int x : c)
        for (int y : cc.parts[cc.component_of[x]]) ant.erase(y);
      return ant;
    }
    case RelativeKind::po:
      return posterior(g, c);
  }
  return out;
}

struct GraphClassReport {
  bool is_chain_mixed = false;
  bool is_anterial = false;
  bool is_chain_connected = false;
  bool is_ancestral = false;
  bool is_chain_graph = false;
  bool is_dag = false;
  bool is_maximal = false;
  // Human-readable witness per failed predicate, keyed by predicate name.
  std::vector<std::pair<std::string, std::string>> witnesses;
};

namespace detail {

inline std::string path_string(const MixedGraph& g, const std::vector<int>& nodes) {
  std::string s;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (i) s += " ~ ";
    s += g.labels[nodes[i]];
  }
  return s;
}

// A semi-directed path from one node to another, for witness reporting.
inline std::optional<std::vector<int>> semi_path(const MixedGraph& g, int from, int to) {
  std::vector<int> prev(g.n(), -2);
  std::deque<int> queue{from};
  prev[from] = -1;
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    if (x == to) {
      std::vector<int> path;
      for (int c = to; c != -1; c = prev[c]) path.push_back(c);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (int y : semi_out(g, x))
      if (prev[y] == -2) {
        prev[y] = x;
        queue.push_back(y);
      }
  }
  return std::nullopt;
}

}  // namespace detail

bool is_maximal(const MixedGraph& g);  // defined after primitive_inducing_path

inline GraphClassReport classify(const MixedGraph& g) {
  GraphClassReport r;
  r.is_chain_mixed = true;
  for (const Edge& e : g.edges) {
    if (!e.directed()) continue;
    int tail = e.at_u == Mark::tail ? e.u : e.v;
    int head = e.other(tail);
    if (detail::semi_reaches(g, head, tail)) {
      r.is_chain_mixed = false;
      auto back = detail::semi_path(g, head, tail);
      r.witnesses.emplace_back("chain_mixed",
                               "semi-directed cycle through " + g.labels[tail] + " -> " + g.labels[head] +
                                   " ~ " + detail::path_string(g, *back));
      break;
    }
  }

  r.is_anterial = r.is_chain_mixed;
  for (const Edge& e : g.edges) {
    if (!r.is_anterial) break;
    if (!e.bidirected()) continue;
    for (auto [a, b] : {std::pair{e.u, e.v}, std::pair{e.v, e.u}}) {
      if (detail::semi_reaches(g, a, b)) {
        r.is_anterial = false;
        auto path = detail::semi_path(g, a, b);
        r.witnesses.emplace_back("anterial", "bidirected " + g.labels[e.u] + " <-> " + g.labels[e.v] +
                                                 " with semi-directed path " + detail::path_string(g, *path));
        break;
      }
    }
  }

  auto cc = chain_components(g);
  r.is_chain_connected = true;
  for (const Edge& e : g.edges) {
    if (!e.bidirected()) continue;
    if (cc.component_of[e.u] == cc.component_of[e.v]) {
      r.is_chain_connected = false;
      r.witnesses.emplace_back("chain_connected", "bidirected edge inside one chain component: " +
                                                      g.labels[e.u] + " <-> " + g.labels[e.v]);
      break;
    }
    bool full = true;
    for (auto [x, y] : {std::pair{e.u, e.v}, std::pair{e.v, e.u}}) {
      for (int k : cc.parts[cc.component_of[y]]) {
        const Edge* f = g.edge_between(x, k);
        if (!f || !f->bidirected()) {
          full = false;
          r.witnesses.emplace_back("chain_connected", g.labels[e.u] + " <-> " + g.labels[e.v] +
                                                          " but no bidirected edge " + g.labels[x] +
                                                          " <-> " + g.labels[k]);
          break;
        }
      }
      if (!full) break;
    }
    if (!full) {
      r.is_chain_connected = false;
      break;
    }
  }

  // Ancestral: no directed cycle, no bidirected edge between directed-path
  // relatives, and nodes with undirected edges carry no arrowheads at all.
  {
    auto dir_out = [](const MixedGraph& gg, int x) {
      std::vector<int> out;
      for (int ei : gg.adj[x]) {
        const Edge& e = gg.edges[ei];
        if (e.directed() && e.mark_at(x) == Mark::tail) out.push_back(e.other(x));
      }
      return out;
    };
    r.is_ancestral = true;
    for (const Edge& e : g.edges) {
      if (e.directed()) {
        int tail = e.at_u == Mark::tail ? e.u : e.v;
        int head = e.other(tail);
        if (detail::reach(g, NodeSet{head}, dir_out)[tail]) {
          r.is_ancestral = false;
          r.witnesses.emplace_back("ancestral", "directed cycle through " + g.labels[tail]);
          break;
        }
      } else if (e.bidirected()) {
        if (detail::reach(g, NodeSet{e.u}, dir_out)[e.v] || detail::reach(g, NodeSet{e.v}, dir_out)[e.u]) {
          r.is_ancestral = false;
          r.witnesses.emplace_back("ancestral", "almost-directed cycle at " + g.labels[e.u] + " <-> " + g.labels[e.v]);
          break;
        }
      }
    }
    if (r.is_ancestral) {
      for (int x = 0; x < g.n() && r.is_ancestral; ++x) {
        bool undirected_at = false, arrowhead_at = false;
        for (int ei : g.adj[x]) {
          const Edge& e = g.edges[ei];
          if (e.undirected()) undirected_at = true;
          else if (e.mark_at(x) == Mark::head) arrowhead_at = true;
        }
        if (undirected_at && arrowhead_at) {
          r.is_ancestral = false;
          r.witnesses.emplace_back("ancestral", "node " + g.labels[x] + " has both an undirected edge and an arrowhead");
        }
      }
    }
  }

  bool any_bidirected = false, any_undirected = false;
  for (const Edge& e : g.edges) {
    any_bidirected |= e.bidirected();
    any_undirected |= e.undirected();
  }
  r.is_chain_graph = r.is_chain_mixed && !any_bidirected;
  r.is_dag = r.is_chain_mixed && !any_bidirected && !any_undirected;
  r.is_maximal = is_maximal(g);
  return r;
}

// Primitive inducing path between i and j: at least one interior node, all
// interior nodes anterior to {i,j}, interior edges bidirected or undirected,
// terminal edges bidirected or directed out of the endpoint.
inline std::optional<std::vector<int>> primitive_inducing_path(const MixedGraph& g, int i, int j) {
  if (i == j) throw Error(ErrorCode::InvalidQuery, "endpoints coincide");
  NodeSet ends{i, j};
  auto ant = anterior(g, ends);
  auto interior_ok = [&](int q) { return ant.count(q) && !ends.count(q); };
  auto terminal_ok = [&](int endpoint, const Edge& e) {
    return e.bidirected() || (e.directed() && e.mark_at(endpoint) == Mark::tail);
  };

  std::vector<int> path{i};
  std::vector<char> used(g.n(), 0);
  used[i] = 1;

  // Depth-first over simple paths; interiors are constrained enough that the
  // search stays small on the graph sizes this library targets.
  auto dfs = [&](auto&& self, int x) -> bool {
    for (int ei : g.adj[x]) {
      const Edge& e = g.edges[ei];
      int y = e.other(x);
      bool from_start = x == i;
      if (y == j) {
        if (path.size() < 2) continue;  // need an interior node
        if (!terminal_ok(j, e)) continue;
        path.push_back(j);
        return true;
      }
      if (used[y] || !interior_ok(y)) continue;
      if (from_start) {
        if (!terminal_ok(i, e)) continue;
      } else {
        if (!(e.bidirected() || e.undirected())) continue;
      }
      used[y] = 1;
      path.push_back(y);
      if (self(self, y)) return true;
      path.pop_back();
      used[y] = 0;
    }
    return false;
  };
  if (dfs(dfs, i)) return path;
  return std::nullopt;
}

inline bool is_maximal(const MixedGraph& g) {
  for (int a = 0; a < g.n(); ++a)
    for (int b = a + 1; b < g.n(); ++b)
      if (!g.adjacent(a, b) && primitive_inducing_path(g, a, b)) return false;
  return true;
}

namespace detail {

// Edge type linking a currently non-adjacent pair without disturbing anterior
// sets: mutual anteriors join undirected, one-sided anteriors directed, the
// rest bidirected.
inline Edge anterior_typed_edge(const MixedGraph& g, int a, int b, const NodeSet& extra = {}) {
  NodeSet tb = extra;
  tb.insert(b);
  NodeSet ta = extra;
  ta.insert(a);
  bool a_ant = reach(g, tb, semi_in)[a] != 0;
  bool b_ant = reach(g, ta, semi_in)[b] != 0;
  if (a_ant && b_ant) return make_undirected(a, b);
  if (a_ant) return make_directed(a, b);
  if (b_ant) return make_directed(b, a);
  return make_bidirected(a, b);
}

}  // namespace detail

inline MixedGraph add_edge_copy(const MixedGraph& g, const Edge& e) {
  std::vector<Edge> edges = g.edges;
  edges.push_back(e);
  return build_graph(g.labels, edges);
}

// Close g under primitive inducing paths. Output is maximal, Markov
// equivalent to g, a supergraph of g, and preserves every anterior set.
inline MixedGraph maximize(const MixedGraph& g) {
  {
    GraphClassReport r = classify(g);
    if (!r.is_chain_mixed) throw Error(ErrorCode::NotChainMixed, "maximize needs a chain mixed graph");
  }
  MixedGraph cur = g;
  auto order = nodes_in_label_order(cur);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t p = 0; p < order.size() && !changed; ++p)
      for (size_t q = p + 1; q < order.size() && !changed; ++q) {
        int a = order[p], b = order[q];
        if (cur.adjacent(a, b)) continue;
        if (!primitive_inducing_path(cur, a, b)) continue;
        cur = add_edge_copy(cur, detail::anterior_typed_edge(cur, a, b));
        changed = true;
      }
  }
  return cur;
}

// One node per chain component; directed and bidirected edges lift to the
// component level. Requires a chain-connected anterial input, and then the
// result is ancestral.
inline MixedGraph collapse(const MixedGraph& g) {
  GraphClassReport r = classify(g);
  if (!r.is_anterial) throw Error(ErrorCode::NotAnterial, "collapse needs an anterial graph");
  if (!r.is_chain_connected) throw Error(ErrorCode::NotChainConnected, "collapse needs a chain-connected graph");

  auto cc = chain_components(g);
  std::vector<std::string> labels(cc.parts.size());
  for (size_t k = 0; k < cc.parts.size(); ++k) {
    std::vector<std::string> members;
    for (int x : cc.parts[k]) members.push_back(g.labels[x]);
    std::sort(members.begin(), members.end(), label_less);
    std::string joined;
    for (size_t m = 0; m < members.size(); ++m) {
      if (m) joined += ",";
      joined += members[m];
    }
    labels[k] = joined;
  }

  std::set<std::tuple<int, int, int>> seen;  // (cu, cv, kind) kinds: 0 directed, 1 bidirected
  std::vector<Edge> edges;
  for (const Edge& e : g.edges) {
    if (e.undirected()) continue;
    if (e.directed()) {
      int tail = e.at_u == Mark::tail ? e.u : e.v;
      int head = e.other(tail);
      int cu = cc.component_of[tail], cv = cc.component_of[head];
      if (seen.insert({cu, cv, 0}).second) edges.push_back(make_directed(cu, cv));
    } else {
      int cu = cc.component_of[e.u], cv = cc.component_of[e.v];
      if (cu > cv) std::swap(cu, cv);
      if (seen.insert({cu, cv, 1}).second) edges.push_back(make_bidirected(cu, cv));
    }
  }
  return build_graph(labels, edges);
}

// Induced subgraph over `keep`, labels preserved.
inline MixedGraph induced_subgraph(const MixedGraph& g, const NodeSet& keep) {
  check_nodes(g, keep);
  std::vector<std::string> labels;
  std::vector<int> remap(g.n(), -1);
  for (int x : keep) {
    remap[x] = static_cast<int>(labels.size());
    labels.push_back(g.labels[x]);
  }
  std::vector<Edge> edges;
  for (const Edge& e : g.edges)
    if (remap[e.u] != -1 && remap[e.v] != -1)
      edges.push_back(Edge{remap[e.u], remap[e.v], e.at_u, e.at_v});
  return build_graph(labels, edges);
}

}  // namespace anterial
