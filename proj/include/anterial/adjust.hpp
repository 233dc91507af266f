#pragma once

// Constrained selection of a minimal adjustment set: given a treatment c, a
// counterfactual outcome o and bounds L ⊆ S ⊆ U, project the graph onto the
// candidates, bail out if c and o touch in the maximal projection, then shrink
// U by marginalising one node at a time. Every adjacency question is asked of
// the maximised graph: a projection handed in by the caller may be
// non-maximal, and c, o can be inseparable without being adjacent.

#include <algorithm>
#include <string>
#include <vector>

#include "anterial/errors.hpp"
#include "anterial/graph.hpp"
#include "anterial/separation.hpp"
#include "anterial/transforms.hpp"

namespace anterial {

struct AdjustmentProblem {
  MixedGraph graph;
  int treatment = -1;
  int outcome = -1;
  NodeSet lower, upper;
};

struct TraceStep {
  std::string removed;  // node marginalised out at this step
  std::string graph;    // summary of the committed intermediate graph
};

struct AdjustmentResult {
  bool feasible = false;
  NodeSet s;  // node ids of problem.graph, lower bound included
  std::vector<TraceStep> trace;
};

struct AdjustmentCheck {
  bool constraints = false;  // L ⊆ S ⊆ U
  bool separates = false;
  bool minimal = false;
  bool ok() const { return constraints && separates && minimal; }
};

inline void validate_problem(const AdjustmentProblem& p) {
  auto in_range = [&](int x) { return x >= 0 && x < p.graph.n(); };
  if (!in_range(p.treatment) || !in_range(p.outcome))
    throw Error(ErrorCode::InvalidProblem, "treatment and outcome must be graph nodes");
  for (const NodeSet* s : {&p.lower, &p.upper})
    for (int x : *s)
      if (!in_range(x)) throw Error(ErrorCode::InvalidProblem, "bound node outside the graph");
  if (p.treatment == p.outcome)
    throw Error(ErrorCode::InvalidProblem, "treatment equals outcome");
  for (int x : p.lower)
    if (!p.upper.count(x))
      throw Error(ErrorCode::InvalidProblem, "lower bound exceeds the upper bound");
  for (int x : {p.treatment, p.outcome})
    if (p.lower.count(x) || p.upper.count(x))
      throw Error(ErrorCode::InvalidProblem, "treatment and outcome cannot be adjusted for");
  GraphClassReport r = classify(p.graph);
  if (!r.is_anterial)
    throw Error(ErrorCode::InvalidProblem, "adjustment needs an anterial graph");
}

namespace detail {

inline bool adjacent_when_maximal(const MixedGraph& g, const std::string& a,
                                  const std::string& b) {
  MixedGraph mx = maximize(g);
  return mx.adjacent(mx.id_of(a), mx.id_of(b));
}

}  // namespace detail

inline AdjustmentResult select_adjustment(const AdjustmentProblem& p) {
  validate_problem(p);
  const std::string cl = p.graph.labels[p.treatment];
  const std::string ol = p.graph.labels[p.outcome];

  // condition on L, then marginalise everything outside U ∪ {c, o}
  MixedGraph g = condition(p.graph, p.lower);
  NodeSet drop;
  for (int i = 0; i < g.n(); ++i) {
    const std::string& nm = g.labels[i];
    if (nm == cl || nm == ol) continue;
    if (!p.upper.count(p.graph.id_of(nm))) drop.insert(i);
  }
  g = marginalize(g, drop);

  AdjustmentResult result;
  if (detail::adjacent_when_maximal(g, cl, ol)) return result;  // infeasible

  // shrink: drop the first (by label) node whose removal keeps c, o apart,
  // then rescan from the top
  bool removed = true;
  while (removed) {
    removed = false;
    std::vector<std::string> candidates;
    for (const std::string& nm : g.labels)
      if (nm != cl && nm != ol) candidates.push_back(nm);
    std::sort(candidates.begin(), candidates.end(), label_less);
    for (const std::string& nm : candidates) {
      MixedGraph next = marginalize(g, {g.id_of(nm)});
      if (detail::adjacent_when_maximal(next, cl, ol)) continue;
      g = std::move(next);
      result.trace.push_back({nm, graph_summary(g)});
      removed = true;
      break;
    }
  }

  result.feasible = true;
  result.s = p.lower;
  for (const std::string& nm : g.labels)
    if (nm != cl && nm != ol) result.s.insert(p.graph.id_of(nm));
  return result;
}

// Oracle check of a proposed set: the constraint window, separation in the
// original graph, and minimality by exhaustive proper-subset search.
inline AdjustmentCheck verify_adjustment(const AdjustmentProblem& p, const NodeSet& s) {
  validate_problem(p);
  for (int x : s)
    if (x < 0 || x >= p.graph.n())
      throw Error(ErrorCode::InvalidProblem, "candidate set outside the graph");

  AdjustmentCheck check;
  check.constraints = true;
  for (int x : p.lower)
    if (!s.count(x)) check.constraints = false;
  for (int x : s)
    if (!p.upper.count(x)) check.constraints = false;

  check.separates = separated(p.graph, {p.treatment}, {p.outcome}, s);

  std::vector<int> extra;
  for (int x : s)
    if (!p.lower.count(x)) extra.push_back(x);
  if (extra.size() > 20)
    throw Error(ErrorCode::TooLargeForExactCheck,
                "minimality search over 2^" + std::to_string(extra.size()) + " subsets");
  check.minimal = check.separates;
  const std::uint64_t full = std::uint64_t(1) << extra.size();
  for (std::uint64_t mask = 0; mask + 1 < full && check.minimal; ++mask) {
    NodeSet sub = p.lower;
    for (size_t k = 0; k < extra.size(); ++k)
      if (mask & (std::uint64_t(1) << k)) sub.insert(extra[k]);
    if (separated(p.graph, {p.treatment}, {p.outcome}, sub)) check.minimal = false;
  }
  return check;
}

// Split a node list on top-level commas; commas inside a ^do(...) suffix
// belong to the label.
inline std::vector<std::string> split_node_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')' && depth > 0) --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline int single_node_id(const MixedGraph& g, const std::string& text, const char* what) {
  std::vector<std::string> items = split_node_list(text);
  if (items.size() != 1)
    throw Error(ErrorCode::SetValuedTreatment,
                std::string(what) + " must be a single node, got '" + text + "'");
  if (!g.has_label(items[0]))
    throw Error(ErrorCode::UnknownNode, std::string(what) + " '" + items[0] + "' is not a node");
  return g.id_of(items[0]);
}

}  // namespace anterial
