#include <catch2/catch_amalgamated.hpp>

#include "anterial/graph.hpp"
#include "anterial/separation.hpp"
#include "anterial/transforms.hpp"
#include "support/generators.hpp"

using namespace anterial;
namespace at = anterial::testing;

namespace {

MixedGraph parse(const std::vector<std::string>& labels, const std::vector<std::string>& specs) {
  std::vector<Edge> edges;
  for (const auto& s : specs) {
    auto sp1 = s.find(' ');
    auto sp2 = s.rfind(' ');
    std::string u = s.substr(0, sp1), op = s.substr(sp1 + 1, sp2 - sp1 - 1), v = s.substr(sp2 + 1);
    MixedGraph tmp;
    int iu = -1, iv = -1;
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == u) iu = static_cast<int>(i);
      if (labels[i] == v) iv = static_cast<int>(i);
    }
    if (op == "->") edges.push_back(make_directed(iu, iv));
    else if (op == "--") edges.push_back(make_undirected(iu, iv));
    else edges.push_back(make_bidirected(iu, iv));
  }
  return build_graph(labels, edges);
}

NodeSet ids(const MixedGraph& g, const std::vector<std::string>& labels) {
  NodeSet out;
  for (const auto& l : labels) out.insert(g.id_of(l));
  return out;
}

// The normative equivalence: dropping M and conditioning C must not change
// any remaining separation statement, with C folded into every query.
bool contract_holds(const MixedGraph& g, const NodeSet& m, const NodeSet& c) {
  MixedGraph h = project(g, m, c);
  std::vector<int> kept_old;
  for (int i = 0; i < g.n(); ++i)
    if (!m.count(i) && !c.count(i)) kept_old.push_back(i);
  int k = static_cast<int>(kept_old.size());
  for (int p = 0; p < k; ++p)
    for (int q = p + 1; q < k; ++q) {
      int gi = kept_old[p], gj = kept_old[q];
      int hi = h.id_of(g.labels[gi]), hj = h.id_of(g.labels[gj]);
      std::vector<int> rest;
      for (int r = 0; r < k; ++r)
        if (r != p && r != q) rest.push_back(kept_old[r]);
      for (std::uint32_t mask = 0; mask < (1u << rest.size()); ++mask) {
        NodeSet dg, dh, zg = c;
        for (size_t t = 0; t < rest.size(); ++t)
          if (mask & (1u << t)) {
            dg.insert(rest[t]);
            dh.insert(h.id_of(g.labels[rest[t]]));
            zg.insert(rest[t]);
          }
        bool in_h = separated(h, {hi}, {hj}, dh);
        bool in_g = separated(g, {gi}, {gj}, zg);
        if (in_h != in_g) {
          UNSCOPED_INFO("pair (" << g.labels[gi] << "," << g.labels[gj] << ") mask " << mask
                                 << ": projected says " << in_h << ", input says " << in_g);
          return false;
        }
      }
    }
  return true;
}

}  // namespace

TEST_CASE("marginalising a latent chain, confounder, and chain-into-undirected") {
  auto chain = parse({"1", "m", "2"}, {"1 -> m", "m -> 2"});
  CHECK(graphs_equal(marginalize(chain, ids(chain, {"m"})), parse({"1", "2"}, {"1 -> 2"})));

  auto fork = parse({"1", "m", "2"}, {"m -> 1", "m -> 2"});
  CHECK(graphs_equal(marginalize(fork, ids(fork, {"m"})), parse({"1", "2"}, {"1 <-> 2"})));

  auto mixed = parse({"1", "m", "2"}, {"1 -> m", "m -- 2"});
  CHECK(graphs_equal(marginalize(mixed, ids(mixed, {"m"})), parse({"1", "2"}, {"1 -> 2"})));
}

TEST_CASE("conditioning on a collider, a mediator, and a mixed collider") {
  auto collider = parse({"1", "c", "2"}, {"1 -> c", "2 -> c"});
  CHECK(graphs_equal(condition(collider, ids(collider, {"c"})), parse({"1", "2"}, {"1 -- 2"})));

  auto mediator = parse({"1", "c", "2"}, {"1 -> c", "c -> 2"});
  CHECK(graphs_equal(condition(mediator, ids(mediator, {"c"})), parse({"1", "2"}, {})));

  auto mixed = parse({"1", "c", "2"}, {"1 <-> c", "2 -> c"});
  CHECK(graphs_equal(condition(mixed, ids(mixed, {"c"})), parse({"1", "2"}, {"2 -> 1"})));
}

TEST_CASE("conditioning keeps bridges through anteriors of C") {
  // the undirected section 1 - c - 2 is a collider section on the walk
  // x -> 1 - c - 2 <- y, and it contains c, so x and y stay connected; every
  // kept node is anterior to c, so all surviving edges lose their arrowheads
  auto g = parse({"x", "1", "c", "2", "y"}, {"x -> 1", "1 -- c", "c -- 2", "y -> 2"});
  auto h = condition(g, ids(g, {"c"}));
  CHECK(graphs_equal(h, parse({"x", "1", "2", "y"}, {"x -- 1", "y -- 2", "x -- y"})));
  CHECK(contract_holds(g, {}, ids(g, {"c"})));
}

TEST_CASE("suppressed witness marks still force inducing-path edges") {
  // 1 and 2 are linked both by 1 -> a -> 2 and by 1 <- b -> 2; the surviving
  // single edge hides the confounding route, which k can still see
  auto g = parse({"k", "1", "2", "a", "b"},
                 {"k -> 1", "1 -> a", "a -> 2", "b -> 1", "b -> 2"});
  auto h = marginalize(g, ids(g, {"a", "b"}));
  CHECK(graphs_equal(h, parse({"k", "1", "2"}, {"k -> 1", "1 -> 2", "k -> 2"})));
  CHECK(contract_holds(g, ids(g, {"a", "b"}), {}));
}

TEST_CASE("projection validation") {
  auto cyc = parse({"1", "2", "3"}, {"1 -> 2", "2 -> 3", "3 -> 1"});
  REQUIRE_THROWS_MATCHES(marginalize(cyc, {0}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::NotAnterial;
                         }));
  auto g = parse({"1", "2", "3"}, {"1 -> 2", "2 -> 3"});
  REQUIRE_THROWS_MATCHES(project(g, {0}, {0}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::OverlappingSets;
                         }));
  REQUIRE_THROWS_AS(marginalize(g, {7}), Error);
}

TEST_CASE("empty target sets return the input verbatim") {
  at::Rng rng(411);
  for (int t = 0; t < 20; ++t) {
    auto g = at::random_anterial(5, rng);
    CHECK(graphs_equal(marginalize(g, {}), g));
    CHECK(graphs_equal(condition(g, {}), g));
  }
  // in particular a non-maximal input stays non-maximal
  auto g6 = parse({"1", "2", "3", "4", "5", "6"},
                  {"1 <-> 2", "2 <-> 3", "3 <-> 4", "2 -> 5", "5 -> 4", "3 -> 6", "6 -> 1"});
  REQUIRE_FALSE(is_maximal(g6));
  CHECK(graphs_equal(marginalize(g6, {}), g6));
}

TEST_CASE("separation contract, exhaustive three-node graphs") {
  int graphs = 0;
  at::enumerate_mixed_graphs(3, [&](const MixedGraph& g) {
    if (!classify(g).is_anterial) return;
    ++graphs;
    for (std::uint32_t mask = 1; mask < 8; ++mask) {
      NodeSet s;
      for (int b = 0; b < 3; ++b)
        if (mask & (1u << b)) s.insert(b);
      REQUIRE(contract_holds(g, s, {}));
      REQUIRE(contract_holds(g, {}, s));
    }
  });
  REQUIRE(graphs > 50);
}

TEST_CASE("separation contract, random graphs") {
  at::Rng rng(90125);
  for (int t = 0; t < 60; ++t) {
    auto g = at::random_anterial(5, rng);
    auto s = at::random_subset(5, rng, 0.4);
    REQUIRE(contract_holds(g, s, {}));
    REQUIRE(contract_holds(g, {}, s));
  }
  for (int t = 0; t < 20; ++t) {
    auto g = at::random_anterial(6, rng);
    auto s1 = at::random_subset(6, rng, 0.3);
    auto s2 = at::random_subset(6, rng, 0.3);
    for (int x : s1) s2.erase(x);
    REQUIRE(contract_holds(g, s1, s2));
  }
}

TEST_CASE("projected graphs are anterial") {
  at::Rng rng(777);
  for (int t = 0; t < 60; ++t) {
    auto g = at::random_anterial(6, rng);
    auto s = at::random_subset(6, rng, 0.4);
    CHECK(classify(marginalize(g, s)).is_anterial);
    CHECK(classify(condition(g, s)).is_anterial);
  }
}

TEST_CASE("marginalisation composes exactly") {
  auto chain = parse({"1", "a", "b", "2"}, {"1 -> a", "a -> b", "b -> 2"});
  CHECK(compose_check(chain, ids(chain, {"a"}), ids(chain, {"b"})));
  CHECK(compose_check(chain, {}, ids(chain, {"a", "b"})));

  at::Rng rng(28980);
  for (int t = 0; t < 60; ++t) {
    auto g = at::random_anterial(6, rng);
    auto m1 = at::random_subset(6, rng, 0.3);
    auto m2 = at::random_subset(6, rng, 0.3);
    for (int x : m1) m2.erase(x);
    REQUIRE(compose_check(g, m1, m2));
  }
}

TEST_CASE("marginalisation commutes with maximize up to Markov equivalence") {
  at::Rng rng(31337);
  for (int t = 0; t < 25; ++t) {
    auto g = at::random_anterial(5, rng);
    auto m = at::random_subset(5, rng, 0.3);
    auto lhs = marginalize(maximize(g), m);
    auto rhs = marginalize(g, m);
    REQUIRE(markov_equivalent(lhs, rhs));
  }
}

TEST_CASE("specializes to latent projection on DAGs") {
  at::Rng rng(404);
  for (int t = 0; t < 40; ++t) {
    auto g = at::random_dag(6, rng);
    auto m = at::random_subset(6, rng, 0.35);
    auto h = marginalize(g, m);
    CHECK(classify(h).is_anterial);
    REQUIRE(contract_holds(g, m, {}));
  }
}

TEST_CASE("separation contract, mixed projections across graph families") {
  at::Rng rng(99173);
  for (int t = 0; t < 120; ++t) {
    int n = 4 + (t % 4);
    MixedGraph g;
    switch (t % 3) {
      case 0: g = at::random_dag(n, rng); break;
      case 1: g = at::random_anterial(n, rng); break;
      default: g = at::random_chain_connected_anterial(n, rng); break;
    }
    auto m = at::random_subset(n, rng, 0.3);
    auto c = at::random_subset(n, rng, 0.25);
    for (int x : m) c.erase(x);
    REQUIRE(contract_holds(g, m, c));
  }
}

TEST_CASE("latent head-bounces force adjacency single walks cannot witness") {
  // reusing the edge 2 -> 5 lets a walk re-enter 5 with an arrowhead, which
  // turns the section {6,5} into a collider section opened by 6; no single
  // pass through the latents shows this, yet 3 and 5 become inseparable
  auto g = parse({"1", "2", "3", "4", "5", "6", "7"},
                 {"2 -> 5", "3 -> 6", "4 -- 5", "5 -- 6", "1 <-> 2", "1 <-> 3", "2 <-> 7"});
  auto h = marginalize(g, ids(g, {"2", "7"}));
  CHECK(h.adjacent(h.id_of("3"), h.id_of("5")));
  CHECK(contract_holds(g, ids(g, {"2", "7"}), {}));

  // same bounce through a conditioned collider: 6 <- 4 -> 1 <- 4 -> 6 keeps
  // 2 and 6 connected for every D, with 1 opened by C and 4 marginalised
  auto g2 = parse({"1", "2", "3", "4", "5", "6"},
                  {"1 -> 3", "4 -> 1", "1 -> 6", "3 -- 6", "4 -- 5", "4 -> 6", "2 <-> 3"});
  auto h2 = project(g2, ids(g2, {"4"}), ids(g2, {"1"}));
  CHECK(h2.adjacent(h2.id_of("2"), h2.id_of("6")));
  CHECK(contract_holds(g2, ids(g2, {"4"}), ids(g2, {"1"})));
}

TEST_CASE("projections settle to undirected cliques when everything is anterior to C") {
  // all three kept nodes reach C, so every surviving edge is undirected and
  // a naive reading of the walk marks would build a semi-directed cycle
  auto g = parse({"1", "2", "3", "4", "5"},
                 {"1 -> 2", "1 -> 3", "1 -> 4", "1 -> 5", "4 -> 2", "2 -> 5", "4 -> 3"});
  auto h = project(g, ids(g, {"3"}), ids(g, {"5"}));
  CHECK(graphs_equal(h, parse({"1", "2", "4"}, {"1 -- 2", "1 -- 4", "2 -- 4"})));
  CHECK(contract_holds(g, ids(g, {"3"}), ids(g, {"5"})));

  auto g2 = parse({"1", "2", "3", "4", "5", "6"},
                  {"1 -- 6", "2 -- 4", "2 -- 5", "5 -> 3", "1 <-> 2", "1 <-> 3"});
  auto h2 = project(g2, {}, ids(g2, {"3", "4", "6"}));
  CHECK(graphs_equal(h2, parse({"1", "2", "5"}, {"1 -- 2", "1 -- 5", "2 -- 5"})));
  CHECK(contract_holds(g2, {}, ids(g2, {"3", "4", "6"})));
}
