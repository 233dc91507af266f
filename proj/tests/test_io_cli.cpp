#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "anterial/adjust.hpp"
#include "anterial/causal.hpp"
#include "anterial/gaussian.hpp"
#include "anterial/graph.hpp"
#include "anterial/io.hpp"
#include "support/generators.hpp"
#include "support/models.hpp"
#include "support/oracles.hpp"

using namespace anterial;
namespace at = anterial::testing;
using nlohmann::json;

namespace {

std::string env_or_fail(const char* name) {
  const char* v = std::getenv(name);
  REQUIRE(v != nullptr);
  return v;
}

std::filesystem::path scratch_dir() {
  static std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("anterial_cli_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::filesystem::path scratch_file(const std::string& name, const std::string& content) {
  auto p = scratch_dir() / name;
  write_text_file(p.string(), content);
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the binary through the shell so flags, env prefixes and quoting behave
// exactly as they would for a user.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  auto out_path = scratch_dir() / ("stdout_" + std::to_string(counter) + ".txt");
  auto err_path = scratch_dir() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = env_prefix + env_or_fail("ANTERIAL_CLI") + " " + args + " > " +
                    out_path.string() + " 2> " + err_path.string();
  int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_text_file(out_path.string());
  r.err = read_text_file(err_path.string());
  return r;
}

MixedGraph parse(const std::vector<std::string>& labels, const std::vector<std::string>& edges) {
  MixedGraph tmp;
  tmp.labels = labels;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) tmp.index[labels[i]] = i;
  std::vector<Edge> es;
  for (const std::string& s : edges) {
    auto pos = s.find(' ');
    auto pos2 = s.find(' ', pos + 1);
    std::string u = s.substr(0, pos), op = s.substr(pos + 1, pos2 - pos - 1),
                v = s.substr(pos2 + 1);
    int a = tmp.index.at(u), b = tmp.index.at(v);
    if (op == "->") es.push_back(make_directed(a, b));
    else if (op == "--") es.push_back(make_undirected(a, b));
    else es.push_back(make_bidirected(a, b));
  }
  return build_graph(tmp.labels, es);
}

const std::string kDemoGraph = R"({"nodes":["1","2","3","4","5","6"],"edges":[
  {"u":"1","v":"2","type":"-->"},{"u":"2","v":"3","type":"---"},
  {"u":"2","v":"5","type":"-->"},{"u":"4","v":"5","type":"-->"},
  {"u":"5","v":"6","type":"---"}]})";

}  // namespace

TEST_CASE("graph json round trip is exact") {
  at::Rng rng(41);
  for (int rep = 0; rep < 60; ++rep) {
    MixedGraph g = at::random_anterial(1 + static_cast<int>(rng() % 7), rng);
    json j = graph_to_json(g);
    MixedGraph back = graph_from_json(j);
    REQUIRE(graphs_equal(g, back));
    REQUIRE(graph_to_json(back).dump() == j.dump());
  }

  // Do-superscripted labels survive verbatim, commas included.
  MixedGraph g = parse({"1", "2^do(1,3)", "3"}, {"1 -> 2^do(1,3)", "2^do(1,3) <-> 3"});
  MixedGraph back = graph_from_json(graph_to_json(g));
  REQUIRE(graphs_equal(g, back));
}

TEST_CASE("graph json rejects malformed input") {
  CHECK_THROWS_AS(graph_from_json(json::parse(R"({"edges":[]})")), Error);
  CHECK_THROWS_AS(graph_from_json(json::parse(R"({"nodes":["1"],"edges":[
    {"u":"1","v":"9","type":"-->"}]})")),
                  Error);
  CHECK_THROWS_AS(graph_from_json(json::parse(R"({"nodes":["1","2"],"edges":[
    {"u":"1","v":"2","type":">>"}]})")),
                  Error);
  CHECK_THROWS_AS(parse_json("{nope", "graph"), Error);
}

TEST_CASE("model json round trip preserves every coefficient bit") {
  at::Rng rng(42);
  for (int rep = 0; rep < 40; ++rep) {
    GaussianEquilibriumModel m = at::random_model(2 + static_cast<int>(rng() % 6), rng);
    json j = model_to_json(m);
    GaussianEquilibriumModel back = model_from_json(j);
    REQUIRE(model_to_json(back).dump() == j.dump());
    REQUIRE(back.parts.size() == m.parts.size());
    for (size_t k = 0; k < m.parts.size(); ++k) {
      REQUIRE(back.parts[k].nodes == m.parts[k].nodes);
      REQUIRE(back.parts[k].parents == m.parts[k].parents);
      REQUIRE(back.parts[k].fixed == m.parts[k].fixed);
      REQUIRE((back.parts[k].precision.array() == m.parts[k].precision.array()).all());
      REQUIRE((back.parts[k].coeff.array() == m.parts[k].coeff.array()).all());
      REQUIRE((back.parts[k].mean.array() == m.parts[k].mean.array()).all());
    }
    REQUIRE(back.coupling.blocks.size() == m.coupling.blocks.size());
    for (const auto& [key, block] : m.coupling.blocks) {
      REQUIRE(back.coupling.blocks.count(key) == 1);
      REQUIRE((back.coupling.blocks.at(key).array() == block.array()).all());
    }
  }
}

TEST_CASE("model json rejects malformed input") {
  json good = json::parse(R"({"parts":[{"nodes":["1"],"precision":[[1.0]]}]})");
  CHECK_NOTHROW(model_from_json(good));

  json ragged = good;
  ragged["parts"][0]["precision"] = json::parse("[[1.0],[2.0,3.0]]");
  CHECK_THROWS_AS(model_from_json(ragged), Error);

  json self_block = json::parse(
      R"({"parts":[{"nodes":["1"],"precision":[[1.0]]},{"nodes":["2"],"precision":[[1.0]]}],
          "error_cov":[{"a":1,"b":1,"block":[[0.2]]}]})");
  CHECK_THROWS_AS(model_from_json(self_block), Error);
}

TEST_CASE("samples csv survives a round trip at full precision") {
  at::Rng rng(43);
  GaussianEquilibriumModel m = at::random_model(5, rng);
  SampleMatrix s = sample_equilibrium(m, 37, 99);
  // Comma-bearing do-labels must be quoted, not split.
  s.labels[0] = do_label(s.labels[0], {"2", "3"});
  std::string text = samples_to_csv(s);
  SampleMatrix back = csv_to_samples(text);
  REQUIRE(back.labels == s.labels);
  REQUIRE(back.values.rows() == s.values.rows());
  REQUIRE(back.values.cols() == s.values.cols());
  for (int i = 0; i < s.values.rows(); ++i)
    for (int j = 0; j < s.values.cols(); ++j)
      REQUIRE(back.values(i, j) == s.values(i, j));

  CHECK_THROWS_AS(csv_to_samples("a,b\n1.0\n"), Error);
  CHECK_THROWS_AS(csv_to_samples("a,b\n1.0,zzz\n"), Error);
  CHECK_THROWS_AS(csv_to_samples(""), Error);
}

TEST_CASE("dot export lists every node and edge with the right arrowheads") {
  MixedGraph g = parse({"1", "2", "3"}, {"1 -> 2", "2 -- 3", "1 <-> 3"});
  std::string dot = graph_to_dot(g);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("\"1\" -> \"2\";") != std::string::npos);
  CHECK(dot.find("\"2\" -> \"3\" [dir=none];") != std::string::npos);
  CHECK(dot.find("\"1\" -> \"3\" [dir=both];") != std::string::npos);
}

TEST_CASE("shipped models load and match their documented graphs") {
  std::string data = env_or_fail("ANTERIAL_DATA");
  auto g1 = corresponding_graph(read_model_file(data + "/model_g1.json"));
  auto g2 = corresponding_graph(read_model_file(data + "/model_g2.json"));
  auto g3 = corresponding_graph(read_model_file(data + "/model_g3.json"));
  CHECK(at::same_graph_up_to_order(
      g1, parse({"1", "2", "3", "4", "5", "6"},
                {"1 -> 2", "2 -- 3", "2 -> 5", "4 -> 5", "5 -- 6"})));
  CHECK(at::same_graph_up_to_order(
      g2, parse({"1", "2", "3", "4"}, {"1 -> 3", "2 -> 4", "3 -- 4"})));
  CHECK(at::same_graph_up_to_order(
      g3, parse({"1", "2", "3", "4", "5"}, {"1 -> 3", "2 -> 5", "3 -- 4", "4 -- 5"})));
}

TEST_CASE("cli validate reports the classification") {
  auto path = scratch_file("demo.json", kDemoGraph);
  CliResult r = run_cli("validate " + path.string());
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["is_anterial"] == true);
  CHECK(j["is_chain_connected"] == true);
  CHECK(j["is_ancestral"] == false);
  CHECK(j["is_dag"] == false);

  auto cyc = scratch_file("cyclic.json", R"({"nodes":["1","2","3"],"edges":[
    {"u":"1","v":"2","type":"-->"},{"u":"2","v":"3","type":"-->"},
    {"u":"3","v":"1","type":"-->"}]})");
  CliResult rc = run_cli("validate " + cyc.string());
  REQUIRE(rc.code == 0);
  json jc = json::parse(rc.out);
  CHECK(jc["is_anterial"] == false);
  CHECK(jc["witnesses"].size() > 0);
}

TEST_CASE("cli separate prints a verdict and a witness walk") {
  auto path = scratch_file("demo.json", kDemoGraph);
  CliResult sep = run_cli("separate " + path.string() + " --a 1 --b 4");
  REQUIRE(sep.code == 0);
  CHECK(sep.out == "separated\n");

  CliResult con = run_cli("separate " + path.string() + " --a 1 --b 4 --given 5");
  REQUIRE(con.code == 0);
  CHECK(con.out == "connected\n1 -> 2 -> 5 <- 4\n");
}

TEST_CASE("cli transform verbs emit graphs that match the library") {
  auto path = scratch_file("demo.json", kDemoGraph);
  MixedGraph g = graph_from_json(json::parse(kDemoGraph));

  CliResult marg = run_cli("marginalize " + path.string() + " --over 2,3");
  REQUIRE(marg.code == 0);
  CHECK(graphs_equal(graph_from_json(json::parse(marg.out)), marginalize(g, {1, 2})));

  CliResult cond = run_cli("condition " + path.string() + " --on 6");
  REQUIRE(cond.code == 0);
  CHECK(graphs_equal(graph_from_json(json::parse(cond.out)), condition(g, {5})));

  CliResult maxi = run_cli("maximize " + path.string());
  REQUIRE(maxi.code == 0);
  CHECK(graphs_equal(graph_from_json(json::parse(maxi.out)), maximize(g)));
}

TEST_CASE("cli out and dot flags mirror stdout") {
  auto path = scratch_file("demo.json", kDemoGraph);
  auto out_json = scratch_dir() / "max_out.json";
  auto out_dot = scratch_dir() / "max_out.dot";
  CliResult r = run_cli("maximize " + path.string() + " --out " + out_json.string() +
                        " --dot " + out_dot.string());
  REQUIRE(r.code == 0);
  CHECK(read_text_file(out_json.string()) == r.out);
  MixedGraph g = graph_from_json(json::parse(r.out));
  CHECK(read_text_file(out_dot.string()) == graph_to_dot(g));

  // Round trip through the emitted file reproduces the bytes.
  CliResult again = run_cli("maximize " + out_json.string());
  REQUIRE(again.code == 0);
  CHECK(again.out == r.out);
}

TEST_CASE("cli causal verbs match the library constructions") {
  auto path = scratch_file("demo.json", kDemoGraph);
  MixedGraph g = graph_from_json(json::parse(kDemoGraph));

  CliResult iv = run_cli("intervene " + path.string() + " --on 2,4");
  REQUIRE(iv.code == 0);
  CHECK(graphs_equal(graph_from_json(json::parse(iv.out)), do_graph(g, {1, 3})));

  CliResult cf = run_cli("counterfactual " + path.string() + " --on 2");
  REQUIRE(cf.code == 0);
  CHECK(at::same_graph_up_to_order(graph_from_json(json::parse(cf.out)), phi(g, {1})));

  CliResult sw = run_cli("swaig " + path.string() + " --on 2");
  REQUIRE(sw.code == 0);
  CHECK(at::same_graph_up_to_order(graph_from_json(json::parse(sw.out)), swaig(g, {1})));

  auto dag = scratch_file("dag.json", R"({"nodes":["1","2","3"],"edges":[
    {"u":"1","v":"2","type":"-->"},{"u":"2","v":"3","type":"-->"}]})");
  MixedGraph gd = read_graph_file(dag.string());
  CliResult pw = run_cli("pw-swig " + dag.string() + " --on 1,2");
  REQUIRE(pw.code == 0);
  CHECK(at::same_graph_up_to_order(graph_from_json(json::parse(pw.out)),
                                   parallel_worlds_swig(gd, {0, 1})));
}

TEST_CASE("cli adjust reports the set, the trace and infeasibility") {
  auto path = scratch_file("adj.json", R"({"nodes":["1","2","3","4"],"edges":[
    {"u":"2","v":"1","type":"-->"},{"u":"2","v":"3","type":"-->"}]})");
  CliResult r = run_cli("adjust " + path.string() + " --treatment 1 --outcome 3 --upper 2,4");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["outcome"] == "feasible");
  CHECK(j["S"] == json::array({"2"}));
  REQUIRE(j["trace"].size() == 1);
  CHECK(j["trace"][0]["removed"] == "4");
  CHECK(j["trace"][0]["graph"] == "{2 -> 1, 2 -> 3}");

  auto bad = scratch_file("adj_bad.json", R"({"nodes":["c","o"],"edges":[
    {"u":"c","v":"o","type":"<->"}]})");
  CliResult inf = run_cli("adjust " + bad.string() + " --treatment c --outcome o");
  CHECK(inf.code == 2);
  CHECK(json::parse(inf.out) == json{{"outcome", "infeasible"}});

  // The upper bound defaults to every other node; the flag restricts it.
  auto do_graph_file = scratch_file("adj_do.json", R"x({"nodes":["c","z^do(c)","o"],"edges":[
    {"u":"z^do(c)","v":"c","type":"-->"},{"u":"z^do(c)","v":"o","type":"-->"}]})x");
  CliResult with_do = run_cli("adjust " + do_graph_file.string() + " --treatment c --outcome o");
  REQUIRE(with_do.code == 0);
  CHECK(json::parse(with_do.out)["S"] == json::array({"z^do(c)"}));
  CliResult obs_only = run_cli("adjust " + do_graph_file.string() +
                               " --treatment c --outcome o --observational-only");
  CHECK(obs_only.code == 2);
  CHECK(json::parse(obs_only.out) == json{{"outcome", "infeasible"}});
}

TEST_CASE("cli simulate is byte reproducible and honors the env seed") {
  std::string model = env_or_fail("ANTERIAL_DATA") + "/model_g2.json";
  CliResult a = run_cli("simulate " + model + " --n 50 --seed 7");
  CliResult b = run_cli("simulate " + model + " --n 50 --seed 7");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);

  CliResult via_env = run_cli("simulate " + model + " --n 50", "ANTERIAL_SEED=7 ");
  CHECK(via_env.out == a.out);
  CliResult other = run_cli("simulate " + model + " --n 50 --seed 8");
  CHECK(other.out != a.out);

  SampleMatrix s = csv_to_samples(a.out);
  CHECK(s.labels == std::vector<std::string>{"1", "2", "3", "4"});
  CHECK(s.values.rows() == 50);

  CliResult gibbs = run_cli("simulate " + model + " --n 20 --mode gibbs --burn-in 100 --seed 3");
  REQUIRE(gibbs.code == 0);
  CHECK(csv_to_samples(gibbs.out).values.rows() == 20);

  auto csv_copy = scratch_dir() / "sim_copy.csv";
  CliResult with_file = run_cli("simulate " + model + " --n 50 --seed 7 --csv " + csv_copy.string());
  CHECK(read_text_file(csv_copy.string()) == a.out);
}

TEST_CASE("cli markov-report exact output is pinned") {
  std::string model = env_or_fail("ANTERIAL_DATA") + "/model_g1.json";
  CliResult r = run_cli("markov-report " + model + " --exact");
  REQUIRE(r.code == 0);
  CHECK(r.out ==
        "i,j,given,implied,mode,verdict\n"
        "1,2,3,false,exact,dependent\n"
        "1,3,2,true,exact,independent\n"
        "1,4,,true,exact,independent\n"
        "1,5,2 3 4 6,true,exact,independent\n"
        "1,6,2 3 4 5,true,exact,independent\n"
        "2,3,1,false,exact,dependent\n"
        "2,4,1 3,true,exact,independent\n"
        "2,5,1 3 4 6,false,exact,dependent\n"
        "2,6,1 3 4 5,true,exact,independent\n"
        "3,4,1 2,true,exact,independent\n"
        "3,5,1 2 4 6,true,exact,independent\n"
        "3,6,1 2 4 5,true,exact,independent\n"
        "4,5,1 2 3 6,false,exact,dependent\n"
        "4,6,1 2 3 5,true,exact,independent\n"
        "5,6,1 2 3 4,false,exact,dependent\n");
}

TEST_CASE("cli markov-report sampled mode separates implied from non-implied") {
  std::string model = env_or_fail("ANTERIAL_DATA") + "/model_g2.json";
  auto report_csv = scratch_dir() / "report.csv";
  CliResult r = run_cli("markov-report " + model + " --n 10000 --seed 2026 --csv " +
                        report_csv.string());
  REQUIRE(r.code == 0);
  CHECK(read_text_file(report_csv.string()) == r.out);

  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "i,j,given,implied,mode,verdict");
  int checked = 0;
  while (std::getline(lines, line)) {
    auto fields = anterial::detail::csv_split(line);
    REQUIRE(fields.size() == 6);
    REQUIRE(fields[4] == "fisher-z");
    double p = std::stod(fields[5]);
    if (fields[3] == "true") CHECK(p > 0.01);
    else CHECK(p < 1e-3);
    ++checked;
  }
  CHECK(checked == 6);

  // A custom graph file overrides the corresponding graph.
  auto alt = scratch_file("alt.json", R"({"nodes":["1","2","3","4"],"edges":[]})");
  CliResult over = run_cli("markov-report " + model + " --exact --graph " + alt.string());
  REQUIRE(over.code == 0);
  // The empty graph implies independence everywhere; the model disagrees somewhere.
  CHECK(over.out.find("false") == std::string::npos);
  CHECK(over.out.find("dependent") != std::string::npos);
}

TEST_CASE("cli corresponding-graph emits the shipped structures") {
  std::string data = env_or_fail("ANTERIAL_DATA");
  CliResult r = run_cli("corresponding-graph " + data + "/model_g3.json");
  REQUIRE(r.code == 0);
  CHECK(graphs_equal(graph_from_json(json::parse(r.out)),
                     parse({"1", "2", "3", "4", "5"},
                           {"1 -> 3", "2 -> 5", "3 -- 4", "4 -- 5"})));
}

TEST_CASE("cli exit codes distinguish usage from domain errors") {
  auto path = scratch_file("demo.json", kDemoGraph);

  CliResult usage = run_cli("marginalize " + path.string());
  CHECK(usage.code == 1);
  CHECK(usage.out.empty());
  CHECK(!usage.err.empty());

  CliResult unknown_verb = run_cli("frobnicate " + path.string());
  CHECK(unknown_verb.code == 1);

  CliResult domain = run_cli("separate " + path.string() + " --a 1 --b 99");
  CHECK(domain.code == 2);
  json j = json::parse(domain.out);
  CHECK(j["error"] == "UnknownNode");
  CHECK(j["message"].get<std::string>().find("99") != std::string::npos);

  CliResult missing = run_cli("validate " + (scratch_dir() / "nope.json").string());
  CHECK(missing.code == 2);
  CHECK(json::parse(missing.out)["error"] == "IoError");

  CliResult setval = run_cli("adjust " + path.string() + " --treatment 1,2 --outcome 4");
  CHECK(setval.code == 2);
  CHECK(json::parse(setval.out)["error"] == "SetValuedTreatment");
}
