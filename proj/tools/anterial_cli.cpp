// Command-line front end. One verb per module operation, JSON/CSV/DOT at the
// boundary. Exit codes: 0 success, 1 usage error (stderr), 2 domain error
// (JSON body on stdout).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "anterial/adjust.hpp"
#include "anterial/causal.hpp"
#include "anterial/errors.hpp"
#include "anterial/gaussian.hpp"
#include "anterial/graph.hpp"
#include "anterial/io.hpp"
#include "anterial/separation.hpp"
#include "anterial/transforms.hpp"

namespace {

using nlohmann::json;

std::uint64_t env_seed() {
  const char* s = std::getenv("ANTERIAL_SEED");
  if (!s || !*s) return 0;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw anterial::Error(anterial::ErrorCode::InvalidQuery,
                          std::string("ANTERIAL_SEED is not an unsigned integer: ") + s);
  }
}

anterial::NodeSet parse_node_set(const anterial::MixedGraph& g, const std::string& text,
                                 const char* what) {
  anterial::NodeSet out;
  if (text.empty()) return out;
  for (const std::string& item : anterial::split_node_list(text)) {
    if (!g.has_label(item))
      throw anterial::Error(anterial::ErrorCode::UnknownNode,
                            std::string(what) + " '" + item + "' is not a node");
    out.insert(g.id_of(item));
  }
  return out;
}

std::vector<int> parse_node_list(const anterial::MixedGraph& g, const std::string& text,
                                 const char* what) {
  std::vector<int> out;
  if (text.empty()) return out;
  for (const std::string& item : anterial::split_node_list(text)) {
    if (!g.has_label(item))
      throw anterial::Error(anterial::ErrorCode::UnknownNode,
                            std::string(what) + " '" + item + "' is not a node");
    out.push_back(g.id_of(item));
  }
  return out;
}

// Shared output plumbing for every verb that produces a graph.
struct GraphOutput {
  std::string out_path;
  std::string dot_path;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--out", out_path, "also write the graph JSON to this file");
    cmd->add_option("--dot", dot_path, "also write a DOT rendering to this file");
  }

  void emit(const anterial::MixedGraph& g) const {
    std::string text = anterial::graph_to_json(g).dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) anterial::write_text_file(out_path, text);
    if (!dot_path.empty()) anterial::write_text_file(dot_path, anterial::graph_to_dot(g));
  }
};

// Witness walk rendered with every edge oriented along the walk direction.
std::string format_walk(const anterial::MixedGraph& g, const std::vector<int>& walk) {
  std::string s = g.labels[walk[0]];
  for (size_t k = 1; k + 1 < walk.size(); k += 2) {
    const anterial::Edge& e = g.edges[walk[k]];
    int y = walk[k + 1];
    const char* glyph = "--";
    if (e.bidirected()) {
      glyph = "<->";
    } else if (e.directed()) {
      glyph = e.mark_at(y) == anterial::Mark::head ? "->" : "<-";
    }
    s += std::string(" ") + glyph + " " + g.labels[y];
  }
  return s;
}

json classify_to_json(const anterial::GraphClassReport& r) {
  json witnesses = json::array();
  for (const auto& [predicate, detail] : r.witnesses)
    witnesses.push_back({{"predicate", predicate}, {"detail", detail}});
  return json{{"is_chain_mixed", r.is_chain_mixed},
              {"is_anterial", r.is_anterial},
              {"is_chain_connected", r.is_chain_connected},
              {"is_ancestral", r.is_ancestral},
              {"is_chain_graph", r.is_chain_graph},
              {"is_dag", r.is_dag},
              {"is_maximal", r.is_maximal},
              {"witnesses", witnesses}};
}

std::string error_message(const anterial::Error& e) {
  std::string text = e.what();
  std::string prefix = std::string(anterial::error_code_name(e.code())) + ": ";
  if (text.rfind(prefix, 0) == 0) text.erase(0, prefix.size());
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anterial: causal graphical models on anterial graphs"};
  app.require_subcommand(1);
  int exit_code = 0;

  // validate
  std::string va_path;
  auto* va = app.add_subcommand("validate", "classify a mixed graph (anterial, ancestral, ...)");
  va->add_option("graph", va_path, "graph JSON file")->required();
  va->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(va_path);
    std::cout << classify_to_json(anterial::classify(g)).dump(2) << "\n";
  });

  // separate
  std::string se_path, se_a, se_b, se_given;
  auto* se = app.add_subcommand("separate", "test walk separation of A and B given Z");
  se->add_option("graph", se_path, "graph JSON file")->required();
  se->add_option("--a", se_a, "left node set (comma separated)")->required();
  se->add_option("--b", se_b, "right node set (comma separated)")->required();
  se->add_option("--given", se_given, "conditioning set (comma separated)");
  se->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(se_path);
    anterial::SeparationQuery q;
    q.a = parse_node_set(g, se_a, "--a node");
    q.b = parse_node_set(g, se_b, "--b node");
    q.z = parse_node_set(g, se_given, "--given node");
    auto walk = anterial::connecting_walk(g, q);
    if (!walk) {
      std::cout << "separated\n";
    } else {
      std::cout << "connected\n" << format_walk(g, *walk) << "\n";
    }
  });

  // marginalize
  std::string ma_path, ma_over;
  GraphOutput ma_out;
  auto* ma = app.add_subcommand("marginalize", "project a node set out of the margin");
  ma->add_option("graph", ma_path, "graph JSON file")->required();
  ma->add_option("--over", ma_over, "nodes to marginalise over")->required();
  ma_out.add_flags(ma);
  ma->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(ma_path);
    ma_out.emit(anterial::marginalize(g, parse_node_set(g, ma_over, "--over node")));
  });

  // condition
  std::string co_path, co_on;
  GraphOutput co_out;
  auto* co = app.add_subcommand("condition", "project a graph onto the context of a node set");
  co->add_option("graph", co_path, "graph JSON file")->required();
  co->add_option("--on", co_on, "nodes to condition on")->required();
  co_out.add_flags(co);
  co->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(co_path);
    co_out.emit(anterial::condition(g, parse_node_set(g, co_on, "--on node")));
  });

  // maximize
  std::string mx_path;
  GraphOutput mx_out;
  auto* mx = app.add_subcommand("maximize", "add edges for primitive inducing paths");
  mx->add_option("graph", mx_path, "graph JSON file")->required();
  mx_out.add_flags(mx);
  mx->callback([&] { mx_out.emit(anterial::maximize(anterial::read_graph_file(mx_path))); });

  // intervene
  std::string iv_path, iv_on;
  GraphOutput iv_out;
  auto* iv = app.add_subcommand("intervene", "graphical intervention on a treatment set");
  iv->add_option("graph", iv_path, "graph JSON file")->required();
  iv->add_option("--on", iv_on, "treated nodes")->required();
  iv_out.add_flags(iv);
  iv->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(iv_path);
    iv_out.emit(anterial::do_graph(g, parse_node_set(g, iv_on, "--on node")));
  });

  // counterfactual
  std::string cf_path, cf_on;
  GraphOutput cf_out;
  auto* cf = app.add_subcommand("counterfactual", "two-world counterfactual graph");
  cf->add_option("graph", cf_path, "graph JSON file")->required();
  cf->add_option("--on", cf_on, "treated nodes")->required();
  cf_out.add_flags(cf);
  cf->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(cf_path);
    cf_out.emit(anterial::phi(g, parse_node_set(g, cf_on, "--on node")));
  });

  // swaig
  std::string sw_path, sw_on;
  GraphOutput sw_out;
  auto* sw = app.add_subcommand("swaig", "single-world intervention graph on an anterial input");
  sw->add_option("graph", sw_path, "graph JSON file")->required();
  sw->add_option("--on", sw_on, "treated nodes")->required();
  sw_out.add_flags(sw);
  sw->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(sw_path);
    sw_out.emit(anterial::swaig(g, parse_node_set(g, sw_on, "--on node")));
  });

  // pw-swig
  std::string pw_path, pw_on;
  GraphOutput pw_out;
  auto* pw = app.add_subcommand("pw-swig", "parallel-worlds graph for an ordered treatment list");
  pw->add_option("dag", pw_path, "DAG JSON file")->required();
  pw->add_option("--on", pw_on, "ordered treatment nodes")->required();
  pw_out.add_flags(pw);
  pw->callback([&] {
    anterial::MixedGraph g = anterial::read_graph_file(pw_path);
    pw_out.emit(anterial::parallel_worlds_swig(g, parse_node_list(g, pw_on, "--on node")));
  });

  // adjust
  std::string aj_path, aj_treatment, aj_outcome, aj_lower, aj_upper;
  bool aj_observational = false;
  auto* aj = app.add_subcommand("adjust", "constrained minimal adjustment set selection");
  aj->add_option("graph", aj_path, "graph JSON file (e.g. a counterfactual graph)")->required();
  aj->add_option("--treatment", aj_treatment, "treatment node")->required();
  aj->add_option("--outcome", aj_outcome, "outcome node")->required();
  aj->add_option("--lower", aj_lower, "nodes that must enter the set");
  auto* aj_upper_opt = aj->add_option("--upper", aj_upper, "nodes allowed in the set (default: all others)");
  aj->add_flag("--observational-only", aj_observational, "drop do-superscripted labels from the upper bound");
  aj->callback([&] {
    anterial::AdjustmentProblem p;
    p.graph = anterial::read_graph_file(aj_path);
    p.treatment = anterial::single_node_id(p.graph, aj_treatment, "--treatment");
    p.outcome = anterial::single_node_id(p.graph, aj_outcome, "--outcome");
    p.lower = parse_node_set(p.graph, aj_lower, "--lower node");
    if (aj_upper_opt->count() > 0) {
      p.upper = parse_node_set(p.graph, aj_upper, "--upper node");
    } else {
      for (int i = 0; i < p.graph.n(); ++i)
        if (i != p.treatment && i != p.outcome) p.upper.insert(i);
    }
    if (aj_observational) {
      for (auto it = p.upper.begin(); it != p.upper.end();) {
        if (!anterial::split_do_label(p.graph.labels[*it]).second.empty())
          it = p.upper.erase(it);
        else
          ++it;
      }
      for (int i : p.lower)
        if (!anterial::split_do_label(p.graph.labels[i]).second.empty())
          throw anterial::Error(anterial::ErrorCode::InvalidProblem,
                                "--observational-only conflicts with intervened node '" +
                                    p.graph.labels[i] + "' in --lower");
    }
    anterial::AdjustmentResult r = anterial::select_adjustment(p);
    if (!r.feasible) {
      std::cout << json{{"outcome", "infeasible"}}.dump(2) << "\n";
      exit_code = 2;
      return;
    }
    std::vector<std::string> s_labels;
    for (int i : r.s) s_labels.push_back(p.graph.labels[i]);
    std::sort(s_labels.begin(), s_labels.end(), anterial::label_less);
    json trace = json::array();
    for (const anterial::TraceStep& step : r.trace)
      trace.push_back({{"removed", step.removed}, {"graph", step.graph}});
    std::cout << json{{"outcome", "feasible"}, {"S", s_labels}, {"trace", trace}}.dump(2)
              << "\n";
  });

  // simulate
  std::string si_path, si_mode = "equilibrium", si_csv;
  int si_n = 10000, si_burn = 10000;
  std::uint64_t si_seed = env_seed();
  auto* si = app.add_subcommand("simulate", "draw samples and print them as CSV");
  si->add_option("model", si_path, "model JSON file")->required();
  si->add_option("--n", si_n, "number of records");
  si->add_option("--mode", si_mode, "equilibrium or gibbs")
      ->check(CLI::IsMember({"equilibrium", "gibbs"}));
  si->add_option("--burn-in", si_burn, "Gibbs burn-in sweeps");
  si->add_option("--seed", si_seed, "RNG seed (default: ANTERIAL_SEED or 0)");
  si->add_option("--csv", si_csv, "also write the CSV to this file");
  si->callback([&] {
    anterial::GaussianEquilibriumModel m = anterial::read_model_file(si_path);
    anterial::SampleMatrix samples = si_mode == "gibbs"
                                         ? anterial::gibbs_sample(m, si_n, si_burn, si_seed)
                                         : anterial::sample_equilibrium(m, si_n, si_seed);
    std::string text = anterial::samples_to_csv(samples);
    std::cout << text;
    if (!si_csv.empty()) anterial::write_text_file(si_csv, text);
  });

  // markov-report
  std::string mr_path, mr_graph, mr_csv, mr_mode = "equilibrium";
  bool mr_exact = false;
  int mr_n = 10000, mr_burn = 10000;
  std::uint64_t mr_seed = env_seed();
  auto* mr = app.add_subcommand("markov-report",
                                "Fisher-Z or exact CI verdict for every pairwise hypothesis");
  mr->add_option("model", mr_path, "model JSON file")->required();
  mr->add_option("--graph", mr_graph, "graph JSON file (default: the corresponding graph)");
  mr->add_flag("--exact", mr_exact, "use the closed-form law instead of samples");
  mr->add_option("--n", mr_n, "number of records in sampled mode");
  mr->add_option("--mode", mr_mode, "equilibrium or gibbs")
      ->check(CLI::IsMember({"equilibrium", "gibbs"}));
  mr->add_option("--burn-in", mr_burn, "Gibbs burn-in sweeps");
  mr->add_option("--seed", mr_seed, "RNG seed (default: ANTERIAL_SEED or 0)");
  mr->add_option("--csv", mr_csv, "also write the report CSV to this file");
  mr->callback([&] {
    anterial::GaussianEquilibriumModel m = anterial::read_model_file(mr_path);
    anterial::MixedGraph g = mr_graph.empty() ? anterial::corresponding_graph(m)
                                              : anterial::read_graph_file(mr_graph);
    anterial::MarkovReport report;
    if (mr_exact) {
      report = anterial::markov_report(g, anterial::joint_law(m));
    } else {
      anterial::SampleMatrix samples =
          mr_mode == "gibbs" ? anterial::gibbs_sample(m, mr_n, mr_burn, mr_seed)
                             : anterial::sample_equilibrium(m, mr_n, mr_seed);
      report = anterial::markov_report(g, samples);
    }
    std::string text = anterial::markov_report_to_csv(report);
    std::cout << text;
    if (!mr_csv.empty()) anterial::write_text_file(mr_csv, text);
  });

  // corresponding-graph
  std::string cg_path;
  GraphOutput cg_out;
  auto* cg = app.add_subcommand("corresponding-graph", "graph induced by a model's parameters");
  cg->add_option("model", cg_path, "model JSON file")->required();
  cg_out.add_flags(cg);
  cg->callback([&] {
    cg_out.emit(anterial::corresponding_graph(anterial::read_model_file(cg_path)));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const anterial::Error& e) {
    json body{{"error", anterial::error_code_name(e.code())}, {"message", error_message(e)}};
    std::cout << body.dump(2) << "\n";
    return 2;
  }
  return exit_code;
}
