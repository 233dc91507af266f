#pragma once

// Serialization at the tool boundary: graph JSON, model JSON, sample CSV and
// DOT. Floating point is emitted with 17 significant digits so a round trip
// reproduces every double exactly; CSV fields follow RFC 4180 quoting because
// counterfactual labels contain commas.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "anterial/errors.hpp"
#include "anterial/gaussian.hpp"
#include "anterial/graph.hpp"

namespace anterial {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline nlohmann::json graph_to_json(const MixedGraph& g) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  std::vector<int> order(g.n());
  for (int i = 0; i < g.n(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return node_less(g, a, b); });
  for (int i : order) j["nodes"].push_back(g.labels[i]);

  std::vector<nlohmann::json> edges;
  for (const Edge& e : g.edges) {
    int u = e.u, v = e.v;
    const char* type;
    if (e.bidirected()) {
      type = "<->";
      if (label_less(g.labels[v], g.labels[u])) std::swap(u, v);
    } else if (e.undirected()) {
      type = "---";
      if (label_less(g.labels[v], g.labels[u])) std::swap(u, v);
    } else {
      type = "-->";
      if (e.at_u == Mark::head) std::swap(u, v);
    }
    edges.push_back({{"u", g.labels[u]}, {"v", g.labels[v]}, {"type", type}});
  }
  std::sort(edges.begin(), edges.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
    auto key = [](const nlohmann::json& e) {
      return std::make_tuple(e.at("u").get<std::string>(), e.at("v").get<std::string>(),
                             e.at("type").get<std::string>());
    };
    return key(a) < key(b);
  });
  j["edges"] = edges;
  return j;
}

inline MixedGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.at("nodes").is_array())
    throw Error(ErrorCode::IoError, "graph JSON needs a 'nodes' array");
  std::vector<std::string> labels;
  for (const auto& nm : j.at("nodes")) {
    if (!nm.is_string()) throw Error(ErrorCode::IoError, "node labels must be strings");
    labels.push_back(nm.get<std::string>());
  }
  std::map<std::string, int> id;
  for (size_t k = 0; k < labels.size(); ++k) id[labels[k]] = static_cast<int>(k);

  std::vector<Edge> edges;
  if (j.contains("edges")) {
    if (!j.at("edges").is_array()) throw Error(ErrorCode::IoError, "'edges' must be an array");
    for (const auto& e : j.at("edges")) {
      for (const char* key : {"u", "v", "type"})
        if (!e.contains(key) || !e.at(key).is_string())
          throw Error(ErrorCode::IoError, std::string("edge needs string field '") + key + "'");
      std::string u = e.at("u"), v = e.at("v"), type = e.at("type");
      for (const std::string& nm : {u, v})
        if (!id.count(nm)) throw Error(ErrorCode::UnknownNode, "edge endpoint '" + nm + "'");
      if (type == "-->")
        edges.push_back(make_directed(id[u], id[v]));
      else if (type == "---")
        edges.push_back(make_undirected(id[u], id[v]));
      else if (type == "<->")
        edges.push_back(make_bidirected(id[u], id[v]));
      else
        throw Error(ErrorCode::IoError, "unknown edge type '" + type + "'");
    }
  }
  return build_graph(labels, edges);
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw Error(ErrorCode::IoError, std::string(what) + " must be a nonempty array of rows");
  const int rows = static_cast<int>(j.size());
  int cols = -1;
  for (const auto& row : j) {
    if (!row.is_array()) throw Error(ErrorCode::IoError, std::string(what) + " rows must be arrays");
    if (cols < 0) cols = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != cols)
      throw Error(ErrorCode::IoError, std::string(what) + " is ragged");
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) {
      const auto& cell = j.at(i).at(c);
      if (!cell.is_number()) throw Error(ErrorCode::IoError, std::string(what) + " has a non-number");
      m(i, c) = cell.get<double>();
    }
  return m;
}

inline nlohmann::json model_to_json(const GaussianEquilibriumModel& model) {
  nlohmann::json j;
  j["parts"] = nlohmann::json::array();
  for (const GaussianPart& part : model.parts) {
    nlohmann::json p;
    p["nodes"] = part.nodes;
    if (part.is_fixed()) {
      p["fixed"] = part.fixed;
    } else {
      p["parents"] = part.parents;
      p["precision"] = matrix_to_json(part.precision);
      if (!part.parents.empty()) p["coeff"] = matrix_to_json(part.coeff);
      nlohmann::json mean = nlohmann::json::array();
      for (int i = 0; i < part.mean.size(); ++i) mean.push_back(part.mean(i));
      p["mean"] = mean;
    }
    j["parts"].push_back(p);
  }
  j["error_cov"] = nlohmann::json::array();
  for (const auto& [key, block] : model.coupling.blocks)
    j["error_cov"].push_back(
        {{"a", key.first}, {"b", key.second}, {"block", matrix_to_json(block)}});
  return j;
}

inline GaussianEquilibriumModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("parts") || !j.at("parts").is_array())
    throw Error(ErrorCode::IoError, "model JSON needs a 'parts' array");
  GaussianEquilibriumModel model;
  for (const auto& p : j.at("parts")) {
    GaussianPart part;
    if (!p.contains("nodes") || !p.at("nodes").is_array())
      throw Error(ErrorCode::IoError, "part needs a 'nodes' array");
    for (const auto& nm : p.at("nodes")) {
      if (!nm.is_string()) throw Error(ErrorCode::IoError, "part nodes must be strings");
      part.nodes.push_back(nm.get<std::string>());
    }
    const int s = part.size();
    if (p.contains("fixed")) {
      for (const auto& v : p.at("fixed")) {
        if (!v.is_number()) throw Error(ErrorCode::IoError, "'fixed' values must be numbers");
        part.fixed.push_back(v.get<double>());
      }
    } else {
      if (p.contains("parents"))
        for (const auto& nm : p.at("parents")) {
          if (!nm.is_string()) throw Error(ErrorCode::IoError, "parents must be strings");
          part.parents.push_back(nm.get<std::string>());
        }
      if (!p.contains("precision"))
        throw Error(ErrorCode::IoError, "stochastic part needs a 'precision' matrix");
      part.precision = matrix_from_json(p.at("precision"), "precision");
      if (p.contains("coeff"))
        part.coeff = matrix_from_json(p.at("coeff"), "coeff");
      else
        part.coeff = Eigen::MatrixXd::Zero(s, static_cast<int>(part.parents.size()));
      if (p.contains("mean")) {
        const auto& mj = p.at("mean");
        if (!mj.is_array() || static_cast<int>(mj.size()) != s)
          throw Error(ErrorCode::IoError, "'mean' length must match 'nodes'");
        part.mean.resize(s);
        for (int i = 0; i < s; ++i) {
          if (!mj.at(i).is_number()) throw Error(ErrorCode::IoError, "'mean' has a non-number");
          part.mean(i) = mj.at(i).get<double>();
        }
      } else {
        part.mean = Eigen::VectorXd::Zero(s);
      }
    }
    model.parts.push_back(std::move(part));
  }
  if (j.contains("error_cov")) {
    if (!j.at("error_cov").is_array())
      throw Error(ErrorCode::IoError, "'error_cov' must be an array");
    for (const auto& e : j.at("error_cov")) {
      if (!e.contains("a") || !e.contains("b") || !e.contains("block") ||
          !e.at("a").is_number_integer() || !e.at("b").is_number_integer())
        throw Error(ErrorCode::IoError, "error_cov entries need integer 'a','b' and a 'block'");
      int a = e.at("a").get<int>(), b = e.at("b").get<int>();
      if (a > b) std::swap(a, b);
      if (a == b) throw Error(ErrorCode::IoError, "error_cov block must join two distinct parts");
      model.coupling.blocks[{a, b}] = matrix_from_json(e.at("block"), "error_cov block");
    }
  }
  return model;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t k = 0; k < line.size(); ++k) {
    char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string samples_to_csv(const SampleMatrix& samples) {
  std::string out;
  for (size_t k = 0; k < samples.labels.size(); ++k) {
    if (k) out += ',';
    out += detail::csv_field(samples.labels[k]);
  }
  out += '\n';
  for (int r = 0; r < samples.values.rows(); ++r) {
    for (int c = 0; c < samples.values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(samples.values(r, c));
    }
    out += '\n';
  }
  return out;
}

inline SampleMatrix csv_to_samples(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  SampleMatrix out;
  out.labels = detail::csv_split(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::csv_split(line);
    if (cells.size() != out.labels.size())
      throw Error(ErrorCode::IoError, "CSV row width does not match the header");
    std::vector<double> row;
    for (const std::string& cell : cells) {
      try {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::IoError, "CSV cell '" + cell + "' is not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::IoError, "CSV has no data rows");
  out.values.resize(static_cast<int>(rows.size()), static_cast<int>(out.labels.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      out.values(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  return out;
}

// Directed edges get a plain arrow, undirected none, bidirected both ends.
inline std::string graph_to_dot(const MixedGraph& g) {
  std::string out = "digraph anterial {\n";
  std::vector<int> order(g.n());
  for (int i = 0; i < g.n(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return node_less(g, a, b); });
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"' || ch == '\\') q += '\\';
      q += ch;
    }
    return q + "\"";
  };
  for (int i : order) out += "  " + quote(g.labels[i]) + ";\n";
  std::vector<std::string> lines;
  for (const Edge& e : g.edges) {
    int u = e.u, v = e.v;
    std::string attr;
    if (e.bidirected()) {
      attr = " [dir=both]";
      if (label_less(g.labels[v], g.labels[u])) std::swap(u, v);
    } else if (e.undirected()) {
      attr = " [dir=none]";
      if (label_less(g.labels[v], g.labels[u])) std::swap(u, v);
    } else if (e.at_u == Mark::head) {
      std::swap(u, v);
    }
    lines.push_back("  " + quote(g.labels[u]) + " -> " + quote(g.labels[v]) + attr + ";\n");
  }
  std::sort(lines.begin(), lines.end());
  for (const std::string& l : lines) out += l;
  return out + "}\n";
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::IoError, "invalid JSON in " + what);
  return j;
}

inline MixedGraph read_graph_file(const std::string& path) {
  return graph_from_json(parse_json(read_text_file(path), path));
}

inline GaussianEquilibriumModel read_model_file(const std::string& path) {
  return model_from_json(parse_json(read_text_file(path), path));
}

inline std::string markov_report_to_csv(const MarkovReport& report) {
  std::string out = "i,j,given,implied,mode,verdict\n";
  for (const MarkovRow& row : report) {
    std::string given;
    for (size_t k = 0; k < row.given.size(); ++k) {
      if (k) given += ' ';
      given += row.given[k];
    }
    out += detail::csv_field(row.i) + ',' + detail::csv_field(row.j) + ',' +
           detail::csv_field(given) + ',' + (row.implied ? "true" : "false") + ',' +
           (row.exact ? "exact" : "fisher-z") + ',';
    if (row.skipped)
      out += "skipped";
    else if (row.exact)
      out += row.independent ? "independent" : "dependent";
    else
      out += format_double(row.p);
    out += '\n';
  }
  return out;
}

}  // namespace anterial
