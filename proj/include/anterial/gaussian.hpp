#pragma once

// Gaussian structural equilibrium models. A model is an ordered list of parts;
// part τ resolves to X_τ = μ_τ + B_τ x_pa(τ) + L_τ ε_τ with L_τ the lower
// Cholesky factor of K_τ^{-1}, so J^τ(.|x_pa) = N(μ_τ + B_τ x_pa, K_τ^{-1}).
// The ε blocks are standard normal with cross-part covariance R. Parts whose
// coordinates are pinned to constants (point masses after an intervention)
// carry a `fixed` value vector instead of Gaussian data.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "anterial/causal.hpp"
#include "anterial/errors.hpp"
#include "anterial/graph.hpp"
#include "anterial/random.hpp"
#include "anterial/separation.hpp"

namespace anterial {

struct GaussianPart {
  std::vector<std::string> nodes;
  std::vector<std::string> parents;
  Eigen::MatrixXd precision;  // |τ|×|τ|, symmetric, min eigenvalue > 1e-10
  Eigen::MatrixXd coeff;      // |τ|×|pa(τ)|
  Eigen::VectorXd mean;       // |τ|
  std::vector<double> fixed;  // nonempty: point mass, Gaussian fields unused

  bool is_fixed() const { return !fixed.empty(); }
  int size() const { return static_cast<int>(nodes.size()); }
};

// Symmetric block matrix R over part errors; diagonal blocks are implicitly
// identity, so only declared off-diagonal blocks are stored (keys a < b).
struct ErrorCoupling {
  std::map<std::pair<int, int>, Eigen::MatrixXd> blocks;
};

struct GaussianEquilibriumModel {
  std::vector<GaussianPart> parts;
  ErrorCoupling coupling;
};

enum class Provenance { equilibrium, gibbs, coupled };

struct SampleMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;  // one row per record
  Provenance provenance = Provenance::equilibrium;

  int column(const std::string& label) const {
    for (size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == label) return static_cast<int>(k);
    return -1;
  }
};

struct JointLaw {
  std::vector<std::string> labels;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int column(const std::string& label) const {
    for (size_t k = 0; k < labels.size(); ++k)
      if (labels[k] == label) return static_cast<int>(k);
    return -1;
  }
};

struct InterventionSpec {
  std::map<std::string, double> values;
};

namespace detail {

constexpr double kEdgeTol = 1e-9;

// Connected components of the |K| > tol support, each sorted ascending.
inline std::vector<std::vector<int>> support_components(const Eigen::MatrixXd& k,
                                                        double tol = kEdgeTol) {
  const int s = static_cast<int>(k.rows());
  std::vector<int> comp(s, -1);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < s; ++start) {
    if (comp[start] >= 0) continue;
    int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<int> stack{start};
    comp[start] = id;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      out[id].push_back(u);
      for (int v = 0; v < s; ++v)
        if (v != u && comp[v] < 0 && std::abs(k(u, v)) > tol) {
          comp[v] = id;
          stack.push_back(v);
        }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

// Lower Cholesky factor of K^{-1}.
inline Eigen::MatrixXd error_loading(const Eigen::MatrixXd& k) {
  const int s = static_cast<int>(k.rows());
  Eigen::MatrixXd sigma = k.llt().solve(Eigen::MatrixXd::Identity(s, s));
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::InvalidModel, "part precision is numerically singular");
  return llt.matrixL();
}

// Coefficient of parent k in the full conditional mean of coordinate i given
// the rest of its part: B[i,k] + K_ii^{-1} Σ_{j≠i} K_ij B[j,k].
inline double conditional_coefficient(const Eigen::MatrixXd& k, const Eigen::MatrixXd& b,
                                      int i, int col) {
  double acc = b(i, col);
  for (int j = 0; j < k.rows(); ++j)
    if (j != i) acc += k(i, j) * b(j, col) / k(i, i);
  return acc;
}

}  // namespace detail

inline void validate_model(const GaussianEquilibriumModel& model) {
  if (model.parts.empty())
    throw Error(ErrorCode::InvalidModel, "model has no parts");

  std::set<std::string> seen;
  std::vector<std::set<std::string>> earlier(model.parts.size() + 1);
  for (size_t p = 0; p < model.parts.size(); ++p) {
    const GaussianPart& part = model.parts[p];
    if (part.nodes.empty())
      throw Error(ErrorCode::InvalidModel, "part " + std::to_string(p) + " has no nodes");
    for (const std::string& nm : part.nodes) {
      if (nm.empty()) throw Error(ErrorCode::InvalidModel, "empty node label");
      if (!seen.insert(nm).second)
        throw Error(ErrorCode::InvalidModel, "node '" + nm + "' appears in two parts");
    }
    earlier[p + 1] = seen;

    if (part.is_fixed()) {
      if (part.fixed.size() != part.nodes.size())
        throw Error(ErrorCode::InvalidModel,
                    "fixed part " + std::to_string(p) + " value count mismatch");
      if (!part.parents.empty())
        throw Error(ErrorCode::InvalidModel, "fixed part " + std::to_string(p) +
                                                 " cannot have parents");
      for (double v : part.fixed)
        if (!std::isfinite(v))
          throw Error(ErrorCode::InvalidModel, "fixed part has a non-finite value");
      continue;
    }

    const int s = part.size();
    if (part.precision.rows() != s || part.precision.cols() != s)
      throw Error(ErrorCode::InvalidModel,
                  "precision shape mismatch in part " + std::to_string(p));
    double scale = 1.0 + part.precision.cwiseAbs().maxCoeff();
    if ((part.precision - part.precision.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw Error(ErrorCode::InvalidModel, "precision not symmetric in part " + std::to_string(p));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(part.precision);
    if (es.eigenvalues().minCoeff() <= 1e-10)
      throw Error(ErrorCode::InvalidModel,
                  "precision of part " + std::to_string(p) + " is not positive definite");
    if (part.mean.size() != s)
      throw Error(ErrorCode::InvalidModel, "mean length mismatch in part " + std::to_string(p));
    const int np = static_cast<int>(part.parents.size());
    if (np > 0 && (part.coeff.rows() != s || part.coeff.cols() != np))
      throw Error(ErrorCode::InvalidModel, "coeff shape mismatch in part " + std::to_string(p));
    std::set<std::string> pdup;
    for (const std::string& q : part.parents) {
      if (!pdup.insert(q).second)
        throw Error(ErrorCode::InvalidModel, "parent '" + q + "' listed twice");
      if (!earlier[p].count(q))
        throw Error(ErrorCode::InvalidModel,
                    "parent '" + q + "' of part " + std::to_string(p) +
                        " is not a node of a strictly earlier part");
    }
  }

  // Assemble R over the stochastic parts and demand positive semi-definiteness.
  std::vector<int> off(model.parts.size(), -1);
  int dim = 0;
  for (size_t p = 0; p < model.parts.size(); ++p)
    if (!model.parts[p].is_fixed()) {
      off[p] = dim;
      dim += model.parts[p].size();
    }
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim, dim);
  for (const auto& [key, block] : model.coupling.blocks) {
    auto [a, b] = key;
    if (a < 0 || b <= a || b >= static_cast<int>(model.parts.size()))
      throw Error(ErrorCode::InvalidModel, "coupling block indices out of range");
    if (off[a] < 0 || off[b] < 0)
      throw Error(ErrorCode::InvalidModel, "coupling block refers to a fixed part");
    if (block.rows() != model.parts[a].size() || block.cols() != model.parts[b].size())
      throw Error(ErrorCode::InvalidModel, "coupling block shape mismatch");
    r.block(off[a], off[b], block.rows(), block.cols()) = block;
    r.block(off[b], off[a], block.cols(), block.rows()) = block.transpose();
  }
  if (dim > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw Error(ErrorCode::InvalidModel, "error coupling is not positive semi-definite");
  }
}

namespace detail {

struct EpsLayout {
  std::vector<int> offset;  // per part; -1 for fixed parts
  int dim = 0;
};

inline EpsLayout eps_layout(const GaussianEquilibriumModel& model) {
  EpsLayout l;
  l.offset.assign(model.parts.size(), -1);
  for (size_t p = 0; p < model.parts.size(); ++p)
    if (!model.parts[p].is_fixed()) {
      l.offset[p] = l.dim;
      l.dim += model.parts[p].size();
    }
  return l;
}

inline Eigen::MatrixXd assemble_r(const GaussianEquilibriumModel& model, const EpsLayout& l) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(l.dim, l.dim);
  for (const auto& [key, block] : model.coupling.blocks) {
    auto [a, b] = key;
    r.block(l.offset[a], l.offset[b], block.rows(), block.cols()) = block;
    r.block(l.offset[b], l.offset[a], block.cols(), block.rows()) = block.transpose();
  }
  return r;
}

// Symmetric square root of a positive semi-definite matrix; small negative
// eigenvalues inside the validation tolerance are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline std::vector<std::string> model_labels(const GaussianEquilibriumModel& model) {
  std::vector<std::string> labels;
  for (const GaussianPart& part : model.parts)
    labels.insert(labels.end(), part.nodes.begin(), part.nodes.end());
  return labels;
}

}  // namespace detail

// Algorithm-1 construction. Step 1 draws the within-part undirected skeleton
// from the precision support, step 2 keeps a parent edge only when the full
// conditional of the child still depends on it, and step 3 joins error-coupled
// parts by complete bipartite bidirected edges. Parts whose precision support
// is disconnected decompose into independent chain components first.
inline MixedGraph corresponding_graph(const GaussianEquilibriumModel& model) {
  validate_model(model);

  std::vector<std::string> labels = detail::model_labels(model);
  std::map<std::string, int> id;
  for (size_t k = 0; k < labels.size(); ++k) id[labels[k]] = static_cast<int>(k);

  std::vector<Edge> edges;
  std::vector<std::vector<std::vector<int>>> comps(model.parts.size());
  for (size_t p = 0; p < model.parts.size(); ++p) {
    const GaussianPart& part = model.parts[p];
    if (part.is_fixed()) continue;
    comps[p] = detail::support_components(part.precision);

    for (int i = 0; i < part.size(); ++i)
      for (int j = i + 1; j < part.size(); ++j)
        if (std::abs(part.precision(i, j)) > detail::kEdgeTol)
          edges.push_back(make_undirected(id[part.nodes[i]], id[part.nodes[j]]));

    for (int i = 0; i < part.size(); ++i)
      for (int col = 0; col < static_cast<int>(part.parents.size()); ++col)
        if (std::abs(detail::conditional_coefficient(part.precision, part.coeff, i, col)) >
            detail::kEdgeTol)
          edges.push_back(make_directed(id[part.parents[col]], id[part.nodes[i]]));
  }

  for (const auto& [key, block] : model.coupling.blocks) {
    auto [a, b] = key;
    for (const auto& ca : comps[a])
      for (const auto& cb : comps[b]) {
        bool coupled = false;
        for (int i : ca)
          for (int j : cb)
            if (std::abs(block(i, j)) > detail::kEdgeTol) coupled = true;
        if (!coupled) continue;
        for (int i : ca)
          for (int j : cb)
            edges.push_back(make_bidirected(id[model.parts[a].nodes[i]],
                                            id[model.parts[b].nodes[j]]));
      }
  }

  MixedGraph g;
  try {
    g = build_graph(labels, edges);
  } catch (const Error& e) {
    throw Error(ErrorCode::NonAnterialResult,
                std::string("corresponding graph is not well-formed: ") + e.what());
  }
  GraphClassReport cls = classify(g);
  if (!cls.is_anterial || !cls.is_chain_connected)
    throw Error(ErrorCode::NonAnterialResult,
                "model violates the error-independence constraint");
  return g;
}

namespace detail {

// Affine representation X = mean + M ε of the whole model over the stacked
// part errors, with Cov(ε) = R. All closed-form laws derive from it.
struct Loadings {
  std::vector<std::string> labels;
  Eigen::VectorXd mean;
  Eigen::MatrixXd m;
  Eigen::MatrixXd r;
  EpsLayout layout;
};

inline Loadings build_loadings(const GaussianEquilibriumModel& model) {
  Loadings out;
  out.labels = model_labels(model);
  out.layout = eps_layout(model);
  out.r = assemble_r(model, out.layout);

  const int nv = static_cast<int>(out.labels.size());
  out.mean = Eigen::VectorXd::Zero(nv);
  out.m = Eigen::MatrixXd::Zero(nv, out.layout.dim);

  std::map<std::string, int> row;
  for (int k = 0; k < nv; ++k) row[out.labels[k]] = k;

  int base = 0;
  for (size_t p = 0; p < model.parts.size(); ++p) {
    const GaussianPart& part = model.parts[p];
    const int s = part.size();
    if (part.is_fixed()) {
      for (int i = 0; i < s; ++i) out.mean(base + i) = part.fixed[i];
    } else {
      Eigen::MatrixXd l = error_loading(part.precision);
      Eigen::VectorXd mu = part.mean;
      Eigen::MatrixXd load = Eigen::MatrixXd::Zero(s, out.layout.dim);
      load.block(0, out.layout.offset[p], s, s) = l;
      for (int col = 0; col < static_cast<int>(part.parents.size()); ++col) {
        int pr = row.at(part.parents[col]);
        mu += part.coeff.col(col) * out.mean(pr);
        load += part.coeff.col(col) * out.m.row(pr);
      }
      out.mean.segment(base, s) = mu;
      out.m.middleRows(base, s) = load;
    }
    base += s;
  }
  return out;
}

}  // namespace detail

inline JointLaw joint_law(const GaussianEquilibriumModel& model) {
  validate_model(model);
  detail::Loadings l = detail::build_loadings(model);
  JointLaw law;
  law.labels = std::move(l.labels);
  law.mean = std::move(l.mean);
  Eigen::MatrixXd cov = l.m * l.r * l.m.transpose();
  law.cov = (cov + cov.transpose()) / 2.0;
  return law;
}

// True iff the partial correlation of coordinates i and j given S vanishes
// (|ρ| < 1e-8), computed from the precision of the restricted covariance.
inline bool exact_ci(const Eigen::MatrixXd& cov, int i, int j, const std::vector<int>& s) {
  const int n = static_cast<int>(cov.rows());
  std::vector<int> idx{i, j};
  idx.insert(idx.end(), s.begin(), s.end());
  std::set<int> dup;
  for (int k : idx) {
    if (k < 0 || k >= n) throw Error(ErrorCode::InvalidQuery, "index out of range");
    if (!dup.insert(k).second)
      throw Error(ErrorCode::InvalidQuery, "repeated index in exact_ci query");
  }
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd sub(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) sub(a, b) = cov(idx[a], idx[b]);
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularCovariance,
                "covariance is not positive definite on the query set");
  Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(m, m));
  double denom = prec(0, 0) * prec(1, 1);
  if (!(denom > 0.0))
    throw Error(ErrorCode::SingularCovariance, "degenerate precision in exact_ci");
  double rho = -prec(0, 1) / std::sqrt(denom);
  return std::abs(rho) < 1e-8;
}

namespace detail {

constexpr std::uint64_t kSaltEquilibrium = 1;
constexpr std::uint64_t kSaltGibbs = 2;
constexpr std::uint64_t kSaltCoupled = 3;

// One record's stacked ε draw: per-part streams keyed by (seed, record, part)
// so any consumer can reproduce a block without replaying the others.
inline Eigen::VectorXd draw_eps(const GaussianEquilibriumModel& model, const EpsLayout& layout,
                                const Eigen::MatrixXd* sqrt_r, std::uint64_t seed,
                                std::uint64_t record, std::uint64_t salt) {
  Eigen::VectorXd eta(layout.dim);
  for (size_t p = 0; p < model.parts.size(); ++p) {
    if (layout.offset[p] < 0) continue;
    RandomStream stream(seed, record, p, salt);
    for (int i = 0; i < model.parts[p].size(); ++i)
      eta(layout.offset[p] + i) = stream.normal();
  }
  if (sqrt_r) return (*sqrt_r) * eta;
  return eta;
}

}  // namespace detail

inline SampleMatrix sample_equilibrium(const GaussianEquilibriumModel& model, int n,
                                       std::uint64_t seed) {
  validate_model(model);
  if (n < 1) throw Error(ErrorCode::InvalidQuery, "sample size must be at least 1");

  detail::EpsLayout layout = detail::eps_layout(model);
  std::optional<Eigen::MatrixXd> sqrt_r;
  if (!model.coupling.blocks.empty())
    sqrt_r = detail::psd_sqrt(detail::assemble_r(model, layout));

  std::vector<Eigen::MatrixXd> loading(model.parts.size());
  for (size_t p = 0; p < model.parts.size(); ++p)
    if (!model.parts[p].is_fixed()) loading[p] = detail::error_loading(model.parts[p].precision);

  SampleMatrix out;
  out.labels = detail::model_labels(model);
  out.values.resize(n, static_cast<int>(out.labels.size()));
  out.provenance = Provenance::equilibrium;

  std::map<std::string, int> col;
  for (size_t k = 0; k < out.labels.size(); ++k) col[out.labels[k]] = static_cast<int>(k);

  for (int rec = 0; rec < n; ++rec) {
    Eigen::VectorXd eps = detail::draw_eps(model, layout, sqrt_r ? &*sqrt_r : nullptr, seed,
                                           rec, detail::kSaltEquilibrium);
    int base = 0;
    for (size_t p = 0; p < model.parts.size(); ++p) {
      const GaussianPart& part = model.parts[p];
      const int s = part.size();
      if (part.is_fixed()) {
        for (int i = 0; i < s; ++i) out.values(rec, base + i) = part.fixed[i];
      } else {
        Eigen::VectorXd x = part.mean;
        for (int c = 0; c < static_cast<int>(part.parents.size()); ++c)
          x += part.coeff.col(c) * out.values(rec, col.at(part.parents[c]));
        x += loading[p] * eps.segment(layout.offset[p], s);
        for (int i = 0; i < s; ++i) out.values(rec, base + i) = x(i);
      }
      base += s;
    }
  }
  return out;
}

// Per-part Gibbs dynamics: parts resolve in order with parents frozen at their
// sampled values, and within a part the sites update cyclically from the
// Gaussian full conditional given the rest of the part. Each record runs its
// own chain from the conditional mean; burn_in full sweeps are discarded and
// the state after one further sweep is the draw. Cross-part error couplings do
// not enter these dynamics, so each part lands on its own equilibrium J^τ; the
// shipped simulation models declare no couplings, where this law is exact.
inline SampleMatrix gibbs_sample(const GaussianEquilibriumModel& model, int n, int burn_in,
                                 std::uint64_t seed) {
  validate_model(model);
  if (n < 1) throw Error(ErrorCode::InvalidQuery, "sample size must be at least 1");
  if (burn_in < 0) throw Error(ErrorCode::InvalidQuery, "burn-in cannot be negative");

  SampleMatrix out;
  out.labels = detail::model_labels(model);
  out.values.resize(n, static_cast<int>(out.labels.size()));
  out.provenance = Provenance::gibbs;

  std::map<std::string, int> col;
  for (size_t k = 0; k < out.labels.size(); ++k) col[out.labels[k]] = static_cast<int>(k);

  for (int rec = 0; rec < n; ++rec) {
    int base = 0;
    for (size_t p = 0; p < model.parts.size(); ++p) {
      const GaussianPart& part = model.parts[p];
      const int s = part.size();
      if (part.is_fixed()) {
        for (int i = 0; i < s; ++i) out.values(rec, base + i) = part.fixed[i];
        base += s;
        continue;
      }
      Eigen::VectorXd m = part.mean;
      for (int c = 0; c < static_cast<int>(part.parents.size()); ++c)
        m += part.coeff.col(c) * out.values(rec, col.at(part.parents[c]));

      Eigen::VectorXd x = m;
      RandomStream stream(seed, rec, p, detail::kSaltGibbs);
      for (int sweep = 0; sweep <= burn_in; ++sweep)
        for (int site = 0; site < s; ++site) {
          double v = 1.0 / part.precision(site, site);
          double cm = m(site);
          for (int j = 0; j < s; ++j)
            if (j != site) cm -= v * part.precision(site, j) * (x(j) - m(j));
          x(site) = cm + std::sqrt(v) * stream.normal();
        }
      for (int i = 0; i < s; ++i) out.values(rec, base + i) = x(i);
      base += s;
    }
  }
  return out;
}

namespace detail {

// How one part reacts to do(C): which coordinates are pinned, the regression
// D = K_RR^{-1} K_RT of the rest on them, and the loading G that the kept
// coordinates place on the part's original error. G implements the chain-rule
// coupling X^do_R = E[X_R | X_T = a, x^do_pa] + (X_R - E[X_R | X_T, x_pa]):
// the do-world reuses the observational residual, so Cov(G ε) = K_RR^{-1}.
struct PartPlan {
  std::vector<int> treated;  // coordinates pinned by the intervention
  std::vector<int> kept;
  Eigen::VectorXd values;    // one per treated coordinate
  Eigen::MatrixXd d;         // |kept|×|treated|
  Eigen::MatrixXd g;         // |kept|×|τ|, rows of L mixed by D
};

struct InterventionPlan {
  std::vector<PartPlan> part;
  GaussianEquilibriumModel result;
  // For every result part that kept randomness: source part and the transform
  // W with ε'_new = W ε_old, used to carry couplings over.
  std::vector<std::pair<int, Eigen::MatrixXd>> eps_source;
  std::vector<int> stochastic_of;  // original part -> result stochastic part, -1 if gone
};

inline InterventionPlan plan_intervention(const GaussianEquilibriumModel& model,
                                          const InterventionSpec& spec) {
  validate_model(model);
  if (spec.values.empty())
    throw Error(ErrorCode::MissingValues, "intervention carries no values");
  for (const auto& [label, v] : spec.values) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::MissingValues, "non-finite value for '" + label + "'");
    bool found = false;
    for (const GaussianPart& part : model.parts)
      for (const std::string& nm : part.nodes)
        if (nm == label) found = true;
    if (!found) throw Error(ErrorCode::UnknownNode, "unknown treated node '" + label + "'");
  }

  InterventionPlan plan;
  plan.part.resize(model.parts.size());
  plan.stochastic_of.assign(model.parts.size(), -1);

  for (size_t p = 0; p < model.parts.size(); ++p) {
    const GaussianPart& part = model.parts[p];
    PartPlan& pp = plan.part[p];
    for (int i = 0; i < part.size(); ++i)
      if (spec.values.count(part.nodes[i]))
        pp.treated.push_back(i);
      else
        pp.kept.push_back(i);
    pp.values.resize(pp.treated.size());
    for (size_t t = 0; t < pp.treated.size(); ++t)
      pp.values(t) = spec.values.at(part.nodes[pp.treated[t]]);

    if (part.is_fixed()) {
      GaussianPart np = part;
      for (size_t t = 0; t < pp.treated.size(); ++t) np.fixed[pp.treated[t]] = pp.values(t);
      plan.result.parts.push_back(std::move(np));
      continue;
    }

    if (pp.treated.empty()) {
      plan.stochastic_of[p] = static_cast<int>(plan.result.parts.size());
      plan.result.parts.push_back(part);
      plan.eps_source.emplace_back(static_cast<int>(p),
                                   Eigen::MatrixXd::Identity(part.size(), part.size()));
      continue;
    }

    GaussianPart pinned;
    for (int t : pp.treated) pinned.nodes.push_back(part.nodes[t]);
    pinned.fixed.assign(pp.values.data(), pp.values.data() + pp.values.size());
    plan.result.parts.push_back(std::move(pinned));

    if (pp.kept.empty()) continue;

    const int nr = static_cast<int>(pp.kept.size());
    const int nt = static_cast<int>(pp.treated.size());
    Eigen::MatrixXd k_rr(nr, nr), k_rt(nr, nt);
    for (int a = 0; a < nr; ++a) {
      for (int b = 0; b < nr; ++b) k_rr(a, b) = part.precision(pp.kept[a], pp.kept[b]);
      for (int b = 0; b < nt; ++b) k_rt(a, b) = part.precision(pp.kept[a], pp.treated[b]);
    }
    pp.d = k_rr.llt().solve(k_rt);

    Eigen::MatrixXd l = error_loading(part.precision);
    pp.g.resize(nr, part.size());
    for (int a = 0; a < nr; ++a) pp.g.row(a) = l.row(pp.kept[a]);
    for (int b = 0; b < nt; ++b) pp.g += pp.d.col(b) * l.row(pp.treated[b]);

    GaussianPart rest;
    for (int r : pp.kept) rest.nodes.push_back(part.nodes[r]);
    rest.precision = k_rr;
    rest.mean.resize(nr);
    for (int a = 0; a < nr; ++a) rest.mean(a) = part.mean(pp.kept[a]);
    Eigen::VectorXd mu_t(nt);
    for (int b = 0; b < nt; ++b) mu_t(b) = part.mean(pp.treated[b]);
    rest.mean += pp.d * mu_t;

    rest.parents = part.parents;
    const int np = static_cast<int>(part.parents.size());
    rest.coeff.resize(nr, np + nt);
    for (int c = 0; c < np; ++c)
      for (int a = 0; a < nr; ++a) {
        double v = part.coeff(pp.kept[a], c);
        for (int b = 0; b < nt; ++b) v += pp.d(a, b) * part.coeff(pp.treated[b], c);
        rest.coeff(a, c) = v;
      }
    for (int b = 0; b < nt; ++b) {
      rest.parents.push_back(part.nodes[pp.treated[b]]);
      rest.coeff.col(np + b) = -pp.d.col(b);
    }

    plan.stochastic_of[p] = static_cast<int>(plan.result.parts.size());
    plan.result.parts.push_back(std::move(rest));

    // ε'_new = W ε_old with W = L'^{-1} G normalises the kept residual back to
    // a standard-normal block, so couplings transport as W_a R_ab W_b^T.
    Eigen::MatrixXd lp = error_loading(k_rr);
    plan.eps_source.emplace_back(
        static_cast<int>(p),
        lp.triangularView<Eigen::Lower>().solve(plan.part[p].g));
  }

  std::vector<int> new_eps_of(model.parts.size(), -1);
  for (size_t q = 0; q < plan.eps_source.size(); ++q)
    new_eps_of[plan.eps_source[q].first] = static_cast<int>(q);
  std::vector<int> new_part_index;
  for (size_t np = 0; np < plan.result.parts.size(); ++np)
    if (!plan.result.parts[np].is_fixed()) new_part_index.push_back(static_cast<int>(np));

  for (const auto& [key, block] : model.coupling.blocks) {
    auto [a, b] = key;
    int qa = new_eps_of[a], qb = new_eps_of[b];
    if (qa < 0 || qb < 0) continue;
    Eigen::MatrixXd nb = plan.eps_source[qa].second * block *
                         plan.eps_source[qb].second.transpose();
    if (nb.cwiseAbs().maxCoeff() <= 0.0) continue;
    plan.result.coupling.blocks[{new_part_index[qa], new_part_index[qb]}] = nb;
  }

  validate_model(plan.result);
  return plan;
}

}  // namespace detail

// do(C): treated coordinates become point masses, the rest of their part keeps
// the conditional law N(mean shifted by the regression on a, K_RR^{-1}) with
// the treated values wired in as parent references, and couplings carry over
// through the residual transform. The corresponding graph of the result is
// exactly do_C of the original corresponding graph.
inline GaussianEquilibriumModel intervene_model(const GaussianEquilibriumModel& model,
                                                const InterventionSpec& spec) {
  return detail::plan_intervention(model, spec).result;
}

// Two-world sampler: one ε draw per part per record feeds the observational
// recursion and the intervened one, whose treated parts reuse the
// observational residual. Columns are the observational labels followed by
// the do-world labels.
inline SampleMatrix sample_coupled(const GaussianEquilibriumModel& model,
                                   const InterventionSpec& spec, int n, std::uint64_t seed) {
  validate_model(model);
  if (n < 1) throw Error(ErrorCode::InvalidQuery, "sample size must be at least 1");

  std::optional<detail::InterventionPlan> plan;
  if (!spec.values.empty()) plan = detail::plan_intervention(model, spec);

  std::vector<std::string> bases;
  for (const auto& [label, v] : spec.values) bases.push_back(label);

  detail::EpsLayout layout = detail::eps_layout(model);
  std::optional<Eigen::MatrixXd> sqrt_r;
  if (!model.coupling.blocks.empty())
    sqrt_r = detail::psd_sqrt(detail::assemble_r(model, layout));

  std::vector<Eigen::MatrixXd> loading(model.parts.size());
  for (size_t p = 0; p < model.parts.size(); ++p)
    if (!model.parts[p].is_fixed()) loading[p] = detail::error_loading(model.parts[p].precision);

  std::vector<std::string> obs = detail::model_labels(model);
  const int nv = static_cast<int>(obs.size());
  SampleMatrix out;
  out.labels = obs;
  for (const std::string& nm : obs) out.labels.push_back(do_label(nm, bases));
  out.values.resize(n, 2 * nv);
  out.provenance = Provenance::coupled;

  std::map<std::string, int> col;
  for (int k = 0; k < nv; ++k) col[obs[k]] = k;

  for (int rec = 0; rec < n; ++rec) {
    Eigen::VectorXd eps = detail::draw_eps(model, layout, sqrt_r ? &*sqrt_r : nullptr, seed,
                                           rec, detail::kSaltCoupled);
    int base = 0;
    for (size_t p = 0; p < model.parts.size(); ++p) {
      const GaussianPart& part = model.parts[p];
      const int s = part.size();

      // observational world
      Eigen::VectorXd x(s);
      if (part.is_fixed()) {
        for (int i = 0; i < s; ++i) x(i) = part.fixed[i];
      } else {
        x = part.mean;
        for (int c = 0; c < static_cast<int>(part.parents.size()); ++c)
          x += part.coeff.col(c) * out.values(rec, col.at(part.parents[c]));
        x += loading[p] * eps.segment(layout.offset[p], s);
      }
      for (int i = 0; i < s; ++i) out.values(rec, base + i) = x(i);

      // intervened world, reading parent values from the do-columns
      Eigen::VectorXd y(s);
      if (!plan) {
        y = x;
      } else {
        const detail::PartPlan& pp = plan->part[p];
        if (part.is_fixed()) {
          for (int i = 0; i < s; ++i) y(i) = part.fixed[i];
          for (size_t t = 0; t < pp.treated.size(); ++t) y(pp.treated[t]) = pp.values(t);
        } else if (pp.treated.empty()) {
          y = part.mean;
          for (int c = 0; c < static_cast<int>(part.parents.size()); ++c)
            y += part.coeff.col(c) * out.values(rec, nv + col.at(part.parents[c]));
          y += loading[p] * eps.segment(layout.offset[p], s);
        } else {
          for (size_t t = 0; t < pp.treated.size(); ++t) y(pp.treated[t]) = pp.values(t);
          if (!pp.kept.empty()) {
            const int nr = static_cast<int>(pp.kept.size());
            Eigen::VectorXd mu(nr);
            for (int a = 0; a < nr; ++a) mu(a) = part.mean(pp.kept[a]);
            Eigen::VectorXd mu_t(pp.treated.size());
            for (size_t t = 0; t < pp.treated.size(); ++t) mu_t(t) = part.mean(pp.treated[t]);
            mu += pp.d * (mu_t - pp.values);
            for (int c = 0; c < static_cast<int>(part.parents.size()); ++c) {
              double pv = out.values(rec, nv + col.at(part.parents[c]));
              for (int a = 0; a < nr; ++a) {
                double v = part.coeff(pp.kept[a], c);
                for (size_t t = 0; t < pp.treated.size(); ++t)
                  v += pp.d(a, t) * part.coeff(pp.treated[t], c);
                mu(a) += v * pv;
              }
            }
            mu += pp.g * eps.segment(layout.offset[p], s);
            for (int a = 0; a < nr; ++a) y(pp.kept[a]) = mu(a);
          }
        }
      }
      for (int i = 0; i < s; ++i) out.values(rec, nv + base + i) = y(i);
      base += s;
    }
  }
  return out;
}

// Closed-form law of the coupled two-world vector, in sample_coupled's column
// order. The do-world rows load the shared ε through the residual transform,
// so this is exactly the distribution the sampler draws from.
inline JointLaw coupled_law(const GaussianEquilibriumModel& model, const InterventionSpec& spec) {
  validate_model(model);
  std::optional<detail::InterventionPlan> plan;
  if (!spec.values.empty()) plan = detail::plan_intervention(model, spec);

  std::vector<std::string> bases;
  for (const auto& [label, v] : spec.values) bases.push_back(label);

  detail::Loadings obs = detail::build_loadings(model);
  const int nv = static_cast<int>(obs.labels.size());

  JointLaw law;
  law.labels = obs.labels;
  for (const std::string& nm : obs.labels) law.labels.push_back(do_label(nm, bases));
  law.mean.resize(2 * nv);
  law.mean.head(nv) = obs.mean;

  Eigen::MatrixXd m(2 * nv, obs.layout.dim);
  m.topRows(nv) = obs.m;

  std::map<std::string, int> row;
  for (int k = 0; k < nv; ++k) row[obs.labels[k]] = k;

  if (!plan) {
    law.mean.tail(nv) = obs.mean;
    m.bottomRows(nv) = obs.m;
  } else {
    int base = 0;
    for (size_t p = 0; p < model.parts.size(); ++p) {
      const GaussianPart& part = model.parts[p];
      const int s = part.size();
      const detail::PartPlan& pp = plan->part[p];
      auto do_row = [&](int i) { return nv + base + i; };

      if (part.is_fixed()) {
        for (int i = 0; i < s; ++i) law.mean(do_row(i)) = part.fixed[i];
        for (size_t t = 0; t < pp.treated.size(); ++t)
          law.mean(do_row(pp.treated[t])) = pp.values(t);
        for (int i = 0; i < s; ++i) m.row(do_row(i)).setZero();
      } else if (pp.treated.empty()) {
        Eigen::VectorXd mu = part.mean;
        Eigen::MatrixXd load = Eigen::MatrixXd::Zero(s, obs.layout.dim);
        load.block(0, obs.layout.offset[p], s, s) = detail::error_loading(part.precision);
        // parents are read in the do-world
        for (int c = 0; c < static_cast<int>(part.parents.size()); ++c) {
          int source = nv + row.at(part.parents[c]);
          mu += part.coeff.col(c) * law.mean(source);
          load += part.coeff.col(c) * m.row(source);
        }
        law.mean.segment(nv + base, s) = mu;
        m.middleRows(nv + base, s) = load;
      } else {
        for (size_t t = 0; t < pp.treated.size(); ++t)
          law.mean(do_row(pp.treated[t])) = pp.values(t);
        for (size_t t = 0; t < pp.treated.size(); ++t) m.row(do_row(pp.treated[t])).setZero();
        if (!pp.kept.empty()) {
          const int nr = static_cast<int>(pp.kept.size());
          Eigen::VectorXd mu(nr);
          for (int a = 0; a < nr; ++a) mu(a) = part.mean(pp.kept[a]);
          Eigen::VectorXd mu_t(pp.treated.size());
          for (size_t t = 0; t < pp.treated.size(); ++t) mu_t(t) = part.mean(pp.treated[t]);
          mu += pp.d * (mu_t - pp.values);
          Eigen::MatrixXd load = Eigen::MatrixXd::Zero(nr, obs.layout.dim);
          load.block(0, obs.layout.offset[p], nr, s) = pp.g;
          for (int c = 0; c < static_cast<int>(part.parents.size()); ++c) {
            int source = nv + row.at(part.parents[c]);
            Eigen::VectorXd coef(nr);
            for (int a = 0; a < nr; ++a) {
              double v = part.coeff(pp.kept[a], c);
              for (size_t t = 0; t < pp.treated.size(); ++t)
                v += pp.d(a, t) * part.coeff(pp.treated[t], c);
              coef(a) = v;
            }
            mu += coef * law.mean(source);
            load += coef * m.row(source);
          }
          for (int a = 0; a < nr; ++a) {
            law.mean(do_row(pp.kept[a])) = mu(a);
            m.row(do_row(pp.kept[a])) = load.row(a);
          }
        }
      }
      base += s;
    }
  }

  Eigen::MatrixXd cov = m * obs.r * m.transpose();
  law.cov = (cov + cov.transpose()) / 2.0;
  return law;
}

// Fisher-Z test of the partial correlation of columns i and j given S.
inline double fisher_z(const SampleMatrix& samples, int i, int j, const std::vector<int>& s) {
  const int n = static_cast<int>(samples.values.rows());
  const int nc = static_cast<int>(samples.values.cols());
  std::vector<int> idx{i, j};
  idx.insert(idx.end(), s.begin(), s.end());
  std::set<int> dup;
  for (int k : idx) {
    if (k < 0 || k >= nc) throw Error(ErrorCode::InvalidQuery, "column index out of range");
    if (!dup.insert(k).second)
      throw Error(ErrorCode::InvalidQuery, "repeated column in fisher_z query");
  }
  if (n <= static_cast<int>(s.size()) + 3)
    throw Error(ErrorCode::TooFewSamples,
                "need more than |S|+3 samples for the Fisher-Z statistic");

  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd cols(n, m);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd c = samples.values.col(idx[k]);
    double mean = c.mean();
    c.array() -= mean;
    double ss = c.squaredNorm();
    if (ss <= 1e-24 * static_cast<double>(n))
      throw Error(ErrorCode::ConstantColumn,
                  "column '" + samples.labels[idx[k]] + "' is constant");
    cols.col(k) = c;
  }
  Eigen::MatrixXd cov = cols.transpose() * cols / static_cast<double>(n - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularCovariance, "sample covariance is singular");
  Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(m, m));
  double r = -prec(0, 1) / std::sqrt(prec(0, 0) * prec(1, 1));
  r = std::clamp(r, -1.0 + 1e-15, 1.0 - 1e-15);

  double z = 0.5 * std::log((1.0 + r) / (1.0 - r)) *
             std::sqrt(static_cast<double>(n - static_cast<int>(s.size()) - 3));
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

struct MarkovRow {
  std::string i, j;
  std::vector<std::string> given;  // ant(i,j)
  bool implied = false;            // the graph separates i,j given ant(i,j)
  bool skipped = false;            // degenerate (constant) columns involved
  bool exact = false;
  double p = 1.0;            // sampled mode
  bool independent = false;  // exact mode verdict
};

using MarkovReport = std::vector<MarkovRow>;

namespace detail {

template <typename Lookup, typename Test>
MarkovReport markov_rows(const MixedGraph& g, Lookup&& column_of, Test&& run) {
  std::vector<int> order(g.n());
  for (int i = 0; i < g.n(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return node_less(g, a, b); });

  MarkovReport report;
  for (size_t a = 0; a < order.size(); ++a)
    for (size_t b = a + 1; b < order.size(); ++b) {
      int i = order[a], j = order[b];
      MarkovRow row;
      row.i = g.labels[i];
      row.j = g.labels[j];
      NodeSet ant = anterior(g, {i, j});
      std::vector<int> zs(ant.begin(), ant.end());
      std::sort(zs.begin(), zs.end(), [&](int x, int y) { return node_less(g, x, y); });
      for (int z : zs) row.given.push_back(g.labels[z]);
      row.implied = separated(g, {i}, {j}, ant);

      std::vector<int> cols{column_of(row.i), column_of(row.j)};
      for (const std::string& nm : row.given) cols.push_back(column_of(nm));
      run(row, cols);
      report.push_back(std::move(row));
    }
  return report;
}

}  // namespace detail

// One row per unordered node pair: the pairwise hypothesis i ⊥ j | ant(i,j),
// whether the graph implies it, and the data's verdict.
inline MarkovReport markov_report(const MixedGraph& g, const SampleMatrix& samples) {
  for (const std::string& nm : g.labels)
    if (samples.column(nm) < 0)
      throw Error(ErrorCode::LabelMismatch, "graph node '" + nm + "' is missing from the data");
  return detail::markov_rows(
      g, [&](const std::string& nm) { return samples.column(nm); },
      [&](MarkovRow& row, const std::vector<int>& cols) {
        try {
          row.p = fisher_z(samples, cols[0], cols[1],
                           std::vector<int>(cols.begin() + 2, cols.end()));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ConstantColumn) throw;
          row.skipped = true;
        }
      });
}

inline MarkovReport markov_report(const MixedGraph& g, const JointLaw& law) {
  for (const std::string& nm : g.labels)
    if (law.column(nm) < 0)
      throw Error(ErrorCode::LabelMismatch, "graph node '" + nm + "' is missing from the law");
  double top = law.cov.diagonal().maxCoeff();
  return detail::markov_rows(
      g, [&](const std::string& nm) { return law.column(nm); },
      [&](MarkovRow& row, const std::vector<int>& cols) {
        row.exact = true;
        for (int c : cols)
          if (law.cov(c, c) <= 1e-14 * (1.0 + top)) {
            row.skipped = true;
            return;
          }
        try {
          row.independent = exact_ci(law.cov, cols[0], cols[1],
                                     std::vector<int>(cols.begin() + 2, cols.end()));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::SingularCovariance) throw;
          row.skipped = true;
        }
      });
}

}  // namespace anterial
