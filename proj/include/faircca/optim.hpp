#pragma once

// MF-CCA (multi-objective steepest common descent, Algorithm 1 style) and
// SF-CCA (penalized single objective), plus the min-norm subproblem solver.

#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "faircca/fairness.hpp"

namespace faircca {

enum class Method { cca, mf_cca, sf_cca };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::cca: return "cca";
    case Method::mf_cca: return "mf_cca";
    case Method::sf_cca: return "sf_cca";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "cca") return Method::cca;
  if (s == "mf_cca" || s == "mf") return Method::mf_cca;
  if (s == "sf_cca" || s == "sf") return Method::sf_cca;
  throw ConfigError("unknown method '" + s + "'");
}

// method_default resolves to random_feasible for MF-CCA and global_cca for
// SF-CCA: the global CCA optimum zeroes the correlation objective's gradient,
// which makes it Pareto-stationary for the multi-objective problem, so a
// warm-started MF-CCA run would terminate without moving.
enum class InitKind { method_default, global_cca, jittered_cca, random_feasible };

struct OptimizerConfig {
  Method method = Method::mf_cca;
  Index r = 2;
  double eta0 = 0.4;
  double lambda = 10.0;      // SF-CCA only
  int t_max = 1000;
  double stop_tol = 1e-4;    // descent-direction norm threshold
  PenaltyKind penalty = PenaltyKind::absolute;
  double ridge = 0.0;        // 0 -> scale-aware default per view
  std::uint64_t seed = 0;
  InitKind init = InitKind::method_default;
  double init_jitter = 0.02;  // relative tangent perturbation for jittered_cca
  bool sequential_updates = false;

  void validate() const {
    if (eta0 <= 0) throw ConfigError("eta0 must be positive");
    if (t_max < 1) throw ConfigError("t_max must be >= 1");
    if (stop_tol <= 0) throw ConfigError("stop_tol must be positive");
    if (lambda < 0) throw ConfigError("lambda must be nonnegative");
    if (r < 1) throw ConfigError("r must be >= 1");
  }
};

// eta_t = eta0 / sqrt(t + 1)
inline double step_size(int t, double eta0) { return eta0 / std::sqrt(static_cast<double>(t + 1)); }

struct IterateRecord {
  std::vector<double> objectives;  // F components (MF) or {f} (SF)
  double direction_norm = 0;
  double step = 0;
  double feas_u = 0;
  double feas_v = 0;
  double seconds = 0;  // cumulative wall clock inside the fit loop
};

struct SimplexWeights {
  Vector mu;
};

struct GradientPair {
  Matrix u;
  Matrix v;
};

struct FairCcaResult {
  Method method = Method::cca;
  Matrix u;
  Matrix v;
  GramPtr gram_x;
  GramPtr gram_y;
  std::vector<GroupOptimum> group_optima;
  std::vector<IterateRecord> trace;
  int iterations = 0;
  bool converged = false;
  double fit_seconds = 0;
};

// Precomputed per-dataset quantities shared by every objective evaluation.
struct FitWorkspace {
  Matrix cross_total;              // X^T Y
  std::vector<Matrix> cross;       // Xk^T Yk
  std::vector<double> local;       // trace(U*^T Xk^T Yk V*)

  FitWorkspace(const GroupedDataset& ds, const std::vector<GroupOptimum>& optima) {
    cross_total = ds.x.transpose() * ds.y;
    cross.reserve(static_cast<size_t>(ds.num_groups));
    local.reserve(static_cast<size_t>(ds.num_groups));
    for (int k = 0; k < ds.num_groups; ++k) {
      cross.push_back(ds.group_x(k).transpose() * ds.group_y(k));
      local.push_back(optima[static_cast<size_t>(k)].local_value);
    }
  }

  int num_groups() const { return static_cast<int>(cross.size()); }

  std::vector<double> errors(const Matrix& u, const Matrix& v) const {
    std::vector<double> e(cross.size());
    for (size_t k = 0; k < cross.size(); ++k)
      e[k] = local[k] - (u.transpose() * cross[k] * v).trace();
    return e;
  }
};

// f_1 and one Delta^{k,s} per unordered pair, in (0,1), (0,2), ... order.
inline std::vector<double> objective_values_mf(const Matrix& u, const Matrix& v,
                                               const FitWorkspace& ws, PenaltyKind penalty) {
  std::vector<double> f;
  f.push_back(-(u.transpose() * ws.cross_total * v).trace());
  const auto e = ws.errors(u, v);
  const int k = ws.num_groups();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) f.push_back(penalty_value(penalty, e[static_cast<size_t>(a)] - e[static_cast<size_t>(b)]));
  return f;
}

// Euclidean gradients of the M = 1 + K(K-1)/2 objectives; the local-optimum
// term of E^k is constant in (U, V), so dE^k/dU = -Xk^T Yk V.
inline std::vector<GradientPair> objective_gradients_mf(const Matrix& u, const Matrix& v,
                                                        const FitWorkspace& ws,
                                                        PenaltyKind penalty) {
  std::vector<GradientPair> grads;
  grads.push_back({-(ws.cross_total * v), -(ws.cross_total.transpose() * u)});
  const auto e = ws.errors(u, v);
  const int k = ws.num_groups();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      const double d = penalty_derivative(penalty, e[static_cast<size_t>(a)] - e[static_cast<size_t>(b)]);
      const Matrix& ca = ws.cross[static_cast<size_t>(a)];
      const Matrix& cb = ws.cross[static_cast<size_t>(b)];
      grads.push_back({d * (cb * v - ca * v), d * (cb.transpose() * u - ca.transpose() * u)});
    }
  return grads;
}

inline double sf_objective(const Matrix& u, const Matrix& v, const FitWorkspace& ws, double lambda,
                           PenaltyKind penalty) {
  double f = -(u.transpose() * ws.cross_total * v).trace();
  const auto e = ws.errors(u, v);
  const int k = ws.num_groups();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      f += lambda * penalty_value(penalty, e[static_cast<size_t>(a)] - e[static_cast<size_t>(b)]);
  return f;
}

inline GradientPair sf_cca_objective_gradient(const Matrix& u, const Matrix& v,
                                              const FitWorkspace& ws, double lambda,
                                              PenaltyKind penalty) {
  GradientPair g{-(ws.cross_total * v), -(ws.cross_total.transpose() * u)};
  const auto e = ws.errors(u, v);
  const int k = ws.num_groups();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) {
      const double d = lambda * penalty_derivative(penalty, e[static_cast<size_t>(a)] - e[static_cast<size_t>(b)]);
      const Matrix& ca = ws.cross[static_cast<size_t>(a)];
      const Matrix& cb = ws.cross[static_cast<size_t>(b)];
      g.u += d * (cb * v - ca * v);
      g.v += d * (cb.transpose() * u - ca.transpose() * u);
    }
  return g;
}

namespace detail {

inline double pair_dot(const GradientPair& a, const GradientPair& b) {
  return a.u.cwiseProduct(b.u).sum() + a.v.cwiseProduct(b.v).sum();
}

// min over the simplex of 1/2 || sum mu_i g_i ||^2, Frank-Wolfe with away
// steps and exact line search on the quadratic. Gram = <g_i, g_j>.
inline Vector min_norm_weights(const Matrix& gram) {
  const Index m = gram.rows();
  if (m == 1) return Vector::Ones(1);
  if (m == 2) {
    // closed form on the segment mu*g1 + (1-mu)*g2
    const double d2 = gram(0, 0) - 2 * gram(0, 1) + gram(1, 1);
    double mu0 = d2 < 1e-300 ? 0.5 : (gram(1, 1) - gram(0, 1)) / d2;
    mu0 = std::min(1.0, std::max(0.0, mu0));
    Vector mu(2);
    mu << mu0, 1.0 - mu0;
    return mu;
  }

  // affine minimizer restricted to the support of mu; drops negative
  // coordinates along the segment until the minimizer is feasible
  auto polish = [&](Vector mu) {
    for (Index pass = 0; pass < 2 * m; ++pass) {
      std::vector<Index> support;
      for (Index i = 0; i < m; ++i)
        if (mu[i] > 0) support.push_back(i);
      const Index s = static_cast<Index>(support.size());
      if (s == 0) break;
      Matrix kkt = Matrix::Zero(s + 1, s + 1);
      for (Index a = 0; a < s; ++a)
        for (Index b = 0; b < s; ++b) kkt(a, b) = gram(support[static_cast<size_t>(a)], support[static_cast<size_t>(b)]);
      kkt.row(s).head(s).setOnes();
      kkt.col(s).head(s).setOnes();
      Vector rhs = Vector::Zero(s + 1);
      rhs[s] = 1.0;
      Vector sol = kkt.fullPivLu().solve(rhs);
      Vector nu = Vector::Zero(m);
      for (Index a = 0; a < s; ++a) nu[support[static_cast<size_t>(a)]] = sol[a];
      if ((nu.array() >= -1e-14).all()) {
        nu = nu.cwiseMax(0.0);
        return Vector(nu / nu.sum());
      }
      // step toward nu until the first coordinate hits zero
      double gamma = 1.0;
      for (Index i = 0; i < m; ++i)
        if (nu[i] < 0) gamma = std::min(gamma, mu[i] / (mu[i] - nu[i]));
      mu += gamma * (nu - mu);
      for (Index i = 0; i < m; ++i)
        if (mu[i] < 1e-15) mu[i] = 0;
      mu /= mu.sum();
    }
    return mu;
  };

  Vector mu = Vector::Zero(m);
  Index start = 0;
  gram.diagonal().minCoeff(&start);
  mu[start] = 1.0;

  constexpr int kMaxIter = 10000;
  // gap tolerances are relative to the Gram scale: an absolute 1e-12 is not
  // representable once the entries reach ~1e4
  const double scale = 1.0 + gram.cwiseAbs().maxCoeff();
  const double kGapTol = 1e-12 * scale;
  double gap = 0;
  for (int it = 0; it < kMaxIter; ++it) {
    Vector grad = gram * mu;
    Index s = 0;
    grad.minCoeff(&s);
    gap = mu.dot(grad) - grad[s];
    if (gap <= kGapTol) break;

    Index a = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < m; ++i)
      if (mu[i] > 0 && grad[i] > worst) {
        worst = grad[i];
        a = i;
      }

    const double fw_decrease = mu.dot(grad) - grad[s];
    const double away_decrease = grad[a] - mu.dot(grad);
    Vector dir;
    double gamma_max;
    if (fw_decrease >= away_decrease) {
      dir = -mu;
      dir[s] += 1.0;
      gamma_max = 1.0;
    } else {
      dir = mu;
      dir[a] -= 1.0;
      gamma_max = mu[a] >= 1.0 ? 1e300 : mu[a] / (1.0 - mu[a]);
    }
    const double curv = dir.dot(gram * dir);
    double gamma = curv < 1e-300 ? gamma_max : -grad.dot(dir) / curv;
    gamma = std::min(gamma_max, std::max(0.0, gamma));
    if (gamma <= 0) break;
    mu += gamma * dir;
    mu = mu.cwiseMax(0.0);
    mu /= mu.sum();
  }
  // Frank-Wolfe identifies (most of) the support but converges slowly in the
  // last digits; finish with exact affine minimization on the support,
  // admitting the best off-support vertex while a gap remains
  for (Index round = 0; round < 4 * m; ++round) {
    mu = polish(mu);
    Vector grad = gram * mu;
    Index s = 0;
    grad.minCoeff(&s);
    gap = mu.dot(grad) - grad[s];
    if (gap <= kGapTol) break;
    mu *= 0.9;
    mu[s] += 0.1;
  }
  if (gap > 1e-10 * scale)
    throw SubproblemNotConverged("min_norm_direction: dual gap " + std::to_string(gap));
  return mu;
}

}  // namespace detail

struct MinNormSolution {
  GradientPair direction;  // P = -sum mu_i g_i
  SimplexWeights weights;
  double norm = 0;  // joint Frobenius norm of P
};

namespace detail {

template <typename Dot>
MinNormSolution min_norm_with_dot(const std::vector<GradientPair>& grads, Dot&& dot) {
  const Index m = static_cast<Index>(grads.size());
  if (m < 1) throw ConfigError("min_norm_direction: no gradients");
  Matrix gram(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = i; j < m; ++j)
      gram(i, j) = gram(j, i) = dot(grads[static_cast<size_t>(i)], grads[static_cast<size_t>(j)]);
  Vector mu = detail::min_norm_weights(gram);

  GradientPair p{Matrix::Zero(grads[0].u.rows(), grads[0].u.cols()),
                 Matrix::Zero(grads[0].v.rows(), grads[0].v.cols())};
  for (Index i = 0; i < m; ++i) {
    p.u -= mu[i] * grads[static_cast<size_t>(i)].u;
    p.v -= mu[i] * grads[static_cast<size_t>(i)].v;
  }
  const double norm = std::sqrt(std::max(0.0, dot(p, p)));
  return MinNormSolution{std::move(p), SimplexWeights{std::move(mu)}, norm};
}

}  // namespace detail

inline MinNormSolution min_norm_direction(const std::vector<GradientPair>& grads) {
  return detail::min_norm_with_dot(grads, detail::pair_dot);
}

// Inner product of the metric the constraints live in: <a, b> = tr(a_u^T Bx b_u)
// + tr(a_v^T By b_v). Using it in the subproblem keeps the min-norm optimality
// identity aligned with the directional derivatives of the objectives.
inline double metric_dot(const GradientPair& a, const GradientPair& b, const GramOperator& bx,
                         const GramOperator& by) {
  return (a.u.transpose() * bx.matrix() * b.u).trace() +
         (a.v.transpose() * by.matrix() * b.v).trace();
}

inline MinNormSolution min_norm_direction(const std::vector<GradientPair>& grads,
                                          const GramOperator& bx, const GramOperator& by) {
  return detail::min_norm_with_dot(
      grads, [&](const GradientPair& a, const GradientPair& b) { return metric_dot(a, b, bx, by); });
}

// Gradient of f on the manifold: precondition by B^{-1}, then project. This is
// the gradient in the metric above; in particular it vanishes exactly at the
// closed-form CCA optimum, which the raw projected Euclidean gradient does not.
inline TangentVector riemannian_gradient(const StiefelPoint& z, const Matrix& euclidean) {
  return project_tangent(z, z.gram->solve(euclidean));
}

// Steepest common-descent direction for the MF objectives at (U, V).
inline MinNormSolution mf_direction(const StiefelPoint& u, const StiefelPoint& v,
                                    const FitWorkspace& ws, PenaltyKind penalty) {
  auto grads = objective_gradients_mf(u.z, v.z, ws, penalty);
  for (auto& g : grads) {
    g.u = riemannian_gradient(u, g.u).w;
    g.v = riemannian_gradient(v, g.v).w;
  }
  return min_norm_direction(grads, *u.gram, *v.gram);
}

// SF direction: the tangent subproblem minimizer is minus the gradient.
inline MinNormSolution sf_direction(const StiefelPoint& u, const StiefelPoint& v,
                                    const FitWorkspace& ws, double lambda, PenaltyKind penalty) {
  GradientPair g = sf_cca_objective_gradient(u.z, v.z, ws, lambda, penalty);
  MinNormSolution sol;
  sol.direction = GradientPair{-riemannian_gradient(u, g.u).w, -riemannian_gradient(v, g.v).w};
  sol.weights = SimplexWeights{Vector::Ones(1)};
  sol.norm = std::sqrt(std::max(0.0, metric_dot(sol.direction, sol.direction, *u.gram, *v.gram)));
  return sol;
}

namespace detail {

inline double resolve_ridge(const OptimizerConfig& cfg, const Matrix& m) {
  return cfg.ridge > 0 ? cfg.ridge : default_ridge(m);
}

inline std::pair<StiefelPoint, StiefelPoint> initial_point(const GroupedDataset& ds,
                                                           const OptimizerConfig& cfg,
                                                           double ridge_x, double ridge_y) {
  InitKind init = cfg.init;
  if (init == InitKind::method_default)
    // the exact CCA optimum is Pareto-stationary for the multi-objective
    // problem (its trace gradient vanishes, so the zero convex combination is
    // attainable) and the min-norm direction is zero there; a small tangent
    // perturbation escapes that saddle while keeping the trace near-optimal.
    // Single-group MF is plain CCA and should stay put.
    init = cfg.method == Method::mf_cca && ds.num_groups > 1 ? InitKind::jittered_cca
                                                             : InitKind::global_cca;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  if (init == InitKind::global_cca || init == InitKind::jittered_cca) {
    CcaSolution sol = solve_cca(ds.x, ds.y, cfg.r, std::max(ridge_x, ridge_y));
    if (init == InitKind::global_cca) return {sol.u, sol.v};
    auto nudge = [&](const StiefelPoint& p) {
      Matrix n(p.z.rows(), p.z.cols());
      for (Index i = 0; i < n.rows(); ++i)
        for (Index j = 0; j < n.cols(); ++j) n(i, j) = normal(rng);
      TangentVector t = project_tangent(p, cfg.init_jitter * p.z.norm() * n);
      return retract_gpolar(p, t, 1.0);
    };
    return {nudge(sol.u), nudge(sol.v)};
  }
  auto draw = [&](Index rows, GramPtr gram) {
    Matrix a(rows, cfg.r);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cfg.r; ++j) a(i, j) = normal(rng);
    Matrix z = gpolar_orthonormalize(a, *gram);
    return StiefelPoint(std::move(z), std::move(gram), /*check=*/true);
  };
  GramPtr bx = make_gram(ds.x, ridge_x);
  GramPtr by = make_gram(ds.y, ridge_y);
  StiefelPoint u = draw(ds.dx(), bx);
  StiefelPoint v = draw(ds.dy(), by);
  return {std::move(u), std::move(v)};
}

template <typename DirectionFn>
FairCcaResult descent_loop(const GroupedDataset& ds, const OptimizerConfig& cfg,
                           DirectionFn&& direction) {
  cfg.validate();
  const double ridge_x = resolve_ridge(cfg, ds.x);
  const double ridge_y = resolve_ridge(cfg, ds.y);

  FairCcaResult res;
  res.method = cfg.method;
  res.group_optima = solve_group_cca(ds, cfg.r, std::max(ridge_x, ridge_y));
  FitWorkspace ws(ds, res.group_optima);

  auto [u, v] = initial_point(ds, cfg, ridge_x, ridge_y);
  res.gram_x = u.gram;
  res.gram_y = v.gram;

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (int t = 0; t < cfg.t_max; ++t) {
    auto [dir, objectives] = direction(u, v, ws);

    IterateRecord rec;
    rec.objectives = std::move(objectives);
    rec.direction_norm = dir.norm;
    rec.feas_u = feasibility_residual(u.z, *u.gram);
    rec.feas_v = feasibility_residual(v.z, *v.gram);
    rec.seconds = elapsed();

    if (dir.norm < cfg.stop_tol) {
      rec.step = 0;
      res.trace.push_back(std::move(rec));
      res.converged = true;
      break;
    }

    const double eta = step_size(t, cfg.eta0);
    rec.step = eta;
    res.trace.push_back(std::move(rec));

    if (cfg.sequential_updates) {
      u = retract_gpolar(u, TangentVector{dir.direction.u}, eta);
      auto [dir2, obj2] = direction(u, v, ws);
      (void)obj2;
      v = retract_gpolar(v, TangentVector{dir2.direction.v}, eta);
    } else {
      u = retract_gpolar(u, TangentVector{dir.direction.u}, eta);
      v = retract_gpolar(v, TangentVector{dir.direction.v}, eta);
    }
  }

  res.fit_seconds = elapsed();
  res.iterations = static_cast<int>(res.trace.size());
  res.u = u.z;
  res.v = v.z;
  return res;
}

}  // namespace detail

inline FairCcaResult mf_cca_fit(const GroupedDataset& ds, const OptimizerConfig& cfg) {
  if (cfg.method != Method::mf_cca) throw ConfigError("mf_cca_fit: config.method != mf_cca");
  return detail::descent_loop(ds, cfg, [&](const StiefelPoint& u, const StiefelPoint& v,
                                           const FitWorkspace& ws) {
    return std::make_pair(mf_direction(u, v, ws, cfg.penalty),
                          objective_values_mf(u.z, v.z, ws, cfg.penalty));
  });
}

inline FairCcaResult sf_cca_fit(const GroupedDataset& ds, const OptimizerConfig& cfg) {
  if (cfg.method != Method::sf_cca) throw ConfigError("sf_cca_fit: config.method != sf_cca");
  return detail::descent_loop(ds, cfg, [&](const StiefelPoint& u, const StiefelPoint& v,
                                           const FitWorkspace& ws) {
    return std::make_pair(sf_direction(u, v, ws, cfg.lambda, cfg.penalty),
                          std::vector<double>{sf_objective(u.z, v.z, ws, cfg.lambda, cfg.penalty)});
  });
}

// Baseline wrapper so the harness can treat all three methods uniformly.
inline FairCcaResult cca_fit(const GroupedDataset& ds, const OptimizerConfig& cfg) {
  cfg.validate();
  const double ridge = std::max(detail::resolve_ridge(cfg, ds.x), detail::resolve_ridge(cfg, ds.y));
  const auto t0 = std::chrono::steady_clock::now();
  CcaSolution sol = solve_cca(ds.x, ds.y, cfg.r, ridge);
  FairCcaResult res;
  res.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.method = Method::cca;
  res.u = sol.u.z;
  res.v = sol.v.z;
  res.gram_x = sol.u.gram;
  res.gram_y = sol.v.gram;
  res.group_optima = solve_group_cca(ds, cfg.r, ridge);
  res.iterations = 0;
  res.converged = true;
  return res;
}

inline FairCcaResult fit(const GroupedDataset& ds, const OptimizerConfig& cfg) {
  switch (cfg.method) {
    case Method::cca: return cca_fit(ds, cfg);
    case Method::mf_cca: return mf_cca_fit(ds, cfg);
    case Method::sf_cca: return sf_cca_fit(ds, cfg);
  }
  throw ConfigError("fit: unknown method");
}

}  // namespace faircca
