#pragma once

// Disparity errors, penalty functions, and the component-wise /
// matrix-level / percentage-change evaluation metrics.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "faircca/cca.hpp"

namespace faircca {

enum class PenaltyKind { absolute, square, exponential };

inline std::string to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::absolute: return "abs";
    case PenaltyKind::square: return "square";
    case PenaltyKind::exponential: return "exp";
  }
  return "?";
}

inline PenaltyKind penalty_from_string(const std::string& s) {
  if (s == "abs" || s == "absolute") return PenaltyKind::absolute;
  if (s == "square") return PenaltyKind::square;
  if (s == "exp" || s == "exponential") return PenaltyKind::exponential;
  throw ConfigError("unknown penalty '" + s + "'");
}

inline double penalty_value(PenaltyKind k, double x) {
  switch (k) {
    case PenaltyKind::absolute: return std::abs(x);
    case PenaltyKind::square: return x * x;
    case PenaltyKind::exponential: return std::exp(x);
  }
  return 0;
}

// subgradient choice at zero for the absolute penalty: phi'(0) = 0
inline double penalty_derivative(PenaltyKind k, double x) {
  switch (k) {
    case PenaltyKind::absolute: return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
    case PenaltyKind::square: return 2.0 * x;
    case PenaltyKind::exponential: return std::exp(x);
  }
  return 0;
}

// E^k = trace(U*^T Xk^T Yk V*) - trace(U^T Xk^T Yk V)
inline double disparity_error(int k, const Matrix& u, const Matrix& v, const GroupedDataset& ds,
                              const std::vector<GroupOptimum>& optima) {
  if (k < 0 || k >= ds.num_groups) throw GroupMismatch("disparity_error: group out of range");
  Matrix xk = ds.group_x(k);
  Matrix yk = ds.group_y(k);
  const double achieved = (u.transpose() * (xk.transpose() * yk) * v).trace();
  return optima[static_cast<size_t>(k)].local_value - achieved;
}

inline double pairwise_delta(int k, int s, const Matrix& u, const Matrix& v,
                             const GroupedDataset& ds, const std::vector<GroupOptimum>& optima,
                             PenaltyKind penalty) {
  if (k == s) throw SamePair("pairwise_delta: k == s");
  return penalty_value(penalty, disparity_error(k, u, v, ds, optima) -
                                    disparity_error(s, u, v, ds, optima));
}

struct ComponentMetrics {
  Vector rho;        // rho_r
  Vector delta_max;  // Delta_max,r
  Vector delta_sum;  // Delta_sum,r (ordered pairs i != j)
};

struct MatrixMetrics {
  double rho = 0;
  double delta_max = 0;
  double delta_sum = 0;
  std::vector<double> group_errors;  // E^k(U, V)
};

namespace detail {

inline void max_sum_from_errors(const std::vector<double>& e, double& dmax, double& dsum) {
  dmax = 0;
  dsum = 0;
  for (size_t i = 0; i < e.size(); ++i)
    for (size_t j = 0; j < e.size(); ++j) {
      if (i == j) continue;
      const double d = std::abs(e[i] - e[j]);
      dmax = std::max(dmax, d);
      dsum += d;
    }
}

}  // namespace detail

// Per-dimension metrics; the per-column local optimum for group k is the
// r-th diagonal entry of its R-dimensional group CCA cross product.
inline ComponentMetrics component_metrics(const Matrix& u, const Matrix& v,
                                          const GroupedDataset& ds,
                                          const std::vector<GroupOptimum>& optima) {
  const Index r = u.cols();
  const int k = ds.num_groups;
  ComponentMetrics m;
  m.rho = correlation_profile(u, v, ds.x, ds.y);
  m.delta_max = Vector::Zero(r);
  m.delta_sum = Vector::Zero(r);

  std::vector<Matrix> cross(static_cast<size_t>(k));
  for (int g = 0; g < k; ++g)
    cross[static_cast<size_t>(g)] = ds.group_x(g).transpose() * ds.group_y(g);

  for (Index j = 0; j < r; ++j) {
    std::vector<double> e(static_cast<size_t>(k));
    for (int g = 0; g < k; ++g) {
      const double achieved = u.col(j).dot(cross[static_cast<size_t>(g)] * v.col(j));
      e[static_cast<size_t>(g)] = optima[static_cast<size_t>(g)].local_values_per_dim[j] - achieved;
    }
    detail::max_sum_from_errors(e, m.delta_max[j], m.delta_sum[j]);
  }
  return m;
}

inline MatrixMetrics matrix_metrics(const Matrix& u, const Matrix& v, const GroupedDataset& ds,
                                    const std::vector<GroupOptimum>& optima) {
  MatrixMetrics m;
  const double num = (u.transpose() * (ds.x.transpose() * ds.y) * v).trace();
  const double du = (u.transpose() * (ds.x.transpose() * ds.x) * u).trace();
  const double dv = (v.transpose() * (ds.y.transpose() * ds.y) * v).trace();
  m.rho = num / std::sqrt(du * dv);
  m.group_errors.resize(static_cast<size_t>(ds.num_groups));
  for (int g = 0; g < ds.num_groups; ++g)
    m.group_errors[static_cast<size_t>(g)] = disparity_error(g, u, v, ds, optima);
  detail::max_sum_from_errors(m.group_errors, m.delta_max, m.delta_sum);
  return m;
}

struct FairnessReport {
  ComponentMetrics component;
  MatrixMetrics matrix;
};

inline FairnessReport evaluate_fairness(const Matrix& u, const Matrix& v, const GroupedDataset& ds,
                                        const std::vector<GroupOptimum>& optima) {
  return FairnessReport{component_metrics(u, v, ds, optima), matrix_metrics(u, v, ds, optima)};
}

struct PercentageChange {
  std::vector<std::optional<double>> rho;        // P(rho_r), percent
  std::vector<std::optional<double>> delta_max;  // sign-flipped: positive = improvement
  std::vector<std::optional<double>> delta_sum;
};

inline PercentageChange percentage_change(const ComponentMetrics& baseline,
                                          const ComponentMetrics& method) {
  if (baseline.rho.size() != method.rho.size())
    throw ShapeMismatch("percentage_change: dimension mismatch");
  auto pct = [](double base, double val, double sign) -> std::optional<double> {
    if (std::abs(base) < 1e-12) return std::nullopt;
    return sign * (val - base) / base * 100.0;
  };
  PercentageChange out;
  for (Index j = 0; j < baseline.rho.size(); ++j) {
    out.rho.push_back(pct(baseline.rho[j], method.rho[j], +1.0));
    out.delta_max.push_back(pct(baseline.delta_max[j], method.delta_max[j], -1.0));
    out.delta_sum.push_back(pct(baseline.delta_sum[j], method.delta_sum[j], -1.0));
  }
  return out;
}

}  // namespace faircca
