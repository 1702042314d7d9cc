#pragma once

// Grouped two-view data containers, column standardization, and the
// closed-form CCA solver (whitening + SVD), globally and per group.

#include <cmath>
#include <optional>
#include <vector>

#include "faircca/manifold.hpp"

namespace faircca {

struct GroupedDataset {
  Matrix x;                                   // N x Dx
  Matrix y;                                   // N x Dy
  std::vector<int> group_index;               // labels in [0, K)
  int num_groups = 0;
  std::vector<std::vector<Index>> group_rows;
  bool standardized = false;
  std::vector<Index> constant_columns_x;      // zeroed during standardization
  std::vector<Index> constant_columns_y;

  Index n() const { return x.rows(); }
  Index dx() const { return x.cols(); }
  Index dy() const { return y.cols(); }

  Matrix group_x(int k) const { return select_rows(x, group_rows.at(k)); }
  Matrix group_y(int k) const { return select_rows(y, group_rows.at(k)); }

  static Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (Index i = 0; i < out.rows(); ++i) out.row(i) = m.row(rows[static_cast<size_t>(i)]);
    return out;
  }
};

namespace detail {

// z-score columns with the (N-1) standard deviation; constant columns -> 0
inline void standardize_columns(Matrix& m, std::vector<Index>& constant_cols) {
  const Index n = m.rows();
  for (Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    m.col(j).array() -= mean;
    const double sd = std::sqrt(m.col(j).squaredNorm() / static_cast<double>(n - 1));
    if (sd < 1e-14) {
      m.col(j).setZero();
      constant_cols.push_back(j);
    } else {
      m.col(j) /= sd;
    }
  }
}

inline void index_groups(GroupedDataset& ds) {
  int k = 0;
  for (int g : ds.group_index) k = std::max(k, g + 1);
  ds.num_groups = k;
  ds.group_rows.assign(static_cast<size_t>(k), {});
  for (Index i = 0; i < static_cast<Index>(ds.group_index.size()); ++i)
    ds.group_rows[static_cast<size_t>(ds.group_index[static_cast<size_t>(i)])].push_back(i);
  for (int g = 0; g < k; ++g)
    if (ds.group_rows[static_cast<size_t>(g)].empty())
      throw EmptyGroup("group " + std::to_string(g) + " has no rows");
}

}  // namespace detail

inline GroupedDataset standardize(Matrix raw_x, Matrix raw_y, std::vector<int> groups) {
  if (raw_x.rows() != raw_y.rows()) throw ShapeMismatch("standardize: X and Y row counts differ");
  if (raw_x.rows() < 2) throw ShapeMismatch("standardize: need at least 2 rows");
  if (static_cast<Index>(groups.size()) != raw_x.rows())
    throw ShapeMismatch("standardize: group label count != N");
  if (!raw_x.allFinite() || !raw_y.allFinite()) throw NonFiniteInput("standardize: non-finite entry");

  GroupedDataset ds;
  ds.x = std::move(raw_x);
  ds.y = std::move(raw_y);
  ds.group_index = std::move(groups);
  detail::standardize_columns(ds.x, ds.constant_columns_x);
  detail::standardize_columns(ds.y, ds.constant_columns_y);
  detail::index_groups(ds);
  ds.standardized = true;
  return ds;
}

struct CcaSolution {
  StiefelPoint u;
  StiefelPoint v;
  Vector rho;  // non-increasing, in [0, 1]
  Index r() const { return rho.size(); }
};

struct GroupOptimum {
  int group = 0;
  CcaSolution solution;
  double local_value = 0.0;       // trace(U*^T Xk^T Yk V*)
  Vector local_values_per_dim;    // diag of the same cross product
};

namespace detail {

// B^{-1/2} via symmetric eigendecomposition, eigenvalues floored at 1e-12
inline Matrix inverse_sqrt(const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(b));
  Vector l = eig.eigenvalues().cwiseMax(1e-12);
  return eig.eigenvectors() * l.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// flip column pairs so the largest-magnitude entry of u_r is positive
inline void fix_signs(Matrix& u, Matrix& v) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
}

}  // namespace detail

inline CcaSolution solve_cca(const Matrix& x, const Matrix& y, Index r, double ridge) {
  if (r > std::min(x.cols(), y.cols())) throw ConfigError("solve_cca: R exceeds min(Dx, Dy)");
  GramPtr bx = make_gram(x, ridge);
  GramPtr by = make_gram(y, ridge);
  // the rank requirement lives in the whitening: with fewer than R usable
  // eigendirections there is no R-column feasible point, while a deficient
  // cross-product just means trailing correlations are zero
  for (const auto* b : {bx.get(), by.get()}) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(b->matrix(), Eigen::EigenvaluesOnly);
    if ((eig.eigenvalues().array() > 1e-12).count() < r)
      throw RankTooSmall("solve_cca: Gram matrix has fewer than R usable directions");
  }
  Matrix wx = detail::inverse_sqrt(bx->matrix());
  Matrix wy = detail::inverse_sqrt(by->matrix());
  Matrix c = wx * (x.transpose() * y) * wy;
  Eigen::BDCSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix u = wx * svd.matrixU().leftCols(r);
  Matrix v = wy * svd.matrixV().leftCols(r);
  detail::fix_signs(u, v);
  return CcaSolution{StiefelPoint(std::move(u), bx), StiefelPoint(std::move(v), by),
                     svd.singularValues().head(r)};
}

inline std::vector<GroupOptimum> solve_group_cca(const GroupedDataset& ds, Index r, double ridge) {
  std::vector<GroupOptimum> out;
  out.reserve(static_cast<size_t>(ds.num_groups));
  for (int k = 0; k < ds.num_groups; ++k) {
    Matrix xk = ds.group_x(k);
    Matrix yk = ds.group_y(k);
    CcaSolution sol = solve_cca(xk, yk, r, ridge);
    Matrix cross = sol.u.z.transpose() * (xk.transpose() * yk) * sol.v.z;
    GroupOptimum opt{k, std::move(sol), cross.trace(), cross.diagonal()};
    out.push_back(std::move(opt));
  }
  return out;
}

// rho_r = u_r^T X^T Y v_r / sqrt(u_r^T X^T X u_r * v_r^T Y^T Y v_r)
inline Vector correlation_profile(const Matrix& u, const Matrix& v, const Matrix& x,
                                  const Matrix& y) {
  if (u.rows() != x.cols() || v.rows() != y.cols() || u.cols() != v.cols())
    throw ShapeMismatch("correlation_profile: shape mismatch");
  Matrix xu = x * u;
  Matrix yv = y * v;
  Vector rho(u.cols());
  for (Index j = 0; j < u.cols(); ++j) {
    const double denom2 = xu.col(j).squaredNorm() * yv.col(j).squaredNorm();
    if (denom2 < 1e-14 * 1e-14) throw DegenerateDirection("correlation_profile: zero-length projection");
    rho[j] = xu.col(j).dot(yv.col(j)) / std::sqrt(denom2);
  }
  return rho;
}

}  // namespace faircca
