#pragma once

// Generalized Stiefel manifold St(D, R, B) = { Z : Z^T B Z = I_R } with
// tangent-space projection and the generalized polar retraction.

#include <memory>
#include <utility>

#include "faircca/common.hpp"

namespace faircca {

inline constexpr double kFeasTol = 1e-8;

// SPD constraint matrix B = M^T M + eps*I with a cached Cholesky factor.
class GramOperator {
 public:
  GramOperator(Matrix b, double ridge) : b_(symmetrize(std::move(b))), ridge_(ridge) {
    llt_.compute(b_);
    if (llt_.info() != Eigen::Success)
      throw FactorizationFailure("gram matrix is not positive definite; increase ridge");
  }

  const Matrix& matrix() const { return b_; }
  Index dim() const { return b_.rows(); }
  double ridge() const { return ridge_; }

  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }

 private:
  Matrix b_;
  double ridge_;
  Eigen::LLT<Matrix> llt_;
};

using GramPtr = std::shared_ptr<const GramOperator>;

inline double default_ridge(const Matrix& m) {
  const Index d = m.cols();
  return 1e-8 * m.squaredNorm() / static_cast<double>(d);
}

inline GramPtr make_gram(const Matrix& m, double ridge) {
  if (m.rows() < 1 || m.cols() < 1) throw ShapeMismatch("make_gram: empty data matrix");
  if (ridge < 0) throw ConfigError("make_gram: ridge must be nonnegative");
  Matrix b = m.transpose() * m;
  b.diagonal().array() += ridge;
  return std::make_shared<const GramOperator>(std::move(b), ridge);
}

inline double feasibility_residual(const Matrix& z, const GramOperator& gram) {
  const Index r = z.cols();
  Matrix g = z.transpose() * gram.matrix() * z;
  g.diagonal().array() -= 1.0;
  (void)r;
  return max_abs(g);
}

// A point Z with Z^T B Z = I_R.
struct StiefelPoint {
  Matrix z;
  GramPtr gram;

  StiefelPoint(Matrix zz, GramPtr g, bool check = true) : z(std::move(zz)), gram(std::move(g)) {
    if (z.rows() != gram->dim()) throw ShapeMismatch("StiefelPoint: row count != gram dim");
    if (z.cols() > z.rows()) throw ShapeMismatch("StiefelPoint: R > D");
    if (check) {
      const double res = feasibility_residual(z, *gram);
      if (res > kFeasTol) throw FeasibilityViolation("StiefelPoint: feasibility residual " + std::to_string(res));
    }
  }

  Index dim() const { return z.rows(); }
  Index rank() const { return z.cols(); }
};

struct TangentVector {
  Matrix w;  // satisfies Z^T B W + W^T B Z = 0 at the base point
};

inline double tangency_residual(const StiefelPoint& base, const Matrix& w) {
  Matrix s = base.z.transpose() * base.gram->matrix() * w;
  return max_abs(Matrix(s + s.transpose()));
}

// Pi_Z(W) = W - Z * sym(Z^T B W)
inline TangentVector project_tangent(const StiefelPoint& base, const Matrix& w) {
  if (w.rows() != base.dim() || w.cols() != base.rank())
    throw ShapeMismatch("project_tangent: shape mismatch");
  Matrix s = symmetrize(base.z.transpose() * base.gram->matrix() * w);
  return TangentVector{w - base.z * s};
}

// B-orthonormalize a full-column-rank matrix A via generalized polar
// decomposition: A = Ubar S Vbar^T, Q L Q^T = Ubar^T B Ubar, result
// Ubar Q L^{-1/2} Q^T Vbar^T.
inline Matrix gpolar_orthonormalize(const Matrix& a, const GramOperator& gram) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix& ubar = svd.matrixU();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(ubar.transpose() * gram.matrix() * ubar));
  if (eig.eigenvalues().minCoeff() < 1e-12)
    throw RankDeficientStep("gpolar: step produced a rank-deficient point; shrink the step");
  Matrix inv_sqrt = eig.eigenvectors() *
                    eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                    eig.eigenvectors().transpose();
  return ubar * inv_sqrt * svd.matrixV().transpose();
}

inline StiefelPoint retract_gpolar(const StiefelPoint& base, const TangentVector& xi, double eta) {
  if (eta < 0) throw ConfigError("retract_gpolar: negative step");
  Matrix a = base.z + eta * xi.w;
  Matrix z = gpolar_orthonormalize(a, *base.gram);
  const double res = feasibility_residual(z, *base.gram);
  if (res > kFeasTol)
    throw FeasibilityViolation("retract_gpolar: residual " + std::to_string(res));
  return StiefelPoint(std::move(z), base.gram, /*check=*/false);
}

}  // namespace faircca
