#pragma once

// Synthetic two-view generator with planted canonical structure: per-group
// covariances built from QR factors of (noised) ground-truth projections,
// Gaussian sampling via Cholesky.

#include <random>
#include <vector>

#include "faircca/cca.hpp"

namespace faircca {

struct SynthSpec {
  Index dx = 10;
  Index dy = 10;
  Index r = 2;
  Matrix u_star;                    // dx x r ground truth; empty -> random
  Matrix v_star;                    // dy x r
  std::vector<Vector> group_rho;    // per-group canonical correlations, each length r
  std::vector<Index> group_sizes;
  double sigma_group = 0.1;         // noise added to canonical vectors per group
  double tau_x = 1.0;
  double tau_y = 0.001;
  Vector mu_x;                      // empty -> zero
  Vector mu_y;
  std::uint64_t seed = 0;

  Index num_groups() const { return static_cast<Index>(group_sizes.size()); }

  void validate() const {
    if (group_sizes.empty()) throw ConfigError("synth: need at least one group");
    if (group_rho.size() != group_sizes.size()) throw ConfigError("synth: rho/size count mismatch");
    if (tau_x <= 0 || tau_y <= 0) throw ConfigError("synth: tau must be positive");
    for (size_t k = 0; k < group_rho.size(); ++k) {
      if (group_rho[k].size() != r) throw ConfigError("synth: rho length != R");
      if ((group_rho[k].array() <= 0).any() || (group_rho[k].array() >= 1).any())
        throw ConfigError("synth: rho entries must lie in (0,1)");
      if (group_sizes[k] < r) throw ConfigError("synth: group size < R");
    }
  }
};

// The five-subgroup profile: sizes 300..500, strong group-specific rotations
// of the planted canonical directions (sigma_group), and leading correlations
// rising mildly with group size (0.85..0.95) so that per-group disparity is
// mostly attributable to the rotations, which a compromise projection can
// equalize, rather than to group size or correlation-level gaps, which it
// cannot.
inline SynthSpec default_synth_spec(Index dx = 10, Index dy = 10, Index r = 2,
                                    std::uint64_t seed = 0) {
  SynthSpec spec;
  spec.dx = dx;
  spec.dy = dy;
  spec.r = r;
  spec.seed = seed;
  spec.group_sizes = {300, 350, 400, 450, 500};
  spec.sigma_group = 0.8;
  const int k = 5;
  for (int g = 0; g < k; ++g) {
    Vector rho(r);
    const double lead = 0.85 + 0.1 * g / (k - 1);
    for (Index j = 0; j < r; ++j) rho[j] = lead * std::pow(0.9, static_cast<double>(j));
    spec.group_rho.push_back(rho);
  }
  return spec;
}

struct PlantedCovariance {
  Matrix sigma_x;
  Matrix sigma_y;
  Matrix sigma_xy;

  Matrix joint() const {
    const Index dx = sigma_x.rows(), dy = sigma_y.rows();
    Matrix j(dx + dy, dx + dy);
    j.topLeftCorner(dx, dx) = sigma_x;
    j.topRightCorner(dx, dy) = sigma_xy;
    j.bottomLeftCorner(dy, dx) = sigma_xy.transpose();
    j.bottomRightCorner(dy, dy) = sigma_y;
    return j;
  }
};

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

// Sigma = Q R^{-T} R^{-1} Q^T + tau * T (I - Q Q^T) T^T
inline Matrix view_covariance(const Matrix& basis, double tau, std::mt19937_64& rng) {
  const Index d = basis.rows();
  Eigen::HouseholderQR<Matrix> qr(basis);
  Matrix q = qr.householderQ() * Matrix::Identity(d, basis.cols());
  Matrix rinv = qr.matrixQR()
                    .topRows(basis.cols())
                    .triangularView<Eigen::Upper>()
                    .solve(Matrix::Identity(basis.cols(), basis.cols()));
  Matrix t = gaussian_matrix(d, d, rng);
  Matrix complement = Matrix::Identity(d, d) - q * q.transpose();
  return symmetrize(q * rinv.transpose() * rinv * q.transpose() +
                    tau * t * complement * t.transpose());
}

}  // namespace detail

inline PlantedCovariance build_covariance(const Matrix& u_star, const Matrix& v_star,
                                          const Vector& rho, double tau_x, double tau_y,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 10; ++attempt) {
    PlantedCovariance cov;
    cov.sigma_x = detail::view_covariance(u_star, tau_x, rng);
    cov.sigma_y = detail::view_covariance(v_star, tau_y, rng);
    // The noise term leaks into U^T Sigma_X U, so normalize the planted vectors
    // to be Sigma-orthonormal before forming the cross block. This keeps the
    // whitened cross-covariance's singular values at exactly rho < 1, which the
    // raw vectors only satisfy in the tau -> 0 limit.
    Matrix u_norm =
        u_star * detail::inverse_sqrt(symmetrize(u_star.transpose() * cov.sigma_x * u_star));
    Matrix v_norm =
        v_star * detail::inverse_sqrt(symmetrize(v_star.transpose() * cov.sigma_y * v_star));
    cov.sigma_xy = cov.sigma_x * u_norm * rho.asDiagonal() * v_norm.transpose() * cov.sigma_y;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.joint());
    if (eig.eigenvalues().minCoeff() >= -1e-8) return cov;
    // resample the noise factors rather than clipping eigenvalues
  }
  throw JointNotPSD("build_covariance: joint covariance stayed indefinite after 10 resamples");
}

inline std::pair<Matrix, Matrix> sample_group(const PlantedCovariance& cov, Index n,
                                              const Vector& mu_x, const Vector& mu_y,
                                              std::uint64_t seed) {
  if (n < 1) throw EmptyGroup("sample_group: N must be >= 1");
  Matrix joint = cov.joint();
  Eigen::LLT<Matrix> llt(joint);
  if (llt.info() != Eigen::Success) {
    joint.diagonal().array() += 1e-10;
    llt.compute(joint);
    if (llt.info() != Eigen::Success)
      throw JointNotPSD("sample_group: Cholesky failed even with jitter");
  }
  std::mt19937_64 rng(seed);
  const Index dx = cov.sigma_x.rows(), dy = cov.sigma_y.rows();
  Matrix z = detail::gaussian_matrix(n, dx + dy, rng);
  Matrix rows = z * llt.matrixL().transpose();
  if (mu_x.size() > 0) rows.leftCols(dx).rowwise() += mu_x.transpose();
  if (mu_y.size() > 0) rows.rightCols(dy).rowwise() += mu_y.transpose();
  return {rows.leftCols(dx), rows.rightCols(dy)};
}

inline GroupedDataset make_synthetic_grouped(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 master(mix_seed(spec.seed, 0));
  Matrix u_star = spec.u_star.size() > 0 ? spec.u_star
                                         : detail::gaussian_matrix(spec.dx, spec.r, master);
  Matrix v_star = spec.v_star.size() > 0 ? spec.v_star
                                         : detail::gaussian_matrix(spec.dy, spec.r, master);

  const Index total = [&] {
    Index n = 0;
    for (Index nk : spec.group_sizes) n += nk;
    return n;
  }();
  Matrix x(total, spec.dx);
  Matrix y(total, spec.dy);
  std::vector<int> labels(static_cast<size_t>(total));

  Index row = 0;
  for (Index k = 0; k < spec.num_groups(); ++k) {
    // per-group substream, independent of iteration order
    std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(k) + 1));
    Matrix uk = u_star + spec.sigma_group * detail::gaussian_matrix(spec.dx, spec.r, rng);
    Matrix vk = v_star + spec.sigma_group * detail::gaussian_matrix(spec.dy, spec.r, rng);
    // covariance noise factors share one stream so that groups with equal
    // vectors and correlations are identically distributed
    PlantedCovariance cov =
        build_covariance(uk, vk, spec.group_rho[static_cast<size_t>(k)], spec.tau_x, spec.tau_y,
                         mix_seed(spec.seed, 1000));
    auto [xk, yk] = sample_group(cov, spec.group_sizes[static_cast<size_t>(k)], spec.mu_x,
                                 spec.mu_y, mix_seed(spec.seed, 2000 + static_cast<std::uint64_t>(k)));
    x.middleRows(row, xk.rows()) = xk;
    y.middleRows(row, yk.rows()) = yk;
    for (Index i = 0; i < xk.rows(); ++i) labels[static_cast<size_t>(row + i)] = static_cast<int>(k);
    row += xk.rows();
  }
  return standardize(std::move(x), std::move(y), std::move(labels));
}

}  // namespace faircca
