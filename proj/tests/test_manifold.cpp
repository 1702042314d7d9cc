#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace faircca;

TEST_CASE("make_gram identity and product cases") {
  GramPtr g = make_gram(Matrix::Identity(2, 2), 0.0);
  CHECK(max_abs(Matrix(g->matrix() - Matrix::Identity(2, 2))) < 1e-15);

  Matrix col(2, 1);
  col << 1, 1;
  GramPtr g2 = make_gram(col, 0.0);
  REQUIRE(g2->dim() == 1);
  CHECK(g2->matrix()(0, 0) == Catch::Approx(2.0));
}

TEST_CASE("make_gram ridge keeps rank-deficient data SPD") {
  std::mt19937_64 rng(1);
  Matrix m = tst::gaussian(50, 2, rng);
  Matrix dup(50, 4);
  dup << m, m;  // duplicated columns
  GramPtr g = make_gram(dup, 1e-8);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g->matrix());
  CHECK(eig.eigenvalues().minCoeff() >= 1e-8 * (1 - 1e-6));
  CHECK_THROWS_AS(make_gram(dup, 0.0), FactorizationFailure);
}

TEST_CASE("project_tangent fixes tangent vectors and kills normal ones") {
  std::mt19937_64 rng(2);
  GramPtr g = tst::gram_from_spd(tst::random_spd(6, rng));
  StiefelPoint z = tst::random_feasible(6, 2, g, rng);

  // W = Z maps to zero
  TangentVector t0 = project_tangent(z, z.z);
  CHECK(max_abs(t0.w) < 1e-10);

  // already-tangent vectors are fixed
  TangentVector t1 = project_tangent(z, tst::gaussian(6, 2, rng));
  TangentVector t2 = project_tangent(z, t1.w);
  CHECK(max_abs(Matrix(t2.w - t1.w)) < 1e-10);
  CHECK(tangency_residual(z, t1.w) < 1e-10);

  CHECK_THROWS_AS(project_tangent(z, Matrix::Zero(3, 2)), ShapeMismatch);
}

TEST_CASE("retract_gpolar trivial euclidean cases") {
  GramPtr id = tst::gram_from_spd(Matrix::Identity(2, 2));
  StiefelPoint z(Matrix::Identity(2, 2), id);

  // B = I, A orthonormal -> returns A (step 0 from an orthonormal point)
  StiefelPoint same = retract_gpolar(z, TangentVector{Matrix::Zero(2, 2)}, 1.0);
  CHECK(max_abs(Matrix(same.z - z.z)) < 1e-12);

  // polar factor of diag(2,3) is the identity
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 2, 3;
  CHECK(max_abs(Matrix(gpolar_orthonormalize(a, *id) - Matrix::Identity(2, 2))) < 1e-12);
}

TEST_CASE("retract_gpolar feasibility and identity at eta = 0") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GramPtr g = tst::gram_from_spd(tst::random_spd(5, rng));
    StiefelPoint z = tst::random_feasible(5, 2, g, rng);
    TangentVector xi = project_tangent(z, tst::gaussian(5, 2, rng));

    StiefelPoint moved = retract_gpolar(z, xi, 0.7);
    CHECK(feasibility_residual(moved.z, *g) < 1e-10);

    StiefelPoint still = retract_gpolar(z, xi, 0.0);
    CHECK(max_abs(Matrix(still.z - z.z)) < 1e-10);
  }
}

TEST_CASE("retraction is first order: ||R(eta*xi) - (Z + eta*xi)|| / eta -> 0") {
  std::mt19937_64 rng(4);
  GramPtr g = tst::gram_from_spd(tst::random_spd(7, rng));
  StiefelPoint z = tst::random_feasible(7, 3, g, rng);
  TangentVector xi = project_tangent(z, tst::gaussian(7, 3, rng));
  xi.w /= std::sqrt(xi.w.squaredNorm());

  double prev = std::numeric_limits<double>::infinity();
  for (double eta : {1e-2, 1e-3, 1e-4}) {
    StiefelPoint r = retract_gpolar(z, xi, eta);
    const double ratio = (r.z - (z.z + eta * xi.w)).norm() / eta;
    CHECK(ratio < prev);
    prev = ratio;
  }
}

TEST_CASE("feasibility closure over random steps") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 4 + static_cast<Index>(rng() % 10);
    const Index r = 1 + static_cast<Index>(rng() % std::min<Index>(4, d));
    GramPtr g = tst::gram_from_spd(tst::random_spd(d, rng));
    StiefelPoint z = tst::random_feasible(d, r, g, rng);
    TangentVector xi = project_tangent(z, tst::gaussian(d, r, rng));
    StiefelPoint out = retract_gpolar(z, xi, unif(rng));
    CHECK(feasibility_residual(out.z, *g) <= 1e-8);
  }
}
