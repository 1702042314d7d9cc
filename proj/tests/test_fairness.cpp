#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace faircca;

namespace {

struct FeasiblePair {
  StiefelPoint u;
  StiefelPoint v;
};

FeasiblePair random_pair(const GroupedDataset& ds, Index r, std::mt19937_64& rng) {
  GramPtr bx = make_gram(ds.x, 1e-8);
  GramPtr by = make_gram(ds.y, 1e-8);
  return {tst::random_feasible(ds.dx(), r, bx, rng), tst::random_feasible(ds.dy(), r, by, rng)};
}

}  // namespace

TEST_CASE("penalty functions and subgradient at zero") {
  for (auto k : {PenaltyKind::absolute, PenaltyKind::square}) {
    CHECK(penalty_value(k, 0.0) == 0.0);
    CHECK(penalty_value(k, 1.7) == penalty_value(k, -1.7));
  }
  CHECK(penalty_derivative(PenaltyKind::absolute, 0.0) == 0.0);
  CHECK(penalty_value(PenaltyKind::exponential, 2.0) ==
        penalty_derivative(PenaltyKind::exponential, 2.0));
  CHECK(penalty_value(PenaltyKind::square, -2.0) == 4.0);
  CHECK(penalty_value(PenaltyKind::absolute, 3.0) == 3.0);
  CHECK(penalty_value(PenaltyKind::exponential, 3.0) == Catch::Approx(std::exp(3.0)));
}

TEST_CASE("disparity_error vanishes at the group optimum") {
  std::mt19937_64 rng(21);
  GroupedDataset ds = tst::small_grouped(60, 3, 2, 1, rng);
  auto optima = solve_group_cca(ds, 2, 1e-8);
  // K = 1: the group is the whole dataset, so the global CCA solution is its optimum
  CcaSolution sol = solve_cca(ds.x, ds.y, 2, 1e-8);
  CHECK(std::abs(disparity_error(0, sol.u.z, sol.v.z, ds, optima)) < 1e-8);
  CHECK_THROWS_AS(disparity_error(5, sol.u.z, sol.v.z, ds, optima), GroupMismatch);
}

TEST_CASE("disparity_error matches direct trace recomputation") {
  std::mt19937_64 rng(22);
  GroupedDataset ds = tst::small_grouped(80, 4, 3, 2, rng);
  auto optima = solve_group_cca(ds, 2, 1e-8);
  auto pair = random_pair(ds, 2, rng);
  for (int k = 0; k < 2; ++k) {
    Matrix xk = ds.group_x(k), yk = ds.group_y(k);
    const double expect = (optima[static_cast<size_t>(k)].solution.u.z.transpose() *
                           (xk.transpose() * yk) * optima[static_cast<size_t>(k)].solution.v.z)
                              .trace() -
                          (pair.u.z.transpose() * (xk.transpose() * yk) * pair.v.z).trace();
    CHECK(disparity_error(k, pair.u.z, pair.v.z, ds, optima) ==
          Catch::Approx(expect).margin(1e-10));
  }
}

TEST_CASE("pairwise_delta penalty arithmetic") {
  std::mt19937_64 rng(23);
  GroupedDataset ds = tst::small_grouped(40, 3, 3, 2, rng);
  auto optima = solve_group_cca(ds, 1, 1e-8);
  auto pair = random_pair(ds, 1, rng);
  const double e0 = disparity_error(0, pair.u.z, pair.v.z, ds, optima);
  const double e1 = disparity_error(1, pair.u.z, pair.v.z, ds, optima);

  CHECK(pairwise_delta(0, 1, pair.u.z, pair.v.z, ds, optima, PenaltyKind::square) ==
        Catch::Approx((e0 - e1) * (e0 - e1)).margin(1e-12));
  CHECK(pairwise_delta(0, 1, pair.u.z, pair.v.z, ds, optima, PenaltyKind::absolute) ==
        pairwise_delta(1, 0, pair.u.z, pair.v.z, ds, optima, PenaltyKind::absolute));
  CHECK_THROWS_AS(pairwise_delta(1, 1, pair.u.z, pair.v.z, ds, optima, PenaltyKind::square),
                  SamePair);
}

TEST_CASE("component metrics: K = 1 gives zero disparity, K = 2 doubles the max") {
  std::mt19937_64 rng(24);
  GroupedDataset one = tst::small_grouped(50, 3, 2, 1, rng);
  auto opt1 = solve_group_cca(one, 2, 1e-8);
  auto p1 = random_pair(one, 2, rng);
  ComponentMetrics m1 = component_metrics(p1.u.z, p1.v.z, one, opt1);
  CHECK(m1.delta_max.isZero());
  CHECK(m1.delta_sum.isZero());

  GroupedDataset two = tst::small_grouped(60, 3, 2, 2, rng);
  auto opt2 = solve_group_cca(two, 2, 1e-8);
  auto p2 = random_pair(two, 2, rng);
  ComponentMetrics m2 = component_metrics(p2.u.z, p2.v.z, two, opt2);
  for (Index r = 0; r < 2; ++r)
    CHECK(m2.delta_sum[r] == Catch::Approx(2.0 * m2.delta_max[r]).margin(1e-12));
}

TEST_CASE("matrix-level lemma: rho = mean(rho_r) and the delta inequalities") {
  std::mt19937_64 rng(25);
  GroupedDataset ds = tst::small_grouped(90, 4, 3, 3, rng);
  auto optima = solve_group_cca(ds, 3, 1e-8);
  for (int trial = 0; trial < 25; ++trial) {
    auto pair = random_pair(ds, 3, rng);
    ComponentMetrics c = component_metrics(pair.u.z, pair.v.z, ds, optima);
    MatrixMetrics m = matrix_metrics(pair.u.z, pair.v.z, ds, optima);
    CHECK(m.rho == Catch::Approx(c.rho.mean()).margin(1e-12));
    CHECK(m.delta_max <= c.delta_max.sum() + 1e-10);
    CHECK(m.delta_sum <= c.delta_sum.sum() + 1e-10);
    for (Index r = 0; r < 3; ++r) {
      CHECK(c.delta_max[r] >= 0);
      CHECK(c.delta_sum[r] >= c.delta_max[r] - 1e-12);
    }
  }
}

TEST_CASE("shift cancellation: constant added to every E^k leaves deltas unchanged") {
  std::vector<double> e{0.3, -0.1, 0.7};
  double dmax1 = 0, dsum1 = 0, dmax2 = 0, dsum2 = 0;
  faircca::detail::max_sum_from_errors(e, dmax1, dsum1);
  for (auto& x : e) x += 5.0;
  faircca::detail::max_sum_from_errors(e, dmax2, dsum2);
  CHECK(dmax1 == Catch::Approx(dmax2).margin(1e-12));
  CHECK(dsum1 == Catch::Approx(dsum2).margin(1e-12));
}

TEST_CASE("fair condition: delta_sum_r = 0 iff all per-group errors equal") {
  std::mt19937_64 rng(26);
  GroupedDataset ds = tst::small_grouped(60, 3, 2, 3, rng);
  auto optima = solve_group_cca(ds, 1, 1e-8);
  auto pair = random_pair(ds, 1, rng);
  ComponentMetrics m = component_metrics(pair.u.z, pair.v.z, ds, optima);

  std::vector<double> e;
  for (int k = 0; k < 3; ++k) {
    const double achieved = pair.u.z.col(0).dot(
        (ds.group_x(k).transpose() * ds.group_y(k)) * pair.v.z.col(0));
    e.push_back(optima[static_cast<size_t>(k)].local_values_per_dim[0] - achieved);
  }
  const double spread = *std::max_element(e.begin(), e.end()) -
                        *std::min_element(e.begin(), e.end());
  CHECK((m.delta_sum[0] < 1e-10) == (spread < 1e-10));
}

TEST_CASE("percentage_change values and null guard") {
  ComponentMetrics base, method;
  base.rho = Vector::Constant(1, 0.7533);
  base.delta_max = Vector::Constant(1, 3.3802);
  base.delta_sum = Vector::Constant(1, 3.3802);
  method.rho = Vector::Constant(1, 0.7309);
  method.delta_max = Vector::Constant(1, 2.2722);
  method.delta_sum = Vector::Constant(1, 2.2722);

  PercentageChange p = percentage_change(base, method);
  REQUIRE(p.rho[0].has_value());
  CHECK(*p.rho[0] == Catch::Approx((0.7309 - 0.7533) / 0.7533 * 100.0).margin(1e-9));
  CHECK(*p.delta_sum[0] == Catch::Approx(32.7792).margin(1e-2));

  PercentageChange self = percentage_change(base, base);
  CHECK(*self.rho[0] == Catch::Approx(0.0).margin(1e-12));

  ComponentMetrics zero = base;
  zero.delta_sum = Vector::Zero(1);
  PercentageChange guarded = percentage_change(zero, method);
  CHECK_FALSE(guarded.delta_sum[0].has_value());
}
