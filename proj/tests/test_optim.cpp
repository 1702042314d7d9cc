#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace faircca;

TEST_CASE("step_size follows 1/sqrt(t+1)") {
  CHECK(step_size(0, 0.4) == Catch::Approx(0.4));
  CHECK(step_size(3, 0.4) == Catch::Approx(0.2));
  CHECK(step_size(99, 0.4) == Catch::Approx(0.04));
}

TEST_CASE("min_norm_direction trivial cases") {
  std::mt19937_64 rng(31);
  Matrix g = tst::gaussian(4, 2, rng);
  Matrix gv = tst::gaussian(3, 2, rng);

  SECTION("single objective: P = -g") {
    MinNormSolution sol = min_norm_direction({{g, gv}});
    CHECK(max_abs(Matrix(sol.direction.u + g)) < 1e-14);
    CHECK(sol.weights.mu[0] == Catch::Approx(1.0));
  }

  SECTION("opposing gradients cancel") {
    MinNormSolution sol = min_norm_direction({{g, gv}, {-g, -gv}});
    CHECK(sol.norm < 1e-10);
    CHECK(sol.weights.mu[0] == Catch::Approx(0.5).margin(1e-10));
  }

  SECTION("orthogonal unit gradients split evenly") {
    Matrix a = Matrix::Zero(2, 1), b = Matrix::Zero(2, 1);
    a(0, 0) = 1;
    b(1, 0) = 1;
    Matrix zv = Matrix::Zero(1, 1);
    MinNormSolution sol = min_norm_direction({{a, zv}, {b, zv}});
    CHECK(sol.weights.mu[0] == Catch::Approx(0.5).margin(1e-10));
    CHECK(sol.norm * sol.norm == Catch::Approx(0.5).margin(1e-10));
  }
}

TEST_CASE("min_norm_direction matches the simplex grid oracle at M = 3") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<GradientPair> grads;
    for (int i = 0; i < 3; ++i) grads.push_back({tst::gaussian(5, 2, rng), tst::gaussian(4, 2, rng)});
    Matrix gram(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        gram(i, j) = grads[static_cast<size_t>(i)].u.cwiseProduct(grads[static_cast<size_t>(j)].u).sum() +
                     grads[static_cast<size_t>(i)].v.cwiseProduct(grads[static_cast<size_t>(j)].v).sum();

    MinNormSolution sol = min_norm_direction(grads);
    CHECK(sol.norm == Catch::Approx(tst::grid_min_norm(gram)).margin(1e-3));

    // optimality identity: max_i <P, g_i> = -||P||^2
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& g : grads)
      worst = std::max(worst, sol.direction.u.cwiseProduct(g.u).sum() +
                                  sol.direction.v.cwiseProduct(g.v).sum());
    CHECK(std::abs(worst + sol.norm * sol.norm) <= 1e-8 * (1 + sol.norm * sol.norm));
  }
}

TEST_CASE("MF objective gradients match finite differences") {
  std::mt19937_64 rng(33);
  GroupedDataset ds = tst::small_grouped(30, 4, 3, 2, rng);
  auto optima = solve_group_cca(ds, 2, 1e-8);
  FitWorkspace ws(ds, optima);
  Matrix u = tst::gaussian(4, 2, rng), v = tst::gaussian(3, 2, rng);

  for (auto penalty : {PenaltyKind::square, PenaltyKind::exponential}) {
    auto grads = objective_gradients_mf(u, v, ws, penalty);
    REQUIRE(grads.size() == 2);  // f_1 plus one pair
    for (size_t i = 0; i < grads.size(); ++i) {
      auto [fu, fv] = tst::fd_gradient(
          [&](const Matrix& uu, const Matrix& vv) {
            return objective_values_mf(uu, vv, ws, penalty)[i];
          },
          u, v);
      const double scale = std::max(1.0, fu.norm() + fv.norm());
      CHECK((grads[i].u - fu).norm() / scale < 1e-5);
      CHECK((grads[i].v - fv).norm() / scale < 1e-5);
    }
  }
}

TEST_CASE("MF gradient list size and zero pair gradient under absolute penalty") {
  std::mt19937_64 rng(34);
  GroupedDataset one = tst::small_grouped(30, 3, 2, 1, rng);
  auto opt1 = solve_group_cca(one, 1, 1e-8);
  FitWorkspace ws1(one, opt1);
  CHECK(objective_gradients_mf(Matrix::Ones(3, 1), Matrix::Ones(2, 1), ws1,
                               PenaltyKind::absolute)
            .size() == 1);

  // duplicate the same rows into two identical groups: E^1 = E^2, phi'(0) = 0
  Matrix x = tst::gaussian(20, 3, rng);
  Matrix y = tst::gaussian(20, 2, rng);
  Matrix x2(40, 3), y2(40, 2);
  x2 << x, x;
  y2 << y, y;
  std::vector<int> labels(40, 0);
  for (int i = 20; i < 40; ++i) labels[static_cast<size_t>(i)] = 1;
  GroupedDataset twin = standardize(x2, y2, labels);
  auto opt2 = solve_group_cca(twin, 1, 1e-8);
  FitWorkspace ws2(twin, opt2);
  auto grads = objective_gradients_mf(Matrix::Ones(3, 1), Matrix::Ones(2, 1), ws2,
                                      PenaltyKind::absolute);
  REQUIRE(grads.size() == 2);
  CHECK(max_abs(grads[1].u) < 1e-12);
  CHECK(max_abs(grads[1].v) < 1e-12);
}

TEST_CASE("SF gradient: lambda = 0 and K = 1 reduce to the plain CCA gradient") {
  std::mt19937_64 rng(35);
  GroupedDataset ds = tst::small_grouped(30, 4, 3, 2, rng);
  auto optima = solve_group_cca(ds, 2, 1e-8);
  FitWorkspace ws(ds, optima);
  Matrix u = tst::gaussian(4, 2, rng), v = tst::gaussian(3, 2, rng);

  GradientPair g0 = sf_cca_objective_gradient(u, v, ws, 0.0, PenaltyKind::square);
  auto f1 = objective_gradients_mf(u, v, ws, PenaltyKind::square)[0];
  CHECK(max_abs(Matrix(g0.u - f1.u)) < 1e-14);
  CHECK(max_abs(Matrix(g0.v - f1.v)) < 1e-14);

  GroupedDataset one = tst::small_grouped(30, 4, 3, 1, rng);
  auto opt1 = solve_group_cca(one, 2, 1e-8);
  FitWorkspace ws1(one, opt1);
  GradientPair ga = sf_cca_objective_gradient(u, v, ws1, 5.0, PenaltyKind::square);
  GradientPair gb = sf_cca_objective_gradient(u, v, ws1, 0.0, PenaltyKind::square);
  CHECK(max_abs(Matrix(ga.u - gb.u)) < 1e-14);

  // finite-difference check of the composite
  GradientPair g = sf_cca_objective_gradient(u, v, ws, 2.5, PenaltyKind::square);
  auto [fu, fv] = tst::fd_gradient(
      [&](const Matrix& uu, const Matrix& vv) {
        return sf_objective(uu, vv, ws, 2.5, PenaltyKind::square);
      },
      u, v);
  const double scale = std::max(1.0, fu.norm() + fv.norm());
  CHECK((g.u - fu).norm() / scale < 1e-5);
  CHECK((g.v - fv).norm() / scale < 1e-5);
}

TEST_CASE("K = 1 warm-started fits stay at the CCA solution") {
  std::mt19937_64 rng(36);
  GroupedDataset ds = tst::small_grouped(60, 3, 3, 1, rng);
  OptimizerConfig cfg;
  cfg.r = 2;
  cfg.ridge = 1e-8;
  cfg.init = InitKind::global_cca;

  CcaSolution base = solve_cca(ds.x, ds.y, 2, 1e-8);

  cfg.method = Method::mf_cca;
  cfg.eta0 = 0.1;
  FairCcaResult mf = mf_cca_fit(ds, cfg);
  Vector rho_mf = correlation_profile(mf.u, mf.v, ds.x, ds.y);
  for (Index r = 0; r < 2; ++r) CHECK(rho_mf[r] == Catch::Approx(base.rho[r]).margin(1e-6));
  ComponentMetrics m = component_metrics(mf.u, mf.v, ds, mf.group_optima);
  CHECK(m.delta_sum.isZero(1e-10));

  cfg.method = Method::sf_cca;
  cfg.eta0 = 0.02;
  cfg.lambda = 0.0;
  FairCcaResult sf = sf_cca_fit(ds, cfg);
  Vector rho_sf = correlation_profile(sf.u, sf.v, ds.x, ds.y);
  for (Index r = 0; r < 2; ++r) CHECK(rho_sf[r] == Catch::Approx(base.rho[r]).margin(1e-6));
}

TEST_CASE("stop_tol = inf returns after exactly one recorded iteration") {
  std::mt19937_64 rng(37);
  GroupedDataset ds = tst::small_grouped(40, 3, 2, 2, rng);
  OptimizerConfig cfg;
  cfg.method = Method::mf_cca;
  cfg.r = 1;
  cfg.ridge = 1e-8;
  cfg.stop_tol = std::numeric_limits<double>::infinity();
  FairCcaResult res = mf_cca_fit(ds, cfg);
  CHECK(res.trace.size() == 1);
  CHECK(res.converged);
}

TEST_CASE("running minimum of the direction norm is non-increasing") {
  std::mt19937_64 rng(38);
  GroupedDataset ds = tst::small_grouped(80, 4, 3, 3, rng);
  OptimizerConfig cfg;
  cfg.method = Method::mf_cca;
  cfg.r = 2;
  cfg.ridge = 1e-8;
  cfg.eta0 = 0.05;
  cfg.t_max = 40;
  cfg.penalty = PenaltyKind::square;
  FairCcaResult res = mf_cca_fit(ds, cfg);
  REQUIRE(res.trace.size() >= 2);
  double running = std::numeric_limits<double>::infinity();
  for (const auto& rec : res.trace) {
    const double next = std::min(running, rec.direction_norm);
    CHECK(next <= running);
    running = next;
    CHECK(std::max(rec.feas_u, rec.feas_v) <= 1e-8);
  }
}

TEST_CASE("identical config and seed give identical traces") {
  std::mt19937_64 rng(39);
  GroupedDataset ds = tst::small_grouped(60, 4, 3, 2, rng);
  OptimizerConfig cfg;
  cfg.method = Method::sf_cca;
  cfg.r = 2;
  cfg.ridge = 1e-8;
  cfg.eta0 = 0.02;
  cfg.lambda = 3.0;
  cfg.t_max = 25;
  cfg.init = InitKind::random_feasible;
  cfg.seed = 77;

  FairCcaResult a = sf_cca_fit(ds, cfg);
  FairCcaResult b = sf_cca_fit(ds, cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  for (size_t t = 0; t < a.trace.size(); ++t)
    CHECK(a.trace[t].direction_norm == b.trace[t].direction_norm);
}

TEST_CASE("descent: every objective non-increasing under a small fixed step") {
  std::mt19937_64 rng(40);
  GroupedDataset ds = tst::small_grouped(60, 4, 3, 2, rng);
  auto optima = solve_group_cca(ds, 2, 1e-8);
  FitWorkspace ws(ds, optima);

  GramPtr bx = make_gram(ds.x, 1e-8);
  GramPtr by = make_gram(ds.y, 1e-8);
  StiefelPoint u = tst::random_feasible(4, 2, bx, rng);
  StiefelPoint v = tst::random_feasible(3, 2, by, rng);

  // backtracking probe for a step size that certifies componentwise descent
  double eta = 0.1;
  bool found = false;
  for (int halve = 0; halve < 12 && !found; ++halve, eta /= 2) {
    StiefelPoint cu = u, cv = v;
    found = true;
    for (int t = 0; t < 50 && found; ++t) {
      auto before = objective_values_mf(cu.z, cv.z, ws, PenaltyKind::square);
      MinNormSolution sol = mf_direction(cu, cv, ws, PenaltyKind::square);
      if (sol.norm < 1e-12) break;
      cu = retract_gpolar(cu, TangentVector{sol.direction.u}, eta);
      cv = retract_gpolar(cv, TangentVector{sol.direction.v}, eta);
      auto after = objective_values_mf(cu.z, cv.z, ws, PenaltyKind::square);
      for (size_t i = 0; i < before.size(); ++i)
        if (after[i] > before[i] + 1e-10) found = false;
    }
  }
  CHECK(found);
}
