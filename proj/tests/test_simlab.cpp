#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <cstring>

#include "weaksep/marginal_fpca.hpp"
#include "weaksep/simlab.hpp"

using namespace weaksep;

TEST_CASE("raw trigonometric columns at hand-picked points") {
  Eigen::VectorXd grid(3);
  grid << 0.0, 0.25, 1.0;
  Eigen::MatrixXd raw = trig_psi_raw(grid);
  const double sqrt2 = std::sqrt(2.0);
  CHECK(raw(0, 0) == doctest::Approx(-sqrt2));            // psi_1(0) = -sqrt(2)
  CHECK(raw(1, 1) == doctest::Approx(sqrt2));             // psi_2(0.25) = sqrt(2)
  CHECK(raw(2, 1) == doctest::Approx(0.0).epsilon(0).scale(1));  // sin(2 pi)
}

TEST_CASE("b-spline columns: clamped ends and supports") {
  Eigen::VectorXd grid(5);
  grid << 0.0, 0.25, 0.5, 0.75, 1.0;
  Eigen::MatrixXd b = bspline_columns(grid);
  REQUIRE(b.cols() == 3);
  CHECK(b(0, 0) == doctest::Approx(1.0));   // clamped left end
  CHECK(b(2, 0) == doctest::Approx(0.0));   // support of B1 ends at 0.5
  CHECK(b(4, 0) == doctest::Approx(0.0));
  for (Eigen::Index i = 0; i < b.size(); ++i) CHECK(b(i / 3, i % 3) >= -1e-15);
}

TEST_CASE("sim basis columns are orthonormal under trapezoid weights") {
  SimBasis basis = make_sim_basis();
  REQUIRE(basis.psi.rows() == 20);
  REQUIRE(basis.psi.cols() == 8);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      double want = a == b ? 1.0 : 0.0;
      CHECK(std::abs(basis.grid.inner(basis.psi.col(a), basis.psi.col(b)) - want) <
            1e-10);
      CHECK(std::abs(basis.grid.inner(basis.phi.col(a), basis.phi.col(b)) - want) <
            1e-10);
    }
}

TEST_CASE("phi_1 keeps the direction of the first b-spline") {
  SimBasis basis = make_sim_basis();
  Eigen::VectorXd b1 = bspline_columns(basis.grid.points).col(0);
  Eigen::VectorXd expected = b1 / basis.grid.norm(b1);
  CHECK((basis.phi.col(0) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sim basis is bit-reproducible") {
  SimBasis a = make_sim_basis(), b = make_sim_basis();
  CHECK(std::memcmp(a.psi.data(), b.psi.data(), sizeof(double) * a.psi.size()) == 0);
  CHECK(std::memcmp(a.phi.data(), b.phi.data(), sizeof(double) * a.phi.size()) == 0);
}

TEST_CASE("eigenvalue sequences evaluate to the closed forms") {
  VMatrix v = build_v(VVariant::v1);
  double den_l = 0.0, den_g = 0.0;
  for (int j = 1; j <= 8; ++j) {
    den_l += std::exp(1.2 * j);
    den_g += std::exp(1.6 * j);
  }
  for (int j = 1; j <= 8; ++j) {
    CHECK(v.lambda(j - 1) ==
          doctest::Approx(std::exp(1.2 * (9 - j)) / den_l).epsilon(1e-14));
    CHECK(v.gamma(j - 1) ==
          doctest::Approx(std::exp(1.6 * (9 - j)) / den_g).epsilon(1e-14));
  }
  CHECK(v.lambda(0) == doctest::Approx(0.6989).epsilon(1e-3));
  CHECK(v.gamma(0) == doctest::Approx(0.7981).epsilon(1e-3));
  CHECK(v.lambda.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("V1 is rank one with the right margins") {
  VMatrix v = build_v(VVariant::v1);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v.v);
  CHECK(svd.singularValues()(1) <= 1e-12 * svd.singularValues()(0));
  for (int j = 0; j < 8; ++j)
    CHECK(std::abs(v.v.row(j).sum() - v.lambda(j)) < 1e-12);
  for (int k = 0; k < 8; ++k)
    CHECK(std::abs(v.v.col(k).sum() - v.gamma(k)) < 1e-12);
}

TEST_CASE("V2 is rank two, nonnegative, with the right margins") {
  VMatrix v = build_v(VVariant::v2);
  CHECK(v.v.minCoeff() >= 0.0);
  for (int j = 0; j < 8; ++j)
    CHECK(std::abs(v.v.row(j).sum() - v.lambda(j)) < 1e-12);
  for (int k = 0; k < 8; ++k)
    CHECK(std::abs(v.v.col(k).sum() - v.gamma(k)) < 1e-12);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v.v);
  CHECK(svd.singularValues()(1) > 1e-6);
  CHECK(svd.singularValues()(2) <= 1e-12 * svd.singularValues()(0));
  // rows 1-2 proportional, rows 3-8 proportional
  CHECK((v.v.row(0) / v.lambda(0) - v.v.row(1) / v.lambda(1)).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((v.v.row(2) / v.lambda(2) - v.v.row(7) / v.lambda(7)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("sigma assembly: H0 diagonal, feasible single PD, infeasible errors") {
  VMatrix v = build_v(VVariant::v1);
  Eigen::MatrixXd sigma = assemble_sigma(v, OffDiagonalSpec::h0());
  for (int a = 0; a < 64; ++a)
    for (int b = 0; b < 64; ++b)
      if (a != b) CHECK(sigma(a, b) == 0.0);
  CHECK(sigma(1, 1) == doctest::Approx(v.v(0, 1)));

  Eigen::MatrixXd ok = assemble_sigma(v, OffDiagonalSpec::single(0.065));
  CHECK(ok(1, 8) == 0.065);
  CHECK(ok(8, 1) == 0.065);
  CHECK_THROWS_WITH_AS(assemble_sigma(v, OffDiagonalSpec::single(1.0)),
                       doctest::Contains("not PD"), Error);
}

TEST_CASE("maximal PD covariance against the closed-form bound") {
  VMatrix v1 = build_v(VVariant::v1);
  double closed_form = std::sqrt(v1.lambda(0) * v1.gamma(1) * v1.lambda(1) *
                                 v1.gamma(0));
  double got = max_pd_cov(v1, OffDiagonalSpec::Kind::single);
  CHECK(std::abs(got - closed_form) < 1e-3);
  CHECK(std::abs(got - 0.1375) < 1e-3);

  VMatrix v2 = build_v(VVariant::v2);
  CHECK(std::abs(max_pd_cov(v2, OffDiagonalSpec::Kind::single) - 0.11) < 0.01);

  // the triple pairs occupy disjoint entries, so the common fraction is ~1
  double f = max_pd_cov(v1, OffDiagonalSpec::Kind::triple);
  CHECK(f > 0.99);
  CHECK(f <= 1.001);
  Eigen::MatrixXd sigma = assemble_sigma(v1, OffDiagonalSpec::triple());
  CHECK(sigma(1, 8) > 0.13);

  VMatrix zero = v1;
  zero.v.setZero();
  CHECK(max_pd_cov(zero, OffDiagonalSpec::Kind::single) == 0.0);
}

TEST_CASE("sample_scores moments under a fixed seed") {
  VMatrix v = build_v(VVariant::v1);
  const int n = 100000;
  {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(64, 64);
    Rng rng(11, 0);
    Eigen::MatrixXd x = sample_scores(sigma, ScoreDistribution::normal, n, rng);
    Eigen::MatrixXd cov = x.transpose() * x / n;
    CHECK((cov - sigma).cwiseAbs().maxCoeff() < 5.0 / std::sqrt(n));
  }
  {
    Eigen::MatrixXd sigma = assemble_sigma(v, OffDiagonalSpec::single(0.065));
    Rng rng(12, 0);
    Eigen::MatrixXd x = sample_scores(sigma, ScoreDistribution::t6, n, rng);
    Eigen::MatrixXd cov = x.transpose() * x / n;
    CHECK((cov - sigma).cwiseAbs().maxCoeff() < 0.02);
  }
}

TEST_CASE("sample_scores is bit-reproducible") {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(64, 64);
  Rng a(5, 3), b(5, 3);
  Eigen::MatrixXd x = sample_scores(sigma, ScoreDistribution::t6, 50, a);
  Eigen::MatrixXd y = sample_scores(sigma, ScoreDistribution::t6, 50, b);
  CHECK(std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0);
}

TEST_CASE("synthesize_surfaces: zero and one-hot scores") {
  SimBasis basis = make_sim_basis();
  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(2, 64);
  MultiwayDataset flat = synthesize_surfaces(zeros, basis);
  for (double v : flat.values) CHECK(v == 0.0);

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(1, 64);
  onehot(0, 0) = 1.0;  // chi_{11}
  MultiwayDataset surf = synthesize_surfaces(onehot, basis);
  for (int s = 0; s < 20; ++s)
    for (int t = 0; t < 20; ++t)
      CHECK(surf.value(0, s, t) ==
            doctest::Approx(basis.psi(s, 0) * basis.phi(t, 0)).epsilon(1e-14));
}

TEST_CASE("marginal pipeline recovers the synthetic spectra and scores") {
  SimBasis basis = make_sim_basis();
  VMatrix v = build_v(VVariant::v1);
  Eigen::MatrixXd sigma = assemble_sigma(v, OffDiagonalSpec::h0());
  Rng rng(21, 0);
  const int n = 500;
  Eigen::MatrixXd true_scores =
      sample_scores(sigma, ScoreDistribution::normal, n, rng);
  MultiwayDataset data = synthesize_surfaces(true_scores, basis);

  CenteredDataset c = center(data);
  auto [c_s, c_t] = marginal_covariances(c);
  MarginalEigenSystem eig = eigendecompose_marginals(c_s, c_t, data.s_axis,
                                                     data.t_axis);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(eig.lambda(j) - v.lambda(j)) <= 0.1 * v.lambda(j));
    CHECK(std::abs(eig.gamma(j) - v.gamma(j)) <= 0.1 * v.gamma(j));
  }

  ScoreArray scores = marginal_scores(c, eig, 3, 3);
  for (auto [j, k] : {std::pair{0, 0}, {0, 1}, {1, 0}}) {
    Eigen::VectorXd est(n), tru(n);
    for (int i = 0; i < n; ++i) {
      est(i) = scores.at(i, j, k);
      tru(i) = true_scores(i, j * 8 + k);
    }
    est.array() -= est.mean();
    tru.array() -= tru.mean();
    double corr = est.dot(tru) / (est.norm() * tru.norm());
    CHECK(std::abs(corr) >= 0.99);
  }

  // empirical eta inherits the rank-1 structure of V1
  ScoreArray full = marginal_scores(c, eig, eig.rank_s(), eig.rank_t());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(full.eta);
  CHECK(svd.singularValues()(1) <= 0.1 * svd.singularValues()(0));
}

TEST_CASE("run_scenario smoke: deterministic tiny cell") {
  SimulationScenario scenario;
  scenario.variant = VVariant::v1;
  scenario.dist = ScoreDistribution::normal;
  scenario.n = 40;
  scenario.off_diag = OffDiagonalSpec::h0();
  scenario.trials = 5;
  scenario.seed = 31;
  RejectionCell cell = run_scenario(scenario);
  CHECK(cell.trials == 5);
  CHECK(cell.rate >= 0.0);
  CHECK(cell.rate <= 1.0);
  CHECK(cell.rate * 5 == std::round(cell.rate * 5));
  RejectionCell again = run_scenario(scenario);
  CHECK(again.rate == cell.rate);
}

TEST_CASE("scenario JSON grids expand into cells") {
  std::string text = R"({
    "variant": "V1",
    "distribution": "normal",
    "n": [50, 100],
    "off_diagonal": ["H0", {"single": 0.065}, {"single": "max"}, "triple"],
    "pk_rules": ["FVE", [2, 2]],
    "trials": 10,
    "seed": 7
  })";
  std::vector<SimulationScenario> cells = scenarios_from_json(text);
  CHECK(cells.size() == 2 * 4 * 2);
  CHECK(cells[0].off_diag.kind == OffDiagonalSpec::Kind::h0);
  CHECK(cells[0].pk_rule.auto_fve);
  CHECK(!cells[1].pk_rule.auto_fve);
  CHECK(cells[1].pk_rule.p == 2);
  bool found_max = false;
  for (const auto& cell : cells)
    if (cell.off_diag.kind == OffDiagonalSpec::Kind::single &&
        std::abs(cell.off_diag.value - 0.1375) < 1e-3)
      found_max = true;
  CHECK(found_max);
  CHECK_THROWS_AS(scenarios_from_json("{\"variant\": \"V9\", \"n\": 10}"), Error);
}

TEST_CASE("rejection table CSV round trip") {
  RejectionTable table;
  for (int n : {50, 100})
    for (int rule = 0; rule < 2; ++rule) {
      RejectionCell cell;
      cell.scenario.variant = VVariant::v2;
      cell.scenario.dist = ScoreDistribution::t6;
      cell.scenario.n = n;
      cell.scenario.off_diag = OffDiagonalSpec::single(0.055);
      cell.scenario.trials = 200;
      if (rule == 1) cell.scenario.pk_rule = PkRule{false, 2, 2};
      cell.trials = 200;
      cell.rate = 0.005 * n + 0.1 * rule;
      table.push_back(cell);
    }
  std::string csv = rejection_table_to_csv(table);
  CHECK(csv.find("FVE") != std::string::npos);
  CHECK(csv.find("2x2") != std::string::npos);
  RejectionTable parsed = rejection_table_from_csv(csv);
  REQUIRE(parsed.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(parsed[i].scenario.n == table[i].scenario.n);
    CHECK(parsed[i].rate == doctest::Approx(table[i].rate).epsilon(1e-9));
    CHECK(parsed[i].scenario.pk_rule.label() == table[i].scenario.pk_rule.label());
    CHECK(parsed[i].scenario.off_diag.label() == table[i].scenario.off_diag.label());
  }
}
