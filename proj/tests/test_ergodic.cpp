#include "doctest.h"
#include "hmfg/ergodic.hpp"
#include "oracles.hpp"

using namespace hmfg;
using oracle::kPi;

namespace {
const CosineProfile kCos = CosineProfile::parse("1+0.5cos", 1);

double simpson(const std::function<double(double)>& f, double a, double b, int panels = 2000) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4 : 2) * f(a + i * h);
  return s * h / 3;
}
}  // namespace

TEST_CASE("uniform habitat gives the uniform ergodic solution") {
  const TorusGrid g(1, 64);
  const Habitat hab = make_habitat(CosineProfile::constant(1, 1.0), g, 1.0);
  for (double nu : {0.05, 0.3}) {
    const ErgodicSolution s = solve_ergodic_second_order(hab, nu, 0.3, make_kernel(g, {KernelKind::kBump, 0.1}));
    CHECK_FALSE(s.extinct);
    CHECK(s.lambda_bar == doctest::Approx(0.7).epsilon(1e-10));
    CHECK((s.theta_bar.values.array() - 0.7).abs().maxCoeff() <= 1e-10);
    CHECK((s.m_bar.values.array() - 1).abs().maxCoeff() <= 1e-10);
    CHECK(s.u_bar.values.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("Cole-Hopf identities and normalizations") {
  const TorusGrid g(1, 256);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  const ErgodicSolution s = solve_ergodic_second_order(hab, 0.1, 0.2, make_kernel(g, {KernelKind::kBump, 0.1}));
  const ErgodicResiduals& r = s.residuals;
  CHECK(r.hjb <= 1e-8);
  CHECK(r.fpk <= 1e-8);
  CHECK(r.fish <= 1e-6);
  CHECK(r.mass_defect <= 1e-10);
  CHECK(r.mean_u <= 1e-10);
  CHECK(r.min_m >= 0);
  CHECK(r.min_theta >= 0);
  CHECK(s.history.back() <= 1e-10);

  // The plain centered stencils see the same solution with second-order truncation.
  const TorusGrid g2(1, 512);
  const Habitat hab2 = make_habitat(kCos, g2, 1.0);
  const ErgodicSolution s2 = solve_ergodic_second_order(hab2, 0.1, 0.2, make_kernel(g2, {KernelKind::kBump, 0.1}));
  CHECK(s.residuals.fpk_centered / s2.residuals.fpk_centered == doctest::Approx(4).epsilon(0.15));
}

TEST_CASE("decoupled ergodic constant matches a dense eigenvalue") {
  const TorusGrid g(1, 128);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  const double nu = 0.15;
  const ErgodicSolution s = solve_ergodic_second_order(hab, nu, 0.0, make_kernel(g, {KernelKind::kIdentity}));
  const Eigen::VectorXd F = s.theta_bar.values;
  const double lam1 = oracle::dense_smallest_eigenvalue(oracle::dense_operator_1d(2 * nu * nu, Eigen::VectorXd::Ones(128), F));
  CHECK(s.lambda_bar == doctest::Approx(-lam1).epsilon(1e-10));
  CHECK(s.lambda_bar < F.maxCoeff());
  CHECK(s.lambda_bar > integrate(s.theta_bar));
}

TEST_CASE("second-order extinction and failures") {
  const TorusGrid g(1, 32);
  const Habitat weak = make_habitat(CosineProfile::constant(1, 0.2), g, 1.0);
  const ErgodicSolution s = solve_ergodic_second_order(weak, 0.1, 0.5, make_kernel(g, {KernelKind::kIdentity}));
  CHECK(s.extinct);
  CHECK(s.lambda_bar == 0.0);
  CHECK(s.theta_bar.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.m_bar.values.array() - 1).abs().maxCoeff() == 0.0);

  const Habitat hab = make_habitat(kCos, g, 1.0);
  ErgodicOptions opt;
  opt.max_iter = 1;
  try {
    (void)solve_ergodic_second_order(hab, 0.1, 0.3, make_kernel(g, {KernelKind::kIdentity}), opt);
    FAIL("expected non-convergence");
  } catch (const ErgodicNotConverged& e) {
    CHECK(e.history().size() == 1);
  }
  CHECK_THROWS_AS(solve_ergodic_second_order(hab, 0.0, 0.3, make_kernel(g, {KernelKind::kIdentity})),
                  std::invalid_argument);
}

TEST_CASE("constant regime") {
  const TorusGrid g(1, 1024);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  const ExplicitOneD e = construct_explicit_1d(hab, 0.7);
  REQUIRE(e.regime == Regime1D::kConstant);
  const ErgodicSolution& s = e.solution;
  CHECK(std::abs(s.lambda_bar - 0.3) <= 1e-10);
  CHECK((s.theta_bar.values.array() - 0.3).abs().maxCoeff() <= 1e-10);
  double err = 0;
  for (Index i = 0; i < g.size(); ++i)
    err = std::max(err, std::abs(s.m_bar[i] - (1 + 5.0 / 7.0 * std::cos(2 * kPi * g.coord(int(i))))));
  CHECK(err <= 1e-10);
  CHECK(s.u_bar.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.residuals.worst_line() <= 1e-10);
  CHECK(s.residuals.mass_defect <= 1e-10);
  CHECK(s.residuals.checked_nodes == g.size());
}

TEST_CASE("extinct regime") {
  const TorusGrid g(1, 256);
  const ExplicitOneD e = construct_explicit_1d(make_habitat(kCos, g, 1.0), 1.2);
  CHECK(e.regime == Regime1D::kExtinct);
  CHECK(e.solution.extinct);
  CHECK(e.solution.theta_bar.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.solution.lambda_bar == 0.0);
}

TEST_CASE("interior regime solves the first-order system") {
  const TorusGrid g(1, 1024);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  const double eps = 0.2, h = g.h();
  const ExplicitOneD e = construct_explicit_1d(hab, eps);
  REQUIRE(e.regime == Regime1D::kInterior);
  const ErgodicSolution& s = e.solution;
  const ErgodicResiduals& r = s.residuals;
  CHECK(r.hjb <= 1e-6);
  CHECK(r.fpk <= 1e-6);
  CHECK(r.fish <= 1e-6);
  CHECK(r.mass_defect <= 1e-10);
  CHECK(r.mean_u <= 1e-10);
  CHECK(r.min_m >= 0);
  CHECK(r.min_theta >= 0);
  CHECK(r.support_defect <= 10 * h);
  CHECK(r.checked_nodes >= g.size() - 40);
  CHECK(s.lambda_bar == doctest::Approx(s.theta_bar.values.maxCoeff()).epsilon(1e-14));

  // supp m = [-y, y] up to one cell.
  for (Index i = 0; i < g.size(); ++i) {
    const double a = std::abs(g.coord(int(i)));
    if (a < e.y - h) CHECK(s.m_bar[i] > 0);
    if (a > e.y + h) CHECK(s.m_bar[i] == 0.0);
  }

  // Transition point against an independent shooting and quadrature oracle.
  const auto K = [](double x) { return 1 + 0.5 * std::cos(2 * kPi * x); };
  const double th_y = oracle::shoot_segment(K, 1.0, e.y, 0.5, K(e.y), 8000);
  const double G = 2 * simpson(K, 0.0, e.y) - 2 * e.y * th_y;
  CHECK(std::abs(G - eps) <= 1e-8);
  CHECK(std::abs(th_y - s.lambda_bar) <= 1e-8);
}

TEST_CASE("printed and mean-zero value functions") {
  const TorusGrid g(1, 512);
  const ExplicitOneD e = construct_explicit_1d(make_habitat(kCos, g, 1.0), 0.2);
  const Eigen::VectorXd d = e.u_printed.values - e.solution.u_bar.values;
  CHECK(d.maxCoeff() - d.minCoeff() <= 1e-14);
  CHECK(std::abs(integrate(e.u_printed)) > 1e-3);
  CHECK(e.u_printed.values.maxCoeff() == doctest::Approx(e.solution.lambda_bar).epsilon(1e-14));
  // C^1 at |x| = y: the one-sided slope next to the support is O(h).
  double worst = 0;
  for (Index i = 0; i < g.size(); ++i) {
    const double a = std::abs(g.coord(int(i)));
    if (a >= e.y && a < e.y + g.h()) {
      const Index j = g.coord(int(i)) > 0 ? i - 1 : i + 1;
      worst = std::max(worst, std::abs(e.u_printed[i] - e.u_printed[j]) / g.h());
    }
  }
  CHECK(worst <= 20 * g.h());
}

TEST_CASE("perturbed fish density is detected") {
  const TorusGrid g(1, 1024);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  const ExplicitOneD e = construct_explicit_1d(hab, 0.2);
  ErgodicSolution bad = e.solution;
  for (Index i = 0; i < g.size(); ++i) {
    const double x = g.coord(int(i));
    bad.theta_bar[i] += 1e-3 * std::exp(-std::pow((x - 0.33) / 0.03, 2));
  }
  const ErgodicResiduals r = ergodic_residuals(bad, hab, 0.0, 0.2, make_kernel(g, {KernelKind::kIdentity}), e.kink_nodes);
  CHECK(r.worst_line() >= 1e-4);
}

TEST_CASE("segment problem") {
  const TorusGrid g(1, 64);
  const Habitat flat = make_habitat(CosineProfile::constant(1, 0.8), g, 1.0);
  const SegmentSolution c = theta_segment(0.2, flat, 256);
  CHECK((c.theta.array() - 0.8).abs().maxCoeff() <= 1e-12);

  const Habitat hab = make_habitat(kCos, g, 1.0);
  const auto K = [](double x) { return 1 + 0.5 * std::cos(2 * kPi * x); };
  double prev = 2;
  for (double y : {0.05, 0.15, 0.25, 0.35, 0.45}) {
    const SegmentSolution s = theta_segment(y, hab, 512);
    for (Index j = 0; j + 1 < s.theta.size(); ++j) CHECK(s.theta[j + 1] < s.theta[j]);
    CHECK(s.theta.minCoeff() >= K(0.5));
    CHECK(s.theta.maxCoeff() <= K(y));
    CHECK(s.at_y() < prev);
    prev = s.at_y();
    CHECK(std::abs(s.at_y() - oracle::shoot_segment(K, 1.0, y, 0.5, K(y), 8000)) <= 1e-9);
    // interpolant between nodes
    const double mid = 0.5 * (s.x[100] + s.x[101]);
    CHECK(std::abs(s(mid) - 0.5 * (s.theta[100] + s.theta[101])) <= 1e-6);
  }
  CHECK_THROWS_AS(theta_segment(0.0, hab), std::invalid_argument);
  CHECK_THROWS_AS(theta_segment(0.3, hab, 64), std::invalid_argument);
}

TEST_CASE("transition point is monotone in eps") {
  const TorusGrid g(1, 64);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  double prev = 0;
  for (double eps : {1e-3, 0.05, 0.2, 0.4, 0.499}) {
    const double y = find_transition_y(hab, eps, 1e-10, 512);
    CHECK(y > prev);
    CHECK(transition_function(y, hab, 512) == doctest::Approx(eps).epsilon(1e-8));
    prev = y;
  }
  CHECK(find_transition_y(hab, 1e-4, 1e-10, 512) < 0.02);
  CHECK(find_transition_y(hab, 0.4999, 1e-10, 512) > 0.45);
  CHECK_THROWS_AS(find_transition_y(hab, 0.5, 1e-10, 512), std::invalid_argument);
  CHECK_THROWS_AS(find_transition_y(hab, 0.0, 1e-10, 512), std::invalid_argument);
}

TEST_CASE("regimes cover eps and keep m nonnegative") {
  const TorusGrid g(1, 256);
  const Habitat hab = make_habitat(kCos, g, 1.0);
  int last = 2;
  for (double eps : {0.1, 0.3, 0.49, 0.5, 0.8, 0.999, 1.0, 1.5}) {
    const ExplicitOneD e = construct_explicit_1d(hab, eps, 512);
    const int rank = e.regime == Regime1D::kInterior ? 2 : e.regime == Regime1D::kConstant ? 1 : 0;
    CHECK(rank <= last);
    last = rank;
    CHECK(e.solution.m_bar.values.minCoeff() >= 0);
    CHECK(e.solution.residuals.mass_defect <= 1e-10);
  }
  CHECK(last == 0);
}

TEST_CASE("hypotheses of the 1D construction are enforced") {
  const TorusGrid g(1, 64);
  CHECK_THROWS_AS(construct_explicit_1d(make_habitat(CosineProfile::parse("1+0.5cos2", 1), g, 1.0), 0.2),
                  std::invalid_argument);
  CHECK_THROWS_AS(construct_explicit_1d(make_habitat(kCos.sample(g), 1.0), 0.2), std::invalid_argument);
  CHECK_THROWS_AS(construct_explicit_1d(make_habitat(kCos, g, 1.0), 0.0), std::invalid_argument);
}
