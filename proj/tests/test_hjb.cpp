#include "doctest.h"
#include "hmfg/hjb.hpp"
#include "oracles.hpp"

using namespace hmfg;
using oracle::kPi;

namespace {
TimeField steady(const Field& F, double T) { return TimeField::constant_in_time(F, {0.0, T}); }

Field cosF(const TorusGrid& g, double a = 1.0) {
  return Field::from_function(g, [a](double x, double) { return a * std::cos(2 * kPi * x); });
}

double sup_diff(const TimeField& a, const TimeField& b) { return (a.frames - b.frames).cwiseAbs().maxCoeff(); }
}  // namespace

TEST_CASE("constant reward gives a linear value") {
  for (int dim : {1, 2}) {
    const TorusGrid g(dim, 16);
    const double T = 2;
    const HJBSolution s = solve_backward(steady(Field::constant(g, 0.7), T), 0.3, T, 0.05);
    for (Index k = 0; k < s.u.frame_count(); ++k) {
      CHECK((s.u.col(k).array() - 0.7 * (T - s.u.t[k])).abs().maxCoeff() <= 1e-12);
      CHECK(s.alpha.frames[k].cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK(semiconvexity_bound(s.u) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("terminal frame vanishes and alpha is the centered gradient") {
  const TorusGrid g(1, 64);
  const HJBSolution s = solve_backward(steady(cosF(g), 1.0), 0.2, 1.0, 0.01);
  CHECK(s.u.col(s.u.frame_count() - 1).cwiseAbs().maxCoeff() == 0.0);
  const TimeVectorField a = optimal_control(s.u);
  for (Index k = 0; k < s.u.frame_count(); ++k) {
    CHECK((a.frames[k] - s.alpha.frames[k]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((centered_diff(g, s.u.col(k), 0) - s.alpha.frames[k].col(0)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("control of an analytic profile") {
  const TorusGrid g(1, 128);
  TimeField u(g, {0.0, 1.0});
  for (Index k = 0; k < 2; ++k)
    u.frames.col(k) = Field::from_function(g, [](double x, double) { return std::sin(2 * kPi * x); }).values;
  const TimeVectorField a = optimal_control(u);
  double err = 0;
  for (Index i = 0; i < g.size(); ++i) err = std::max(err, std::abs(a.frames[0](i, 0) - 2 * kPi * std::cos(2 * kPi * g.coord(i))));
  CHECK(err <= 4 * kPi * kPi * kPi * g.h() * g.h());
}

TEST_CASE("constant shift covariance") {
  const TorusGrid g(2, 16);
  const Field F = Field::from_function(g, [](double x, double y) { return std::cos(2 * kPi * x) * std::sin(2 * kPi * y); });
  Field Fs = F;
  Fs.values.array() += 0.4;
  const double T = 1;
  const HJBSolution a = solve_backward(steady(F, T), 0.05, T, 0.02);
  const HJBSolution b = solve_backward(steady(Fs, T), 0.05, T, 0.02);
  double err = 0;
  for (Index k = 0; k < a.u.frame_count(); ++k)
    err = std::max(err, ((b.u.col(k) - a.u.col(k)).array() - 0.4 * (T - a.u.t[k])).abs().maxCoeff());
  CHECK(err <= 1e-10);
}

TEST_CASE("comparison principle") {
  const TorusGrid g(1, 64);
  const Field F1 = cosF(g);
  Field F2 = F1;
  for (Index i = 0; i < g.size(); ++i) F2[i] += 0.3 * std::exp(-30 * g.coord(i) * g.coord(i));
  for (double nu : {0.0, 0.05}) {
    const HJBSolution a = solve_backward(steady(F1, 3.0), nu, 3.0, 0.01);
    const HJBSolution b = solve_backward(steady(F2, 3.0), nu, 3.0, 0.01);
    CHECK((b.u.frames - a.u.frames).minCoeff() >= -1e-13);
  }
}

TEST_CASE("refinement self-oracle") {
  std::vector<Eigen::VectorXd> u0;
  for (int L = 0; L < 3; ++L) {
    const TorusGrid g(1, 64 << L);
    const HJBSolution s = solve_backward(steady(cosF(g), 1.0), 1.0, 1.0, 0.01 / (1 << L));
    Eigen::VectorXd v(64);
    for (int i = 0; i < 64; ++i) v[i] = s.u.col(0)[i << L];
    u0.push_back(v);
  }
  // First-order extrapolation of the two refined levels.
  const Eigen::VectorXd ref = 2 * u0[2] - u0[1];
  CHECK((u0[0] - ref).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK((u0[1] - ref).cwiseAbs().maxCoeff() < (u0[0] - ref).cwiseAbs().maxCoeff());
}

TEST_CASE("semi-convexity and gradient bounds are uniform in T") {
  const TorusGrid g(1, 128);
  const Field F = Field::from_function(g, [](double x, double) { return 1 + 0.5 * std::cos(2 * kPi * x); });
  std::vector<double> sc, grad;
  for (double T : {5.0, 10.0, 20.0}) {
    const HJBSolution s = solve_backward(steady(F, T), 0.0, T, 0.01);
    sc.push_back(semiconvexity_bound(s.u));
    double gmax = 0;
    for (const auto& a : s.alpha.frames) gmax = std::max(gmax, a.cwiseAbs().maxCoeff());
    grad.push_back(gmax);
  }
  CHECK(sc[2] > -1e6);
  CHECK(std::abs(sc[2] - sc[1]) <= 0.1 * std::abs(sc[1]));
  CHECK(std::abs(grad[2] - grad[1]) <= 0.1 * grad[1]);
}

TEST_CASE("kink profile is reported by the semi-convexity diagnostic") {
  const TorusGrid g(1, 64);
  TimeField u(g, {0.0});
  u.frames.col(0) = Field::from_function(g, [](double x, double) { return -std::abs(std::sin(kPi * x)); }).values;
  CHECK(semiconvexity_bound(u) <= -0.5 * 2 * kPi / g.h());
}

TEST_CASE("vanishing viscosity") {
  const TorusGrid g(1, 128);
  const Field F = cosF(g);
  const double T = 2;
  const HJBSolution inviscid = solve_backward(steady(F, T), 0.0, T, 0.01);
  std::vector<double> d;
  for (double nu : {1e-1, 1e-2, 1e-3}) d.push_back(sup_diff(solve_backward(steady(F, T), nu, T, 0.01).u, inviscid.u));
  CHECK(d[1] < d[0]);
  CHECK(d[2] < d[1]);
  CHECK(d[2] <= 0.2 * d[0]);
}

TEST_CASE("inviscid ergodic constant is max F") {
  const TorusGrid g(1, 64);
  const Field F = Field::from_function(g, [](double x, double) { return 1 + 0.5 * std::cos(2 * kPi * x); });
  std::vector<double> err;
  for (double T : {5.0, 10.0, 20.0}) {
    const HJBSolution s = solve_backward(steady(F, T), 0.0, T, 0.01);
    err.push_back((s.u.col(0).array() / T - F.values.maxCoeff()).abs().maxCoeff());
  }
  CHECK(err[1] < err[0]);
  CHECK(err[2] < err[1]);
  CHECK(err[2] <= 0.05);
}

TEST_CASE("CFL failure is explicit") {
  const TorusGrid g(1, 64);
  HJBOptions opt;
  opt.max_substeps = 1;
  CHECK_THROWS_AS(solve_backward(steady(cosF(g, 200.0), 1.0), 0.0, 1.0, 0.1, opt), std::runtime_error);
}
