#include "doctest.h"
#include "hmfg/fpk.hpp"
#include "oracles.hpp"

#include <complex>
#include <sstream>

using namespace hmfg;
using oracle::kPi;

namespace {
Field bump_density(const TorusGrid& g, double amp = 0.5, double shift = 0.0) {
  Field m = Field::from_function(g, [&](double x, double y) {
    double v = 1 + amp * std::cos(2 * kPi * (x - shift));
    if (g.dim() == 2) v *= 1 + 0.3 * std::sin(2 * kPi * y);
    return v;
  });
  m.values /= integrate(m);
  return m;
}

TimeVectorField constant_drift(const TorusGrid& g, double T, const Eigen::MatrixXd& b) {
  TimeVectorField out;
  out.grid = g;
  out.t = {0.0, T};
  out.frames = {b, b};
  return out;
}

double circular_mean(const Field& m) {
  std::complex<double> z = 0;
  for (Index i = 0; i < m.size(); ++i) z += m[i] * std::polar(1.0, 2 * kPi * m.grid.coord(int(i)));
  return std::arg(z) / (2 * kPi);
}

// Backward linearized HJB sweep through the recorded substeps, the transpose of the dual FPK.
Eigen::VectorXd backward_linear(const HJBSolution& s, const Eigen::VectorXd& wT, double dt) {
  const TorusGrid& g = s.u.grid;
  Eigen::VectorXd w = wT;
  for (int k = int(s.substep_drift.size()) - 1; k >= 0; --k) {
    const auto& subs = s.substep_drift[size_t(k)];
    const double d = dt / double(subs.size());
    const DiffusionSolve A(g, s.nu * d);
    for (const auto& b : subs) w = A(w + d * upwind_advection(g, b, w));
  }
  return w;
}
}  // namespace

TEST_CASE("mass is conserved and density stays nonnegative") {
  for (int dim : {1, 2}) {
    const TorusGrid g(dim, dim == 1 ? 128 : 32);
    const Field m0 = bump_density(g, 0.9);
    Eigen::MatrixXd b(g.size(), dim);
    for (Index i = 0; i < g.size(); ++i)
      for (int a = 0; a < dim; ++a) b(i, a) = 2.0 * std::sin(2 * kPi * g.point(i)[a] + a);
    const DensityPath p = solve_forward(m0, constant_drift(g, 1.0, b), 0.01, 1.0, 0.01);
    CHECK(p.mass_drift <= 1e-12);
    CHECK(p.m.frames.minCoeff() >= 0);
    CHECK(p.max_substeps_used > 1);
  }
}

TEST_CASE("heat flow decays at the first Laplacian eigenvalue") {
  const TorusGrid g(1, 128);
  const double nu = 0.1, dt = 1e-3, T = 1;
  const Field m0 = bump_density(g, 0.5);
  const DensityPath p = solve_forward(m0, constant_drift(g, T, Eigen::MatrixXd::Zero(g.size(), 1)), nu, T, dt);
  std::vector<double> t, le;
  for (Index k = 100; k < p.m.frame_count(); k += 100) {
    t.push_back(p.m.t[k]);
    le.push_back(std::log((p.m.col(k).array() - 1).abs().maxCoeff()));
  }
  CHECK(-oracle::slope(t, le) == doctest::Approx(4 * kPi * kPi * nu).epsilon(0.01));
  double err = 0;
  for (Index i = 0; i < g.size(); ++i)
    err = std::max(err, std::abs(p.m.col(p.m.frame_count() - 1)[i] - oracle::heat_cosine({0.5}, nu, T, g.coord(int(i)))));
  CHECK(err <= 2e-3);
}

TEST_CASE("constant drift translates the center of mass") {
  const TorusGrid g(1, 256);
  const double v = 0.3, T = 1;
  const Field m0 = bump_density(g, 0.8);
  const DensityPath p =
      solve_forward(m0, constant_drift(g, T, Eigen::MatrixXd::Constant(g.size(), 1, v)), 0.0, T, 0.01);
  const double moved = circular_mean(p.m.frame(p.m.frame_count() - 1)) - circular_mean(m0);
  CHECK(moved == doctest::Approx(v * T).epsilon(0.01));
}

TEST_CASE("dual step is the transpose of the linearized value step") {
  const TorusGrid g(1, 64);
  const double T = 1, dt = 0.02;
  const Field F = Field::from_function(g, [](double x, double) { return 3 * std::cos(2 * kPi * x) + std::sin(6 * kPi * x); });
  for (double nu : {0.0, 0.05}) {
    const HJBSolution s = solve_backward(TimeField::constant_in_time(F, {0.0, T}), nu, T, dt);
    const Field m0 = bump_density(g, 0.7, 0.1);
    const DensityPath p = solve_forward(m0, s, T, dt);
    const Eigen::VectorXd wT = Field::from_function(g, [](double x, double) { return std::exp(std::sin(2 * kPi * x)); }).values;
    const double lhs = p.m.col(p.m.frame_count() - 1).dot(wT);
    const double rhs = m0.values.dot(backward_linear(s, wT, dt));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    CHECK(p.mass_drift <= 1e-12);
  }
}

TEST_CASE("bad initial densities are rejected") {
  const TorusGrid g(1, 16);
  Field m = Field::constant(g, 1.0);
  m[2] = -0.1;
  m[3] = 1.1;
  CHECK_THROWS_AS(check_density(m), std::invalid_argument);
  CHECK_THROWS_AS(check_density(Field::constant(g, 2.0)), std::invalid_argument);
  CHECK_NOTHROW(check_density(Field::constant(g, 1.0)));
}

TEST_CASE("particles without noise or drift stay put") {
  const TorusGrid g(2, 16);
  const ParticleEnsemble e =
      simulate_particles(bump_density(g), constant_drift(g, 1.0, Eigen::MatrixXd::Zero(g.size(), 2)), 0.0, 500, 1.0, 0.1, 3);
  CHECK((e.positions.back() - e.positions.front()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.positions.front().minCoeff() >= -0.5);
  CHECK(e.positions.front().maxCoeff() < 0.5);
}

TEST_CASE("particles follow characteristics") {
  const TorusGrid g(1, 256);
  Eigen::MatrixXd b(g.size(), 1);
  for (Index i = 0; i < g.size(); ++i) b(i, 0) = 0.3 * std::sin(2 * kPi * g.coord(int(i)));
  const double T = 1;
  std::vector<double> err;
  for (double dt : {0.02, 0.01}) {
    const ParticleEnsemble e = simulate_particles(Field::constant(g, 1.0), constant_drift(g, T, b), 0.0, 200, T, dt, 11);
    double worst = 0;
    for (int p = 0; p < e.N; ++p) {
      const double x0 = e.positions.front()(p, 0);
      const double x = oracle::rk4([](double, double y) { return 0.3 * std::sin(2 * kPi * y); }, x0, T, 2000);
      double d = e.positions.back()(p, 0) - x;
      d -= std::round(d);
      worst = std::max(worst, std::abs(d));
    }
    err.push_back(worst);
  }
  CHECK(err[0] <= 0.05 * 0.02 * 10);
  CHECK(err[0] / err[1] == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("particle histogram matches the heat kernel") {
  const TorusGrid fine(1, 64);
  const double nu = 0.05, T = 0.2, dt = 0.01;
  const Field m0 = Field::from_function(fine, [](double x, double) { return 1 + 0.5 * std::cos(2 * kPi * x); });
  const auto drift = constant_drift(fine, T, Eigen::MatrixXd::Zero(fine.size(), 1));
  // Exact cell averages on 8 bins.
  const int bins = 8;
  Eigen::VectorXd exact(bins);
  for (int c = 0; c < bins; ++c) {
    const double lo = -0.5 + (c - 0.5) / bins, hi = lo + 1.0 / bins;
    const double decay = 0.5 * std::exp(-4 * kPi * kPi * nu * T);
    exact[c] = 1.0 / bins + decay * (std::sin(2 * kPi * hi) - std::sin(2 * kPi * lo)) / (2 * kPi);
  }
  auto distance = [&](int N, uint64_t seed) {
    const ParticleEnsemble e = simulate_particles(m0, drift, nu, N, T, dt, seed);
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(bins);
    for (int p = 0; p < N; ++p) {
      const int c = int(std::lround((e.positions.back()(p, 0) + 0.5) * bins)) % bins;
      hist[c] += 1.0 / N;
    }
    return (hist - exact).cwiseAbs().sum();
  };
  CHECK(distance(100000, 1) <= 3 / std::sqrt(1e5));

  std::vector<double> lx, ly;
  for (int N : {1000, 10000, 100000}) {
    double mean = 0;
    for (uint64_t s = 0; s < 8; ++s) mean += distance(N, 100 + s) / 8;
    lx.push_back(std::log(double(N)));
    ly.push_back(std::log(mean));
  }
  CHECK(oracle::slope(lx, ly) == doctest::Approx(-0.5).epsilon(0.2));
}

TEST_CASE("density and particle distance") {
  const TorusGrid g(1, 128);
  const double nu = 0.05, T = 0.2, dt = 0.01;
  const Field m0 = bump_density(g, 0.5);
  Eigen::MatrixXd b(g.size(), 1);
  for (Index i = 0; i < g.size(); ++i) b(i, 0) = 1.5 * std::sin(2 * kPi * g.coord(int(i)));
  const DensityPath p = solve_forward(m0, constant_drift(g, T, b), nu, T, dt);
  const ParticleEnsemble good = simulate_particles(m0, constant_drift(g, T, b), nu, 100000, T, dt, 5);
  const ParticleEnsemble flipped = simulate_particles(m0, constant_drift(g, T, -b), nu, 100000, T, dt, 5);
  const double dg = density_particle_distance(p, good, T);
  const double df = density_particle_distance(p, flipped, T);
  CHECK(dg <= 0.05);
  CHECK(df >= 5 * dg);
  CHECK_THROWS_AS(density_particle_distance(p, good, 0.5 * dt), std::invalid_argument);
}

TEST_CASE("results do not depend on the worker count") {
  const TorusGrid g(2, 16);
  const Field m0 = bump_density(g);
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(g.size(), 2, 0.2);
  ParticleOptions one, four;
  four.jobs = 4;
  const auto a = simulate_particles(m0, constant_drift(g, 0.5, b), 0.1, 2000, 0.5, 0.05, 42, one);
  const auto c = simulate_particles(m0, constant_drift(g, 0.5, b), 0.1, 2000, 0.5, 0.05, 42, four);
  CHECK(a.positions.back() == c.positions.back());
  std::ostringstream os;
  write_particles_csv(os, a);
  CHECK(os.str().rfind("t,id,x,y\n", 0) == 0);
}
