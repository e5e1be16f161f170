#include "doctest.h"
#include "hmfg/torus_grid.hpp"
#include "oracles.hpp"

#include <random>

using namespace hmfg;
using oracle::kPi;

TEST_CASE("grid construction") {
  const TorusGrid g = make_grid(1, 8);
  CHECK(g.h() == 0.125);
  CHECK(g.size() == 8);
  CHECK(g.coord(0) == -0.5);
  CHECK(g.coord(1) == -0.375);
  CHECK(g.coord(4) == 0.0);

  const TorusGrid g2 = make_grid(2, 16);
  CHECK(g2.size() == 256);
  CHECK(g2.h() == 1.0 / 16);
  CHECK(g2.linear(17, -1) == g2.linear(1, 15));

  CHECK_THROWS_WITH_AS(make_grid(3, 16), doctest::Contains("unsupported dimension"), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1, 7), std::invalid_argument);
}

TEST_CASE("node coordinates are reproducible") {
  const TorusGrid a(1, 96), b(1, 96);
  for (int i = 0; i < 96; ++i) CHECK(a.coord(i) == b.coord(i));
  CHECK(a.coord(48) == 0.0);
}

TEST_CASE("integrate and laplacian of constants") {
  for (int d : {1, 2}) {
    const TorusGrid g(d, 16);
    const Field one = Field::constant(g, 1.0);
    CHECK(integrate(one) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(laplacian(one).values.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("laplacian of a cosine converges at second order") {
  auto err = [](int n) {
    const TorusGrid g(1, n);
    const Field f = Field::from_function(g, [](double x, double) { return std::cos(2 * kPi * x); });
    const Field exact = Field::from_function(g, [](double x, double) { return -4 * kPi * kPi * std::cos(2 * kPi * x); });
    return (laplacian(f).values - exact.values).cwiseAbs().maxCoeff();
  };
  const double e256 = err(256), e512 = err(512);
  const double ratio = e256 / e512;
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
  // Richardson: the leading constant C in e = C h^2 estimated from the finer pair bounds the coarse error.
  const double C = (e256 - e512) / (std::pow(1.0 / 256, 2) - std::pow(1.0 / 512, 2));
  CHECK(e256 <= 1.05 * C * std::pow(1.0 / 256, 2));
}

TEST_CASE("centered gradient converges at second order in 2D") {
  auto err = [](int n) {
    const TorusGrid g(2, n);
    const Field f = Field::from_function(g, [](double x, double y) { return std::sin(2 * kPi * x) * std::cos(2 * kPi * y); });
    const VectorField gr = gradient(f);
    double e = 0;
    for (Index k = 0; k < g.size(); ++k) {
      auto p = g.point(k);
      e = std::max(e, std::abs(gr.values(k, 0) - 2 * kPi * std::cos(2 * kPi * p[0]) * std::cos(2 * kPi * p[1])));
      e = std::max(e, std::abs(gr.values(k, 1) + 2 * kPi * std::sin(2 * kPi * p[0]) * std::sin(2 * kPi * p[1])));
    }
    return e;
  };
  const double r = err(32) / err(64);
  CHECK(r > 3.5);
  CHECK(r < 4.5);
}

TEST_CASE("summation by parts") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0, 1);
  for (int d : {1, 2}) {
    const TorusGrid g(d, 16);
    Eigen::VectorXd f(g.size()), h(g.size());
    for (Index k = 0; k < g.size(); ++k) f[k] = N(rng), h[k] = N(rng);
    const double a = inner(g, h, laplacian(g, f));
    const double b = inner(g, f, laplacian(g, h));
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("Godunov Hamiltonian") {
  const TorusGrid g(1, 64);
  // A smooth profile: upwinded |u'|^2/2 approaches the exact value at first order.
  const Field u = Field::from_function(g, [](double x, double) { return std::sin(2 * kPi * x) / (2 * kPi); });
  const Field H = upwind_grad_sq(u);
  for (Index k = 0; k < g.size(); ++k) {
    const double exact = 0.5 * std::pow(std::cos(2 * kPi * g.coord(int(k))), 2);
    CHECK(std::abs(H[k] - exact) < 0.1);
  }
  // For u_tau = |u_x|^2/2 a valley |x| lifts at rate 1/2 and a peak -|x| stays put
  // (Hopf-Lax with a supremum); the convex rule is the mirror image.
  const Field peak = Field::from_function(g, [](double x, double) { return -std::abs(x); });
  const Field valley = Field::from_function(g, [](double x, double) { return std::abs(x); });
  CHECK(upwind_grad_sq(peak, UpwindRule::kConcave)[32] == 0.0);
  CHECK(upwind_grad_sq(valley, UpwindRule::kConcave)[32] == doctest::Approx(0.5));
  CHECK(upwind_grad_sq(valley, UpwindRule::kConvex)[32] == 0.0);
  CHECK(upwind_grad_sq(peak, UpwindRule::kConvex)[32] == doctest::Approx(0.5));
}

TEST_CASE("donor-cell divergence is the negative transpose of upwind transport") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0, 1);
  for (int d : {1, 2}) {
    const TorusGrid g(d, 12);
    Eigen::MatrixXd b(g.size(), d);
    Eigen::VectorXd m(g.size()), w(g.size());
    for (Index k = 0; k < g.size(); ++k) {
      m[k] = std::abs(N(rng));
      w[k] = N(rng);
      for (int a = 0; a < d; ++a) b(k, a) = N(rng);
    }
    const double lhs = inner(g, transport_divergence(g, b, m), w);
    const double rhs = -inner(g, m, upwind_advection(g, b, w));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    CHECK(std::abs(integrate(g, transport_divergence(g, b, m))) < 1e-12);
    // Generator: constants are transported to zero.
    CHECK(upwind_advection(g, b, Eigen::VectorXd::Ones(g.size())).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("centered divergence of a gradient is the laplacian up to a wider stencil") {
  const TorusGrid g(1, 128);
  const Field f = Field::from_function(g, [](double x, double) { return std::cos(2 * kPi * x); });
  const Field div = divergence(gradient(f));
  const Field lap = laplacian(f);
  CHECK((div.values - lap.values).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("identity kernel") {
  const TorusGrid g(1, 32);
  const Kernel k = make_kernel(g, {KernelKind::kIdentity, 0});
  const Field f = Field::from_function(g, [](double x, double) { return std::exp(std::sin(2 * kPi * x)); });
  CHECK((periodic_convolve(f, k).values - f.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bump kernel normalization, symmetry and errors") {
  const TorusGrid g(1, 256);
  const Kernel k = make_kernel(g, {KernelKind::kBump, 0.1});
  CHECK(std::abs(integrate(k.weights) - 1.0) <= 1e-12);
  CHECK(k.weights.values.minCoeff() >= 0);
  for (int s = 1; s < 256; ++s) CHECK(k.weights[s] == k.weights[256 - s]);
  CHECK_THROWS_AS(make_kernel(g, {KernelKind::kBump, 0.3}), std::invalid_argument);
  CHECK_THROWS_AS(make_kernel(g, {KernelKind::kBump, 0.0}), std::invalid_argument);

  const TorusGrid g2(2, 32);
  const Kernel k2 = make_kernel(g2, {KernelKind::kBump, 0.2});
  CHECK(std::abs(integrate(k2.weights) - 1.0) <= 1e-12);
}

TEST_CASE("bump kernel on a cosine matches a direct quadrature oracle") {
  const int n = 256;
  const double r = 0.1;
  const TorusGrid g(1, n);
  const Kernel k = make_kernel(g, {KernelKind::kBump, r});
  const Field f = Field::from_function(g, [](double x, double) { return std::cos(2 * kPi * x); });
  const Field out = periodic_convolve(f, k);
  // Oracle: damping factor a = sum_s w(s h) cos(2 pi s h) / sum_s w(s h).
  double num = 0, den = 0;
  for (int s = -n / 2; s < n / 2; ++s) {
    const double x = double(s) / n;
    const double w = std::abs(x) < r ? std::exp(-1.0 / (1.0 - (x / r) * (x / r))) : 0.0;
    num += w * std::cos(2 * kPi * x);
    den += w;
  }
  const double a = num / den;
  CHECK(a > 0);
  CHECK(a < 1);
  CHECK((out.values - a * f.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("convolution matches the direct double loop and preserves mean and sign") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0, 1);
  for (int d : {1, 2}) {
    const int n = d == 1 ? 64 : 16;
    const double r = 0.2;
    const TorusGrid g(d, n);
    const Kernel k = make_kernel(g, {KernelKind::kBump, r});
    // Oracle kernel: same profile, normalized by its own grid sum.
    double total = 0;
    auto raw = [r](double dx, double dy) {
      const double s = std::sqrt(dx * dx + dy * dy) / r;
      return s < 1 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0;
    };
    for (Index idx = 0; idx < g.size(); ++idx) {
      const double dx = double(idx % n) / n, dy = d == 2 ? double(idx / n) / n : 0.0;
      total += raw(dx - std::round(dx), dy - std::round(dy));
    }
    const double norm = total * g.cell();
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd f(g.size());
      for (Index i = 0; i < g.size(); ++i) f[i] = U(rng);
      const Eigen::VectorXd direct =
          oracle::convolve_direct(d, n, [&](double x, double y) { return raw(x, y) / norm; }, f);
      const Eigen::VectorXd fast = periodic_convolve(k, f);
      CHECK((direct - fast).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(fast.minCoeff() >= 0);
      CHECK(std::abs(fast.mean() - f.mean()) <= 1e-12);
    }
  }
}

TEST_CASE("convolution of an even field with an even kernel stays even") {
  const TorusGrid g(1, 64);
  const Kernel k = make_kernel(g, {KernelKind::kBump, 0.15});
  const Field f = Field::from_function(g, [](double x, double) { return std::exp(-20 * x * x); });
  const Field c = periodic_convolve(f, k);
  for (int i = 1; i < 64; ++i) CHECK(std::abs(c[i] - c[64 - i]) < 1e-14);
}

TEST_CASE("delta input returns the kernel weights") {
  const TorusGrid g(1, 32);
  const Kernel k = make_kernel(g, {KernelKind::kBump, 0.2});
  Field delta(g);
  delta[0] = 1.0 / g.h();
  const Field out = periodic_convolve(delta, k);
  CHECK((out.values - k.weights.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grid mismatch is rejected") {
  const Kernel k = make_kernel(TorusGrid(1, 32), {});
  CHECK_THROWS_AS(periodic_convolve(Field(TorusGrid(1, 16)), k), std::invalid_argument);
}

TEST_CASE("time interpolation") {
  const TorusGrid g(1, 8);
  TimeField f(g, {0.0, 1.0, 2.0});
  f.frames.col(0).setConstant(0);
  f.frames.col(1).setConstant(1);
  f.frames.col(2).setConstant(4);
  CHECK(sample(f, 0.5)[0] == doctest::Approx(0.5));
  CHECK(sample(f, 1.0)[0] == 1.0);
  CHECK(sample(f, 1.5)[0] == doctest::Approx(2.5));
  CHECK(sample(f, 2.0)[0] == 4.0);
  CHECK(step_count(2.0, 0.01) == 200);
  CHECK_THROWS_AS(step_count(1.0, 0.3), std::invalid_argument);
}
