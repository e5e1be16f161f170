#include "hmfg/ergodic.hpp"

#include "hmfg/operators.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace hmfg {

ErgodicNotConverged::ErgodicNotConverged(std::vector<double> history)
    : std::runtime_error("ergodic fixed point did not converge after " + std::to_string(history.size()) +
                         " iterations (last change " + (history.empty() ? std::string("n/a") : std::to_string(history.back())) +
                         ")"),
      history_(std::move(history)) {}

namespace {

// Inverse iteration with a shift just below lambda; cleans the eigenvector to round-off.
void polish(const TorusGrid& g, double mu, const Field& V, Eigenpair& ep) {
  SparseMatrix S = -mu * laplacian_matrix(g);
  for (Index k = 0; k < g.size(); ++k) S.coeffRef(k, k) -= V[k];
  const double sigma = ep.lambda1 - 1e-6 * std::max(1.0, std::abs(ep.lambda1));
  SparseMatrix B = S;
  for (Index k = 0; k < g.size(); ++k) B.coeffRef(k, k) -= sigma;
  Eigen::SimplicialLDLT<SparseMatrix> solver(B);
  if (solver.info() != Eigen::Success) return;
  Eigen::VectorXd x = ep.eigenfunction.values;
  for (int it = 0; it < 3; ++it) {
    x = solver.solve(x);
    x /= std::sqrt(g.cell() * x.squaredNorm());
  }
  if (x.sum() < 0) x = -x;
  if (!(x.minCoeff() > 0)) return;
  const Eigen::VectorXd Sx = S * x;
  ep.lambda1 = x.dot(Sx) / x.squaredNorm();
  ep.residual = (Sx - ep.lambda1 * x).norm() / x.norm();
  ep.eigenfunction.values = x;
}

ErgodicSolution extinct_solution(const TorusGrid& g) {
  ErgodicSolution s;
  s.extinct = true;
  s.lambda_bar = 0;
  s.u_bar = Field(g);
  s.m_bar = Field::constant(g, 1.0);
  s.theta_bar = Field(g);
  return s;
}

Eigen::VectorXd d1_fourth(const TorusGrid& g, const Eigen::VectorXd& f) {
  return (-shift(g, f, 0, 2) + 8 * shift(g, f, 0, 1) - 8 * shift(g, f, 0, -1) + shift(g, f, 0, -2)) / (12 * g.h());
}

Eigen::VectorXd d2_fourth(const TorusGrid& g, const Eigen::VectorXd& f) {
  return (-shift(g, f, 0, 2) + 16 * shift(g, f, 0, 1) - 30 * f + 16 * shift(g, f, 0, -1) - shift(g, f, 0, -2)) /
         (12 * g.h() * g.h());
}

double masked_sup(const Eigen::VectorXd& r, const std::vector<bool>& skip) {
  double s = 0;
  for (Index i = 0; i < r.size(); ++i)
    if (skip.empty() || !skip[size_t(i)]) s = std::max(s, std::abs(r[i]));
  return s;
}

}  // namespace

ErgodicResiduals ergodic_residuals(const ErgodicSolution& sol, const Habitat& hab, double nu, double eps,
                                   const Kernel& rho, const std::vector<bool>& skip) {
  const TorusGrid& g = hab.K.grid;
  require_same_grid(g, sol.u_bar.grid);
  require_same_grid(g, sol.m_bar.grid);
  require_same_grid(g, sol.theta_bar.grid);
  if (!skip.empty() && Index(skip.size()) != g.size()) throw std::invalid_argument("skip mask size mismatch");
  const Eigen::VectorXd& u = sol.u_bar.values;
  const Eigen::VectorXd& m = sol.m_bar.values;
  const Eigen::VectorXd& th = sol.theta_bar.values;
  const Eigen::VectorXd F = periodic_convolve(rho, th);
  const Eigen::VectorXd Kt = hab.K.values - eps * periodic_convolve(rho, m);

  ErgodicResiduals r;
  if (nu > 0) {
    r.stencil = "cole-hopf";
    const double h2 = g.h() * g.h();
    Eigen::VectorXd H = Eigen::VectorXd::Zero(g.size()), L = Eigen::VectorXd::Zero(g.size());
    for (int a = 0; a < g.dim(); ++a)
      for (int off : {-1, 1}) {
        const Eigen::VectorXd un = shift(g, u, a, off), mn = shift(g, m, a, off);
        const Eigen::ArrayXd up = ((un - u).array() / (2 * nu)).exp();
        H += (2 * nu * nu / h2) * (up - 1).matrix();
        L += (nu / h2) * (mn.array() / up - m.array() * up).matrix();
      }
    r.hjb = masked_sup((sol.lambda_bar - H.array() - F.array()).matrix(), skip);
    r.fpk = masked_sup(L, skip);
    r.fish = masked_sup(-hab.mu * laplacian(g, th) - (th.array() * (Kt - th).array()).matrix(), skip);

    Eigen::VectorXd grad2 = Eigen::VectorXd::Zero(g.size()), div = Eigen::VectorXd::Zero(g.size());
    for (int a = 0; a < g.dim(); ++a) {
      const Eigen::VectorXd du = centered_diff(g, u, a);
      grad2 += du.cwiseAbs2();
      div += centered_diff(g, Eigen::VectorXd(m.cwiseProduct(du)), a);
    }
    r.hjb_centered = masked_sup((sol.lambda_bar - nu * laplacian(g, u).array() - 0.5 * grad2.array() - F.array()).matrix(), skip);
    r.fpk_centered = masked_sup(-nu * laplacian(g, m) + div, skip);
  } else {
    if (g.dim() != 1) throw std::invalid_argument("first-order residuals are implemented in 1D only");
    r.stencil = "fourth-order";
    const Eigen::VectorXd du = d1_fourth(g, u);
    r.hjb = masked_sup((sol.lambda_bar - 0.5 * du.array().square() - F.array()).matrix(), skip);
    r.fpk = masked_sup(d1_fourth(g, Eigen::VectorXd(m.cwiseProduct(du))), skip);
    r.fish = masked_sup(-hab.mu * d2_fourth(g, th) - (th.array() * (Kt - th).array()).matrix(), skip);
    const double top = th.maxCoeff();
    r.support_defect = 0;
    for (Index i = 0; i < g.size(); ++i)
      if (m[i] > 1e-10) r.support_defect = std::max(r.support_defect, top - th[i]);
  }
  r.mass_defect = std::abs(integrate(g, m) - 1);
  r.mean_u = std::abs(integrate(g, u));
  r.min_m = m.minCoeff();
  r.min_theta = th.minCoeff();
  r.checked_nodes = skip.empty() ? g.size() : Index(std::count(skip.begin(), skip.end(), false));
  return r;
}

ErgodicSolution solve_ergodic_second_order(const Habitat& hab, double nu, double eps, const Kernel& rho,
                                           const ErgodicOptions& opt) {
  if (!(nu > 0)) throw std::invalid_argument("nu must be positive");
  if (!(eps >= 0)) throw std::invalid_argument("eps must be nonnegative");
  if (!(opt.damping > 0 && opt.damping <= 1)) throw std::invalid_argument("damping must lie in (0, 1]");
  const TorusGrid& g = hab.K.grid;
  require_same_grid(g, rho.grid);

  Eigen::VectorXd m = Eigen::VectorXd::Ones(g.size());
  std::vector<double> history;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const SteadyState ss = steady_state(hab.mu, Field(g, hab.K.values - eps * periodic_convolve(rho, m)));
    if (ss.trivial) {
      ErgodicSolution s = extinct_solution(g);
      s.iterations = it;
      s.history = history;
      s.residuals = ergodic_residuals(s, hab, nu, eps, rho);
      return s;
    }
    const Field F(g, periodic_convolve(rho, ss.theta_bar.values));
    Eigenpair ep = principal_eigenpair(2 * nu * nu, F, opt.eigen);
    polish(g, 2 * nu * nu, F, ep);
    const Eigen::VectorXd& phi = ep.eigenfunction.values;
    Eigen::VectorXd m_new = phi.cwiseAbs2();
    m_new /= integrate(g, m_new);
    const double change = (m_new - m).lpNorm<Eigen::Infinity>();
    history.push_back(change);
    if (change <= opt.tol) {
      ErgodicSolution s;
      s.lambda_bar = -ep.lambda1;
      Eigen::VectorXd u = 2 * nu * phi.array().log().matrix();
      u.array() -= integrate(g, u);
      s.u_bar = Field(g, u);
      s.m_bar = Field(g, m_new);
      s.theta_bar = ss.theta_bar;
      s.iterations = it;
      s.history = std::move(history);
      s.residuals = ergodic_residuals(s, hab, nu, eps, rho);
      return s;
    }
    m = (1 - opt.damping) * m + opt.damping * m_new;
  }
  throw ErgodicNotConverged(std::move(history));
}

// ------------------------------------------------------------------ 1D construction

const char* to_string(Regime1D r) {
  switch (r) {
    case Regime1D::kExtinct: return "extinct";
    case Regime1D::kConstant: return "constant";
    case Regime1D::kInterior: return "interior";
  }
  return "?";
}

double SegmentSolution::operator()(double s) const {
  const Index M = theta.size() - 1;
  const double hs = (x.back() - x.front()) / double(M);
  const double p = std::clamp((s - x.front()) / hs, 0.0, double(M));
  const Index j = std::min<Index>(Index(p), M - 1);
  const double t = p - double(j), w = 1 - t;
  return w * theta[j] + t * theta[j + 1] +
         hs * hs / 6 * ((w * w * w - w) * curvature[j] + (t * t * t - t) * curvature[j + 1]);
}

namespace {

const CosineProfile& require_profile(const Habitat& hab) {
  if (!hab.profile) throw std::invalid_argument("the 1D construction needs the analytic habitat profile");
  if (hab.profile->dim() != 1) throw std::invalid_argument("the 1D construction needs d = 1");
  return *hab.profile;
}

// Numerov residual of th'' = q(th, x), q = -th (K - th) / mu. At x = 0.5 the even reflection is
// exact (K is even about 0.5). At x = y the ghost value carries the cubic Taylor term
// th(y - hs) = th(y + hs) + hs^3 th(y) K'(y) / (3 mu), which keeps the scheme fourth order.
struct Numerov {
  double mu, hs;
  Eigen::VectorXd K;
  double K_ghost = 0;  // K(y - hs)
  double Kp_y = 0;     // K'(y)

  double ghost_gain() const { return hs * hs * hs * Kp_y / (3 * mu); }

  Eigen::VectorXd q(const Eigen::VectorXd& th) const { return -(th.array() * (K - th).array()).matrix() / mu; }
  Eigen::VectorXd dq(const Eigen::VectorXd& th) const { return -(K - 2 * th) / mu; }

  Eigen::VectorXd residual(const Eigen::VectorXd& th) const {
    const Index M = th.size() - 1;
    const Eigen::VectorXd f = q(th);
    const double c = hs * hs / 12;
    Eigen::VectorXd r(M + 1);
    const double tg = th[1] + ghost_gain() * th[0];
    const double fg = -tg * (K_ghost - tg) / mu;
    r[0] = th[1] - 2 * th[0] + tg - c * (f[1] + 10 * f[0] + fg);
    r[M] = 2 * th[M - 1] - 2 * th[M] - c * (2 * f[M - 1] + 10 * f[M]);
    for (Index j = 1; j < M; ++j) r[j] = th[j + 1] - 2 * th[j] + th[j - 1] - c * (f[j + 1] + 10 * f[j] + f[j - 1]);
    return r;
  }

  SparseMatrix jacobian(const Eigen::VectorXd& th) const {
    const Index M = th.size() - 1;
    const Eigen::VectorXd d = dq(th);
    const double c = hs * hs / 12;
    std::vector<Eigen::Triplet<double>> tr;
    tr.reserve(size_t(3 * (M + 1)));
    const double tg = th[1] + ghost_gain() * th[0];
    const double dg = 1 - c * (-(K_ghost - 2 * tg) / mu);
    tr.emplace_back(0, 0, -2 - 10 * c * d[0] + dg * ghost_gain());
    tr.emplace_back(0, 1, 1 - c * d[1] + dg);
    tr.emplace_back(M, M, -2 - 10 * c * d[M]);
    tr.emplace_back(M, M - 1, 2 - 2 * c * d[M - 1]);
    for (Index j = 1; j < M; ++j) {
      tr.emplace_back(j, j - 1, 1 - c * d[j - 1]);
      tr.emplace_back(j, j, -2 - 10 * c * d[j]);
      tr.emplace_back(j, j + 1, 1 - c * d[j + 1]);
    }
    SparseMatrix J(M + 1, M + 1);
    J.setFromTriplets(tr.begin(), tr.end());
    return J;
  }

  // Stops once the Newton step is at round-off; rows are scaled by hs^2, so the residual is in units of theta.
  bool newton(Eigen::VectorXd& th, int& iters) const {
    Eigen::VectorXd r = residual(th);
    double rn = r.lpNorm<Eigen::Infinity>();
    const double scale = std::max(1.0, K.lpNorm<Eigen::Infinity>());
    for (iters = 0; iters < 60; ++iters) {
      Eigen::SparseLU<SparseMatrix> lu;
      lu.compute(jacobian(th));
      if (lu.info() != Eigen::Success) return false;
      const Eigen::VectorXd d = lu.solve(r);
      double step = 1;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls) {
        const Eigen::VectorXd trial = th - step * d;
        const Eigen::VectorXd tr = residual(trial);
        const double tn = tr.lpNorm<Eigen::Infinity>();
        if (tn < rn || (step == 1 && tn <= 1e-15 * scale)) {
          th = trial;
          r = tr;
          rn = tn;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted || step * d.lpNorm<Eigen::Infinity>() <= 1e-14 * scale) break;
    }
    return rn <= 1e-13 * scale && th.minCoeff() > 0;
  }

  // Linearly implicit marching of th_t = mu th'' + th (K - th) with the 3-point Laplacian.
  Eigen::VectorXd march(Eigen::VectorXd th, double horizon, double dt) const {
    const Index M = th.size() - 1;
    const double a = mu * dt / (hs * hs);
    std::vector<Eigen::Triplet<double>> tr;
    for (Index j = 0; j <= M; ++j) {
      tr.emplace_back(j, j, 1 + 2 * a);
      if (j > 0) tr.emplace_back(j, j - 1, j == M ? -2 * a : -a);
      if (j < M) tr.emplace_back(j, j + 1, j == 0 ? -2 * a : -a);
    }
    SparseMatrix A(M + 1, M + 1);
    A.setFromTriplets(tr.begin(), tr.end());
    Eigen::SparseLU<SparseMatrix> lu(A);
    for (double t = 0; t < horizon; t += dt) {
      const Eigen::VectorXd react = (th.array() * (K - th).array()).matrix();
      th = lu.solve(th + dt * react);
    }
    return th;
  }
};

}  // namespace

SegmentSolution theta_segment(double y, const Habitat& hab, int nodes) {
  const CosineProfile& K = require_profile(hab);
  if (!(y > 0 && y < 0.5)) throw std::invalid_argument("y must lie in (0, 0.5)");
  if (nodes < 128) throw std::invalid_argument("segment needs at least 128 nodes");
  const Index M = nodes - 1;
  SegmentSolution s;
  s.y = y;
  s.x.resize(size_t(nodes));
  const double hs = (0.5 - y) / double(M);
  for (Index j = 0; j <= M; ++j) s.x[size_t(j)] = j == M ? 0.5 : y + double(j) * hs;
  Numerov nm{hab.mu, hs, Eigen::VectorXd(nodes)};
  for (Index j = 0; j <= M; ++j) nm.K[j] = K(s.x[size_t(j)]);
  nm.K_ghost = K(y - hs);
  nm.Kp_y = K.derivative_x(y);

  s.theta = nm.K;
  if (!nm.newton(s.theta, s.newton_iterations)) {
    s.used_fallback = true;
    const double kmax = nm.K.cwiseAbs().maxCoeff();
    s.theta = nm.march(Eigen::VectorXd::Constant(nodes, std::max(kmax, 1e-3)), 200 / std::max(kmax, 1e-3),
                       0.1 / std::max(kmax, 1e-3));
    if (!nm.newton(s.theta, s.newton_iterations))
      throw std::runtime_error("segment problem failed (Newton and marching) at y = " + std::to_string(y));
  }
  s.curvature = nm.q(s.theta);

  const double tol = 1e-10 * std::max(1.0, nm.K.cwiseAbs().maxCoeff());
  for (Index j = 0; j < M; ++j)
    if (s.theta[j + 1] > s.theta[j] + tol) throw std::runtime_error("segment solution is not decreasing");
  if (s.theta.minCoeff() < nm.K[M] - tol || s.theta.maxCoeff() > nm.K[0] + tol)
    throw std::runtime_error("segment solution leaves [K(0.5), K(y)]");
  return s;
}

double transition_function(double y, const Habitat& hab, int nodes) {
  const CosineProfile& K = require_profile(hab);
  return 2 * K.primitive(y) - 2 * y * theta_segment(y, hab, nodes).at_y();
}

double find_transition_y(const Habitat& hab, double eps, double tol, int nodes) {
  const CosineProfile& K = require_profile(hab);
  const double upper = K.mean() - K(0.5);
  if (!(eps > 0 && eps < upper))
    throw std::invalid_argument("eps = " + std::to_string(eps) + " is outside the interior regime (0, " +
                                std::to_string(upper) + ")");
  double lo = 0, hi = 0.5;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (transition_function(mid, hab, nodes) < eps ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ExplicitOneD construct_explicit_1d(const Habitat& hab, double eps, int segment_nodes) {
  const CosineProfile& K = require_profile(hab);
  const TorusGrid& g = hab.K.grid;
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  if (!K.even() || !K.decreasing_on_half()) throw std::invalid_argument("K must be even and decreasing on (0, 0.5)");
  const double meanK = K.mean();
  const Index N = g.size();
  const double h = g.h();

  ExplicitOneD out;
  out.kink_nodes.assign(size_t(N), false);
  ErgodicSolution& s = out.solution;
  if (eps >= meanK) {
    out.regime = Regime1D::kExtinct;
    s = extinct_solution(g);
    out.u_printed = s.u_bar;
  } else if (eps >= meanK - K(0.5)) {
    out.regime = Regime1D::kConstant;
    s.lambda_bar = meanK - eps;
    s.theta_bar = Field::constant(g, meanK - eps);
    s.m_bar = Field(g, ((hab.K.values.array() - meanK) / eps + 1).matrix());
    s.u_bar = Field(g);
    out.u_printed = s.u_bar;
  } else {
    out.regime = Regime1D::kInterior;
    out.y = find_transition_y(hab, eps, 1e-12, segment_nodes);
    out.theta_y = theta_segment(out.y, hab, segment_nodes);
    const double y = out.y, lam = out.theta_y.at_y();
    const SegmentSolution& seg = out.theta_y;
    s.lambda_bar = lam;
    s.theta_bar = Field(g);
    s.m_bar = Field(g);
    out.u_printed = Field(g);

    // Nodes ordered by distance from the center; u accumulates 5-point Gauss-Legendre panels.
    std::vector<Index> order(static_cast<size_t>(N));
    std::iota(order.begin(), order.end(), Index(0));
    auto dist = [&](Index i) { return std::abs(g.coord(int(i))); };
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist(a) < dist(b); });
    static const std::array<double, 5> gx = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                             0.9061798459386640};
    static const std::array<double, 5> gw = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                             0.4786286704993665, 0.2369268850561891};
    auto speed = [&](double a) { return std::sqrt(2 * std::max(0.0, lam - seg(a))); };
    double last = y, acc = 0;
    for (Index i : order) {
      const double a = dist(i);
      if (a < y) {
        s.theta_bar[i] = lam;
        s.m_bar[i] = (hab.K[i] - lam) / eps;
        out.u_printed[i] = lam;
        continue;
      }
      if (a > last) {
        const double c = 0.5 * (a + last), r = 0.5 * (a - last);
        for (int q = 0; q < 5; ++q) acc += r * gw[size_t(q)] * speed(c + r * gx[size_t(q)]);
        last = a;
      }
      s.theta_bar[i] = seg(a);
      out.u_printed[i] = lam - acc;
    }

    // Put the quadrature defect of the mass on the nodes next to x = +-y.
    const double remainder = 1 - integrate(s.m_bar);
    double edge_in = -1, edge_out = 1;
    for (Index i = 0; i < N; ++i) {
      const double a = dist(i);
      if (a < y) edge_in = std::max(edge_in, a);
      else edge_out = std::min(edge_out, a);
    }
    const double target = remainder < 0 ? edge_in : edge_out;
    std::vector<Index> edge;
    for (Index i = 0; i < N; ++i)
      if (std::abs(dist(i) - target) < 1e-12) edge.push_back(i);
    for (Index i : edge) s.m_bar[i] += remainder / (h * double(edge.size()));

    for (Index i = 0; i < N; ++i) {
      const double a = dist(i);
      out.kink_nodes[size_t(i)] = std::abs(a - y) <= 4.5 * h || a >= 0.5 - 4.5 * h;
    }
    s.u_bar = Field(g, (out.u_printed.values.array() - integrate(out.u_printed)).matrix());
  }
  s.residuals = ergodic_residuals(s, hab, 0.0, eps, make_kernel(g, {KernelKind::kIdentity}), out.kink_nodes);
  return out;
}

}  // namespace hmfg
