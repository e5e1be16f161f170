#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hmfg {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Uniform periodic grid on the unit torus, nodes x_i = -0.5 + i/n.
// 2D nodes are stored x-fastest: k = i + n*j.
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, int n) : dim_(dim), n_(n) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("unsupported dimension " + std::to_string(dim));
    if (n < 8) throw std::invalid_argument("grid needs n >= 8, got " + std::to_string(n));
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  double h() const { return 1.0 / n_; }
  Index size() const { return dim_ == 1 ? Index(n_) : Index(n_) * n_; }
  // h^d, the quadrature weight of one node.
  double cell() const { return dim_ == 1 ? h() : h() * h(); }

  double coord(int i) const { return -0.5 + static_cast<double>(i) / n_; }
  int wrap(int i) const {
    i %= n_;
    return i < 0 ? i + n_ : i;
  }
  std::array<int, 2> multi(Index k) const {
    if (dim_ == 1) return {static_cast<int>(k), 0};
    return {static_cast<int>(k % n_), static_cast<int>(k / n_)};
  }
  Index linear(int i, int j = 0) const { return dim_ == 1 ? Index(wrap(i)) : Index(wrap(i)) + Index(n_) * wrap(j); }
  Index neighbor(Index k, int axis, int offset) const {
    auto ij = multi(k);
    ij[axis] += offset;
    return linear(ij[0], ij[1]);
  }
  // Coordinates of node k along each axis.
  std::array<double, 2> point(Index k) const {
    auto ij = multi(k);
    return {coord(ij[0]), dim_ == 2 ? coord(ij[1]) : 0.0};
  }

  bool operator==(const TorusGrid& o) const { return dim_ == o.dim_ && n_ == o.n_; }
  bool operator!=(const TorusGrid& o) const { return !(*this == o); }

 private:
  int dim_ = 1;
  int n_ = 8;
};

inline TorusGrid make_grid(int dim, int n) { return TorusGrid(dim, n); }

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b) {
  if (a != b) throw std::invalid_argument("grid mismatch");
}

template <typename Scalar>
bool all_finite(const Eigen::DenseBase<Scalar>& x) {
  return x.derived().array().isFinite().all();
}

template <typename Scalar>
struct BasicField {
  using Vector = VectorX<Scalar>;
  TorusGrid grid;
  Vector values;

  BasicField() = default;
  explicit BasicField(const TorusGrid& g) : grid(g), values(Vector::Zero(g.size())) {}
  BasicField(const TorusGrid& g, Vector v) : grid(g), values(std::move(v)) {
    if (values.size() != g.size()) throw std::invalid_argument("field length does not match grid");
    if (!values.array().isFinite().all()) throw std::invalid_argument("field has non-finite values");
  }
  static BasicField constant(const TorusGrid& g, Scalar c) { return BasicField(g, Vector::Constant(g.size(), c)); }

  template <typename Fn>
  static BasicField from_function(const TorusGrid& g, Fn&& fn) {
    Vector v(g.size());
    for (Index k = 0; k < g.size(); ++k) {
      auto p = g.point(k);
      v[k] = static_cast<Scalar>(fn(p[0], p[1]));
    }
    return BasicField(g, std::move(v));
  }

  Index size() const { return values.size(); }
  Scalar operator[](Index k) const { return values[k]; }
  Scalar& operator[](Index k) { return values[k]; }
};

using Field = BasicField<double>;

// Frames stored column-wise: frames.col(k) is the field at t[k].
template <typename Scalar>
struct BasicTimeField {
  TorusGrid grid;
  std::vector<double> t;
  MatrixX<Scalar> frames;

  BasicTimeField() = default;
  BasicTimeField(const TorusGrid& g, std::vector<double> times)
      : grid(g), t(std::move(times)), frames(MatrixX<Scalar>::Zero(g.size(), Index(t.size()))) {}
  BasicTimeField(const TorusGrid& g, std::vector<double> times, MatrixX<Scalar> f)
      : grid(g), t(std::move(times)), frames(std::move(f)) {
    if (frames.rows() != g.size() || frames.cols() != Index(t.size()))
      throw std::invalid_argument("time field shape does not match grid and time nodes");
  }

  Index frame_count() const { return Index(t.size()); }
  double horizon() const { return t.empty() ? 0.0 : t.back(); }
  BasicField<Scalar> frame(Index k) const { return BasicField<Scalar>(grid, frames.col(k)); }
  auto col(Index k) { return frames.col(k); }
  auto col(Index k) const { return frames.col(k); }

  static BasicTimeField constant_in_time(const BasicField<Scalar>& f, std::vector<double> times) {
    BasicTimeField out(f.grid, std::move(times));
    out.frames.colwise() = f.values;
    return out;
  }
};

using TimeField = BasicTimeField<double>;

// One column per axis.
struct VectorField {
  TorusGrid grid;
  Eigen::MatrixXd values;

  VectorField() = default;
  explicit VectorField(const TorusGrid& g) : grid(g), values(Eigen::MatrixXd::Zero(g.size(), g.dim())) {}
  VectorField(const TorusGrid& g, Eigen::MatrixXd v) : grid(g), values(std::move(v)) {
    if (values.rows() != g.size() || values.cols() != g.dim())
      throw std::invalid_argument("vector field shape does not match grid");
  }
};

struct TimeVectorField {
  TorusGrid grid;
  std::vector<double> t;
  std::vector<Eigen::MatrixXd> frames;

  TimeVectorField() = default;
  TimeVectorField(const TorusGrid& g, std::vector<double> times)
      : grid(g), t(std::move(times)), frames(t.size(), Eigen::MatrixXd::Zero(g.size(), g.dim())) {}
  Index frame_count() const { return Index(t.size()); }
  VectorField frame(Index k) const { return VectorField(grid, frames[size_t(k)]); }
};

// Number of steps of size dt covering [0, T]; dt must divide T.
inline int step_count(double T, double dt) {
  if (!(T > 0) || !(dt > 0)) throw std::invalid_argument("T and dt must be positive");
  const double r = T / dt;
  const long steps = std::lround(r);
  if (steps < 1 || std::abs(r - static_cast<double>(steps)) > 1e-9 * std::max(1.0, r))
    throw std::invalid_argument("dt must divide T");
  return static_cast<int>(steps);
}

inline std::vector<double> uniform_times(double T, int steps) {
  std::vector<double> t(size_t(steps) + 1);
  for (int k = 0; k <= steps; ++k) t[size_t(k)] = T * k / steps;
  t.back() = T;
  return t;
}

// Locate t in a sorted node list: returns (k, w) with value = (1-w) f_k + w f_{k+1}.
inline std::pair<Index, double> bracket(const std::vector<double>& nodes, double t) {
  const Index last = Index(nodes.size()) - 1;
  if (last <= 0 || t <= nodes.front()) return {0, 0.0};
  if (t >= nodes.back()) return {std::max<Index>(last - 1, 0), last > 0 ? 1.0 : 0.0};
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
  Index k = Index(it - nodes.begin()) - 1;
  const double w = (t - nodes[size_t(k)]) / (nodes[size_t(k) + 1] - nodes[size_t(k)]);
  return {k, w};
}

template <typename Scalar>
VectorX<Scalar> sample(const BasicTimeField<Scalar>& f, double t) {
  if (f.frame_count() == 1) return f.frames.col(0);
  auto [k, w] = bracket(f.t, t);
  if (w == 0.0) return f.frames.col(k);
  if (w == 1.0) return f.frames.col(k + 1);
  return (1 - w) * f.frames.col(k) + w * f.frames.col(k + 1);
}

inline Eigen::MatrixXd sample(const TimeVectorField& f, double t) {
  if (f.frame_count() == 1) return f.frames[0];
  auto [k, w] = bracket(f.t, t);
  if (w == 0.0) return f.frames[size_t(k)];
  if (w == 1.0) return f.frames[size_t(k) + 1];
  return (1 - w) * f.frames[size_t(k)] + w * f.frames[size_t(k) + 1];
}

// ---------------------------------------------------------------- calculus

// f evaluated at x + offset*h*e_axis.
template <typename Derived>
VectorX<typename Derived::Scalar> shift(const TorusGrid& g, const Eigen::MatrixBase<Derived>& f, int axis, int offset) {
  VectorX<typename Derived::Scalar> out(g.size());
  const int n = g.n();
  const int s = ((offset % n) + n) % n;
  if (axis == 0) {
    const Index rows = g.dim() == 1 ? 1 : n;
    for (Index j = 0; j < rows; ++j)
      for (int i = 0; i < n; ++i) out[j * n + i] = f[j * n + (i + s) % n];
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) out[Index(j) * n + i] = f[Index((j + s) % n) * n + i];
  }
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> forward_diff(const TorusGrid& g, const Eigen::MatrixBase<Derived>& f, int axis) {
  return (shift(g, f, axis, 1) - f) / static_cast<typename Derived::Scalar>(g.h());
}

template <typename Derived>
VectorX<typename Derived::Scalar> backward_diff(const TorusGrid& g, const Eigen::MatrixBase<Derived>& f, int axis) {
  return (f - shift(g, f, axis, -1)) / static_cast<typename Derived::Scalar>(g.h());
}

template <typename Derived>
VectorX<typename Derived::Scalar> centered_diff(const TorusGrid& g, const Eigen::MatrixBase<Derived>& f, int axis) {
  return (shift(g, f, axis, 1) - shift(g, f, axis, -1)) / static_cast<typename Derived::Scalar>(2 * g.h());
}

template <typename Derived>
VectorX<typename Derived::Scalar> laplacian(const TorusGrid& g, const Eigen::MatrixBase<Derived>& f) {
  using S = typename Derived::Scalar;
  const S inv_h2 = static_cast<S>(1.0 / (g.h() * g.h()));
  VectorX<S> out = VectorX<S>::Zero(g.size());
  for (int a = 0; a < g.dim(); ++a) out += (shift(g, f, a, 1) - 2 * f + shift(g, f, a, -1)) * inv_h2;
  return out;
}

template <typename Scalar>
BasicField<Scalar> laplacian(const BasicField<Scalar>& f) {
  return BasicField<Scalar>(f.grid, laplacian(f.grid, f.values));
}

inline VectorField gradient(const Field& f) {
  VectorField out(f.grid);
  for (int a = 0; a < f.grid.dim(); ++a) out.values.col(a) = centered_diff(f.grid, f.values, a);
  return out;
}

// Sign convention of the Hamiltonian being upwinded.
//   kConvex:  H(p) = |p|^2/2 in an equation of the form  u_t + H(grad u) = ...
//   kConcave: the same quantity entering as  u_tau = +|grad u|^2/2 + ...  (the backward value equation)
// Both use the exact Godunov flux for the quadratic, per axis.
enum class UpwindRule { kConvex, kConcave };

// Per-axis one-sided slope selected by the Godunov flux; zero inside rarefaction fans.
template <typename Derived>
VectorX<typename Derived::Scalar> godunov_slope(const TorusGrid& g, const Eigen::MatrixBase<Derived>& u, int axis,
                                                UpwindRule rule) {
  using S = typename Derived::Scalar;
  const VectorX<S> dm = backward_diff(g, u, axis);
  const VectorX<S> dp = forward_diff(g, u, axis);
  VectorX<S> p(g.size());
  for (Index k = 0; k < g.size(); ++k) {
    if (rule == UpwindRule::kConvex) {
      const S a = dm[k] > 0 ? dm[k] : S(0);
      const S b = dp[k] < 0 ? dp[k] : S(0);
      p[k] = a * a >= b * b ? a : b;
    } else {
      const S a = dm[k] < 0 ? dm[k] : S(0);
      const S b = dp[k] > 0 ? dp[k] : S(0);
      p[k] = a * a >= b * b ? a : b;
    }
  }
  return p;
}

template <typename Derived>
VectorX<typename Derived::Scalar> upwind_grad_sq(const TorusGrid& g, const Eigen::MatrixBase<Derived>& u,
                                                 UpwindRule rule = UpwindRule::kConcave) {
  using S = typename Derived::Scalar;
  VectorX<S> out = VectorX<S>::Zero(g.size());
  for (int a = 0; a < g.dim(); ++a) out += godunov_slope(g, u, a, rule).array().square().matrix() / S(2);
  return out;
}

template <typename Scalar>
BasicField<Scalar> upwind_grad_sq(const BasicField<Scalar>& u, UpwindRule rule = UpwindRule::kConcave) {
  return BasicField<Scalar>(u.grid, upwind_grad_sq(u.grid, u.values, rule));
}

// Selected slopes for every axis, one column each.
inline Eigen::MatrixXd godunov_slopes(const TorusGrid& g, const Eigen::VectorXd& u,
                                      UpwindRule rule = UpwindRule::kConcave) {
  Eigen::MatrixXd b(g.size(), g.dim());
  for (int a = 0; a < g.dim(); ++a) b.col(a) = godunov_slope(g, u, a, rule);
  return b;
}

// Upwind velocities in split form: column 2a holds the rightward part (>= 0) and
// column 2a+1 the leftward part (<= 0) along axis a. A node may carry both, which
// happens where the flow spreads out.
inline Eigen::MatrixXd split_velocity(const TorusGrid& g, const Eigen::MatrixXd& b) {
  if (b.cols() == 2 * g.dim()) return b;
  Eigen::MatrixXd out(b.rows(), 2 * g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    out.col(2 * a) = b.col(a).array().max(0.0).matrix();
    out.col(2 * a + 1) = b.col(a).array().min(0.0).matrix();
  }
  return out;
}

// Net velocity per axis of a split field.
inline Eigen::MatrixXd net_velocity(const TorusGrid& g, const Eigen::MatrixXd& B) {
  if (B.cols() == g.dim()) return B;
  Eigen::MatrixXd out(B.rows(), g.dim());
  for (int a = 0; a < g.dim(); ++a) out.col(a) = B.col(2 * a) + B.col(2 * a + 1);
  return out;
}

// Split slopes of the Engquist-Osher flux for the backward value equation:
// max(D+ u, 0) and min(D- u, 0). Their squares sum to the numerical Hamiltonian,
// which is C^1 in u, so the drift varies continuously with u.
inline Eigen::MatrixXd osher_slopes(const TorusGrid& g, const Eigen::VectorXd& u) {
  Eigen::MatrixXd B(g.size(), 2 * g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    B.col(2 * a) = forward_diff(g, u, a).array().max(0.0).matrix();
    B.col(2 * a + 1) = backward_diff(g, u, a).array().min(0.0).matrix();
  }
  return B;
}

// Transport of w along the velocity b with upwinded one-sided differences:
//   (A_b w)_i = sum_axes  b+ (w_{i+1}-w_i)/h + b- (w_i - w_{i-1})/h.
// A_b is a generator (nonnegative off-diagonals, zero row sums). b is either one
// column per axis or the split form above.
inline Eigen::VectorXd upwind_advection(const TorusGrid& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd B = split_velocity(g, b);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  for (int a = 0; a < g.dim(); ++a)
    out.array() += B.col(2 * a).array() * forward_diff(g, w, a).array() +
                   B.col(2 * a + 1).array() * backward_diff(g, w, a).array();
  return out;
}

// Donor-cell divergence of the flux m*b. Equals -(A_b)^T m exactly, so
// <transport_divergence(m, b), w> = -<m, upwind_advection(b, w)>.
inline Eigen::VectorXd transport_divergence(const TorusGrid& g, const Eigen::MatrixXd& b, const Eigen::VectorXd& m) {
  const Eigen::MatrixXd B = split_velocity(g, b);
  const double ih = 1.0 / g.h();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  for (int a = 0; a < g.dim(); ++a) {
    const Eigen::VectorXd fp = (B.col(2 * a).array() * m.array()).matrix();      // flux toward i+1
    const Eigen::VectorXd fm = (B.col(2 * a + 1).array() * m.array()).matrix();  // flux toward i-1 (negative)
    out += ih * (fp - shift(g, fp, a, -1));
    out += ih * (shift(g, fm, a, 1) - fm);
  }
  return out;
}

// Largest explicit rate sum_axes max_i (b+ - b-) / h of a transport step.
inline double transport_rate(const TorusGrid& g, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd B = split_velocity(g, b);
  double r = 0;
  for (int a = 0; a < g.dim(); ++a) r += (B.col(2 * a) - B.col(2 * a + 1)).maxCoeff();
  return r / g.h();
}

enum class DivergenceScheme { kCentered, kDonorCell };

// Divergence of a vector field. kDonorCell reads the field as a velocity and
// returns the donor-cell divergence of the unit-density flux.
inline Field divergence(const VectorField& vf, DivergenceScheme scheme = DivergenceScheme::kCentered) {
  const TorusGrid& g = vf.grid;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  if (scheme == DivergenceScheme::kCentered) {
    for (int a = 0; a < g.dim(); ++a) out += centered_diff(g, Eigen::VectorXd(vf.values.col(a)), a);
  } else {
    out = transport_divergence(g, vf.values, Eigen::VectorXd::Ones(g.size()));
  }
  return Field(g, out);
}

template <typename Derived>
typename Derived::Scalar integrate(const TorusGrid& g, const Eigen::MatrixBase<Derived>& f) {
  return static_cast<typename Derived::Scalar>(g.cell()) * f.sum();
}

template <typename Scalar>
Scalar integrate(const BasicField<Scalar>& f) {
  return integrate(f.grid, f.values);
}

template <typename A, typename B>
typename A::Scalar inner(const TorusGrid& g, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return static_cast<typename A::Scalar>(g.cell()) * a.dot(b);
}

// Trapezoid rule in time of a per-frame quantity.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& v) {
  double s = 0;
  for (size_t k = 0; k + 1 < t.size(); ++k) s += 0.5 * (t[k + 1] - t[k]) * (v[k] + v[k + 1]);
  return s;
}

// Space-time integral of a time field over [0,T] x torus.
template <typename Scalar>
double integrate_space_time(const BasicTimeField<Scalar>& f) {
  std::vector<double> per(f.t.size());
  for (size_t k = 0; k < f.t.size(); ++k) per[k] = integrate(f.grid, f.frames.col(Index(k)));
  return trapezoid(f.t, per);
}

// ------------------------------------------------------------------ kernel

enum class KernelKind { kIdentity, kBump };

struct KernelSpec {
  KernelKind kind = KernelKind::kIdentity;
  double radius = 0.1;
};

// Weights indexed by displacement: weights[k] = w(x_k + 0.5) with wrap, i.e.
// node k of the weight field holds the displacement (i, j) of multi(k).
struct Kernel {
  KernelSpec spec;
  TorusGrid grid;
  Field weights;
  std::vector<std::pair<std::array<int, 2>, double>> support;
};

inline double bump_profile(double r, double radius) {
  const double s = r / radius;
  if (s >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s));
}

inline Kernel make_kernel(const TorusGrid& g, const KernelSpec& spec) {
  Kernel k{spec, g, Field(g), {}};
  if (spec.kind == KernelKind::kIdentity) {
    k.weights[0] = 1.0 / g.cell();
    k.support.push_back({{0, 0}, 1.0 / g.cell()});
    return k;
  }
  if (!(spec.radius > 0.0 && spec.radius <= 0.25))
    throw std::invalid_argument("bump radius must lie in (0, 0.25]");
  const int n = g.n();
  auto disp = [n](int s) { return s <= n / 2 ? static_cast<double>(s) / n : static_cast<double>(s - n) / n; };
  double total = 0;
  for (Index idx = 0; idx < g.size(); ++idx) {
    auto ij = g.multi(idx);
    const double dx = disp(ij[0]);
    const double dy = g.dim() == 2 ? disp(ij[1]) : 0.0;
    const double w = bump_profile(std::sqrt(dx * dx + dy * dy), spec.radius);
    k.weights[idx] = w;
    total += w;
  }
  k.weights.values /= total * g.cell();
  for (Index idx = 0; idx < g.size(); ++idx) {
    if (k.weights[idx] == 0.0) continue;
    auto ij = g.multi(idx);
    k.support.push_back({{ij[0], ij[1]}, k.weights[idx]});
  }
  return k;
}

// (rho * f)_i = h^d sum_j w(x_i - x_j) f_j, summed over the kernel support.
template <typename Derived>
VectorX<typename Derived::Scalar> periodic_convolve(const Kernel& ker, const Eigen::MatrixBase<Derived>& f) {
  using S = typename Derived::Scalar;
  const TorusGrid& g = ker.grid;
  if (f.size() != g.size()) throw std::invalid_argument("grid mismatch");
  if (ker.spec.kind == KernelKind::kIdentity) return f;
  const S cell = static_cast<S>(g.cell());
  VectorX<S> out = VectorX<S>::Zero(g.size());
  const int n = g.n();
  for (const auto& [d, w] : ker.support) {
    const S cw = cell * static_cast<S>(w);
    if (g.dim() == 1) {
      for (int i = 0; i < n; ++i) out[i] += cw * f[(i - d[0] + n) % n];
    } else {
      for (int j = 0; j < n; ++j) {
        const Index src_row = Index((j - d[1] + n) % n) * n;
        for (int i = 0; i < n; ++i) out[Index(j) * n + i] += cw * f[src_row + (i - d[0] + n) % n];
      }
    }
  }
  return out;
}

template <typename Scalar>
BasicField<Scalar> periodic_convolve(const BasicField<Scalar>& f, const Kernel& ker) {
  require_same_grid(f.grid, ker.grid);
  return BasicField<Scalar>(f.grid, periodic_convolve(ker, f.values));
}

template <typename Scalar>
BasicTimeField<Scalar> periodic_convolve(const BasicTimeField<Scalar>& f, const Kernel& ker) {
  require_same_grid(f.grid, ker.grid);
  BasicTimeField<Scalar> out = f;
  for (Index k = 0; k < f.frame_count(); ++k) out.frames.col(k) = periodic_convolve(ker, f.frames.col(k));
  return out;
}

}  // namespace hmfg
