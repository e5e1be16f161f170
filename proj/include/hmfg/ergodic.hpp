#pragma once

#include "hmfg/logistic.hpp"
#include "hmfg/spectral.hpp"

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmfg {

// Sup-norm residuals of the stationary system
//   lambda - nu Lap u - |grad u|^2 / 2 = rho*theta
//   -nu Lap m - div(m grad u) = 0
//   -mu Lap theta = theta (K - eps rho*m - theta)
struct ErgodicResiduals {
  std::string stencil;          // "cole-hopf" (nu > 0) or "fourth-order" (nu = 0)
  double hjb = 0;
  double fpk = 0;
  double fish = 0;
  // nu > 0: the same lines with plain second-order centered stencils.
  double hjb_centered = std::numeric_limits<double>::quiet_NaN();
  double fpk_centered = std::numeric_limits<double>::quiet_NaN();
  double mass_defect = 0;       // |int m - 1|
  double mean_u = 0;            // |int u|
  double min_m = 0;
  double min_theta = 0;
  // nu = 0: max over {m > 1e-10} of ||theta||_inf - theta.
  double support_defect = std::numeric_limits<double>::quiet_NaN();
  Index checked_nodes = 0;

  double worst_line() const { return std::max({hjb, fpk, fish}); }
};

struct ErgodicSolution {
  double lambda_bar = 0;
  Field u_bar;
  Field m_bar;
  Field theta_bar;
  ErgodicResiduals residuals;
  bool extinct = false;
  int iterations = 0;
  std::vector<double> history;  // sup |m_new - m| per iteration
};

struct ErgodicOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 500;
  EigenOptions eigen{1e-13, 100000};
};

class ErgodicNotConverged : public std::runtime_error {
 public:
  explicit ErgodicNotConverged(std::vector<double> history);
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Damped fixed point on m through the Cole-Hopf eigenproblem
//   -2 nu^2 Lap phi - F phi = -lambda phi,  F = rho*theta,  u = 2 nu log phi,  m = phi^2.
ErgodicSolution solve_ergodic_second_order(const Habitat& hab, double nu, double eps, const Kernel& rho,
                                           const ErgodicOptions& opt = {});

// Residual report. With nu > 0 the HJB and FPK lines are evaluated with the discrete
// operators that the Cole-Hopf transform maps onto the 3-point Laplacian:
//   nu Lap u + |grad u|^2/2  ~  (2 nu^2 / h^2) sum_nb (exp((u_nb - u)/(2 nu)) - 1)
//   Lap m - div(m grad u)/nu ~  (1/h^2) sum_nb (m_nb e^{(u - u_nb)/(2 nu)} - m e^{(u_nb - u)/(2 nu)})
// With nu = 0 (1D) derivatives use five-point fourth-order stencils and nodes flagged
// in `skip` are left out (kinks of the explicit construction).
ErgodicResiduals ergodic_residuals(const ErgodicSolution& sol, const Habitat& hab, double nu, double eps,
                                   const Kernel& rho, const std::vector<bool>& skip = {});

// ------------------------------------------------------------------ first order, 1D

enum class Regime1D { kExtinct, kConstant, kInterior };
const char* to_string(Regime1D r);

// Positive Neumann solution of -mu th'' = th (K - th) on (y, 0.5).
struct SegmentSolution {
  double y = 0;
  std::vector<double> x;     // uniform nodes, x.front() = y, x.back() = 0.5
  Eigen::VectorXd theta;
  Eigen::VectorXd curvature;  // theta'' at the nodes, from the equation
  int newton_iterations = 0;
  bool used_fallback = false;

  double at_y() const { return theta[0]; }
  double operator()(double s) const;  // piecewise cubic through values and curvatures
};

SegmentSolution theta_segment(double y, const Habitat& hab, int nodes = 4096);

// G(y) = 2 int_0^y K - 2 y theta_y(y).
double transition_function(double y, const Habitat& hab, int nodes = 4096);
// Root of G(y) = eps on (0, 0.5) by bisection.
double find_transition_y(const Habitat& hab, double eps, double tol = 1e-12, int nodes = 4096);

struct ExplicitOneD {
  Regime1D regime = Regime1D::kExtinct;
  double y = 0;
  SegmentSolution theta_y;
  Field u_printed;  // lambda - int_y^{max(|x|,y)} sqrt(2 (lambda - theta)), without the mean removed
  ErgodicSolution solution;
  std::vector<bool> kink_nodes;
};

ExplicitOneD construct_explicit_1d(const Habitat& hab, double eps, int segment_nodes = 4096);

}  // namespace hmfg
