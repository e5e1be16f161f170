#pragma once

#include "hmfg/fpk.hpp"
#include "hmfg/hjb.hpp"
#include "hmfg/logistic.hpp"

#include <cstdint>
#include <vector>

namespace hmfg {

enum class Averaging { kPicard, kFictitiousPlay };

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-6;
  int max_iter = 500;
  Averaging averaging = Averaging::kPicard;
};

struct MFGProblem {
  Habitat habitat;
  double nu = 0.1;
  double eps = 0.05;
  double T = 1;
  double dt = 0.01;
  Kernel rho;
  Field theta0;
  Field m0;
  FixedPointOptions fixed_point;
  HJBOptions hjb;

  const TorusGrid& grid() const { return habitat.K.grid; }
};

// Problem with theta0 = theta_bar_K and m0 uniform unless given.
MFGProblem make_problem(const Habitat& hab, double nu, double eps, double T, double dt, const Kernel& rho);
void validate(const MFGProblem& prob);

// sup over frames of the L1 distance.
double sup_l1_distance(const TimeField& a, const TimeField& b);

// theta_{eps,m}: the fish density driven by the harvest rho*m.
TimeField fish_response(const TimeField& m_path, const MFGProblem& prob);

struct BestResponse {
  TimeField theta;
  HJBSolution hjb;
  DensityPath m;
};

BestResponse best_response(const TimeField& m_path, const MFGProblem& prob);

struct EquilibriumSolution {
  TimeField u;
  DensityPath m;
  TimeField theta;
  HJBSolution hjb;
  int iterations = 0;
  double residual = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

// Damped Picard or fictitious play on m. initial: first iterate (default m0 frozen in time).
EquilibriumSolution solve_equilibrium(const MFGProblem& prob, const TimeField* initial = nullptr);

// Smooth positive density path with unit mass: 1 + sum of a few random time-modulated cosines.
TimeField smooth_density_path(const TorusGrid& g, const std::vector<double>& t, uint64_t seed, double amplitude = 0.4,
                              int modes = 3);

struct SensitivityBundle {
  TimeField theta;        // theta_{eps,m}
  TimeField theta_dot;    // first derivative in direction h, divided by eps
  TimeField theta_ddot;   // second derivative, divided by eps^2
  TimeField p;            // adjoint state, p(T) = 0
  TimeField psi;          // (1 - eps p) / theta
  TimeField V_eps;        // K - eps rho*m - 2 theta
  std::vector<double> sample_times;
  std::vector<double> lambda_eps;
  bool psi_available = true;
  // sum_n h^d w_n <rho*(m1 - m), theta_dot^n>, w_n trapezoid weights
  double tangent_pairing = 0;
  // the same number computed from the adjoint and the source -theta (rho*h)
  double adjoint_pairing = 0;
  // -iint p (rho*h) theta by the trapezoid rule; agrees with the above to O(dt)
  double continuum_adjoint_pairing = 0;
};

SensitivityBundle sensitivity(const TimeField& m_path, const TimeField& h_path, const TimeField& m1_path,
                              const MFGProblem& prob, const std::vector<double>& sample_times = {});

// lambda_eps(t) for given bundle frames; requires psi_available.
double lambda_eps_at(const SensitivityBundle& b, const MFGProblem& prob, Index frame);

// g(m) = iint (rho*theta_{m1} - rho*theta_m)(m1 - m).
double coupling_functional(const TimeField& m_path, const TimeField& m1_path, const MFGProblem& prob);
// Second derivative of g at m in direction h.
double second_variation(const TimeField& m_path, const TimeField& h_path, const TimeField& m1_path,
                        const MFGProblem& prob);

struct MonotonicityReport {
  double lhs = 0;           // iint (rho*theta_1 - rho*theta_2)(m_1 - m_2)
  double rhs = 0;           // iint (theta_1 - theta_2)^2
  double ratio = 0;         // -lhs / (eps rhs)
  double scaled_ratio = 0;  // -eps lhs / rhs, the constant in front of the eps-scaled bound
  bool degenerate = false;
};

MonotonicityReport monotonicity_gap(const TimeField& m1_path, const TimeField& m2_path, const MFGProblem& prob);

struct LambdaZero {
  double lambda0 = 0;
  double phi0_eigenvalue = 0;      // the same form with Phi_0 alone; vanishes in the continuum
  Field phi0;                      // Phi_0
  Field gradient_term;             // mu |grad theta_bar|^2 / (4 theta_bar^3)
  double max_gradient_term = 0;
  Field theta_bar;
};

LambdaZero lambda_zero(const Habitat& hab);

struct LambdaEpsSeries {
  std::vector<double> t;
  std::vector<double> lambda;
  double min = 0;
  double sup_deviation = 0;  // sup_t |lambda_eps - lambda_0|
  double lambda0 = 0;
};

LambdaEpsSeries lambda_eps_positivity(const MFGProblem& prob, const TimeField& m_path, const TimeField& m1_path,
                                      const std::vector<double>& sample_times);

}  // namespace hmfg
