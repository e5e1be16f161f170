#pragma once

#include "hmfg/ergodic.hpp"
#include "hmfg/mfg.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hmfg {

// Theta(s, x) = theta(sT, x), M(s, x) = m(sT, x), W(s, x) = u(sT, x) on s in [0, 1].
struct RescaledTriple {
  TimeField Theta;
  TimeField M;
  TimeField W;
  double T = 0;
};

// Frame selection only. s_nodes = 0 keeps every frame; otherwise the step count must be a
// multiple of s_nodes and frames k * steps / s_nodes are kept.
RescaledTriple rescale(const EquilibriumSolution& sol, double T, int s_nodes = 0);

struct ErgodicReference {
  double lambda_bar = 0;
  Field theta_bar;
};

// ||Theta - theta_bar||^2 in L2((0,1) x torus), trapezoid rule in s.
double theta_error(const RescaledTriple& r, const Field& theta_bar);
// sup over s, x of |W/T - lambda (1 - s)|.
double value_error(const RescaledTriple& r, double lambda_bar);

struct RateRow {
  double T = 0;
  double e_theta = 0;
  double e_u = 0;
  double wall_time = 0;
  bool converged = false;
  int iterations = 0;
  double residual = 0;
  // Turnpike profile: sup-norm distance to theta_bar at t = T/4, T/2 and its s-average.
  double quarter = 0;
  double mid = 0;
  double averaged = 0;
};

struct SlopeFit {
  double slope = 0;
  double half_width = 0;  // 95% Student-t half-width; infinite with two points
  int points = 0;
  bool degenerate = false;  // some error at round-off level (<= 1e-13), or fewer than two points
};

struct RateTable {
  std::vector<RateRow> rows;
  SlopeFit theta_fit;
  SlopeFit u_fit;
  int excluded_smallest = 1;  // rows left out of the fits, counted from the smallest T
  std::vector<double> gaps;   // horizons whose equilibrium did not converge
  double lambda_bar = 0;

  void write_csv(std::ostream& os, bool with_timing = false) const;
  std::string to_json(bool with_timing = false) const;
};

SlopeFit fit_log_slope(const std::vector<double>& T, const std::vector<double>& e);

struct StudyOptions {
  int jobs = 1;
  int exclude_smallest = 1;
  ErgodicOptions ergodic;
};

ErgodicReference ergodic_reference(const MFGProblem& prob, const ErgodicOptions& opt = {});

// One equilibrium per horizon with the template's dt, so every run has the same resolution per unit time.
RateTable convergence_study(const MFGProblem& prob_template, const std::vector<double>& T_list,
                            const ErgodicReference& ref, const StudyOptions& opt = {});
RateTable convergence_study(const MFGProblem& prob_template, const std::vector<double>& T_list,
                            const StudyOptions& opt = {});

}  // namespace hmfg
