#pragma once

#include "hmfg/operators.hpp"
#include "hmfg/profile.hpp"
#include "hmfg/torus_grid.hpp"

#include <optional>
#include <stdexcept>

namespace hmfg {

struct Habitat {
  Field K;
  double mu = 1;
  double meanK = 0;
  std::optional<CosineProfile> profile;  // analytic form of K when known
};

Habitat make_habitat(const Field& K, double mu);
Habitat make_habitat(const CosineProfile& K, const TorusGrid& g, double mu);

enum class Persistence { kPersistent, kMarginal, kExtinct };
const char* to_string(Persistence p);

struct SteadyOptions {
  int max_newton = 60;
  double march_horizon = 2000;
};

struct SteadyState {
  Field theta_bar;
  bool trivial = true;
  double lambda1_check = 0;  // lambda_1(mu, Ktilde - theta_bar); lambda_1(mu, Ktilde) when trivial
  Persistence status = Persistence::kExtinct;
  double residual = 0;       // sup norm of -mu Lap theta - theta (Ktilde - theta)
  int newton_iterations = 0;
  bool used_fallback = false;
};

SteadyState steady_state(double mu, const Field& Ktilde, const SteadyOptions& opt = {});

// Thrown when dt breaks the positivity/comparison bound of the reaction step.
class DtTooLarge : public std::invalid_argument {
 public:
  DtTooLarge(double dt, double suggested);
  double suggested_dt() const { return suggested_; }

 private:
  double suggested_;
};

// One step of the fish equation
//   theta_t - mu Lap theta = theta (K - theta - eps c),   c = rho * m,
// as two implicit-diffusion / explicit-reaction Euler stages averaged with the
// starting value (strong-stability-preserving RK2). Discrete steady states are
// exact fixed points.
class LogisticStepper {
 public:
  LogisticStepper(const Field& K, double mu, double eps, double dt);

  Eigen::VectorXd stage(const Eigen::VectorXd& theta, const Eigen::VectorXd& c) const;
  // mid receives the first stage value when non-null.
  Eigen::VectorXd step(const Eigen::VectorXd& theta, const Eigen::VectorXd& c0, const Eigen::VectorXd& c1,
                       Eigen::VectorXd* mid = nullptr) const;
  // Linearized reaction potential K - 2 theta - eps c.
  Eigen::VectorXd potential(const Eigen::VectorXd& theta, const Eigen::VectorXd& c) const;

  const DiffusionSolve& implicit() const { return implicit_; }
  double dt() const { return dt_; }
  double eps() const { return eps_; }
  const Eigen::VectorXd& K() const { return K_; }
  const TorusGrid& grid() const { return grid_; }

 private:
  TorusGrid grid_;
  Eigen::VectorXd K_;
  double eps_, dt_;
  DiffusionSolve implicit_;
};

// Largest admissible reaction rate bound used by evolve; dt * bound < 1 is required.
double reaction_rate_bound(const Field& K, const Field& theta0, double eps, double max_harvest);

// Harvest field rho*m sampled on the solver's time nodes.
Eigen::MatrixXd harvest_frames(const TimeField& m_path, const Kernel& rho, const std::vector<double>& t);

TimeField evolve(const Field& theta0, const Habitat& hab, double eps, const TimeField& m_path, const Kernel& rho,
                 double T, double dt);
// Harvest-free evolution.
TimeField evolve(const Field& theta0, const Habitat& hab, double T, double dt);

struct RateFit {
  double rate = 0;
  double quality = 0;        // R^2 of the log-linear fit
  int points = 0;
  bool degenerate = false;   // fewer than three points inside the fit window
  bool non_monotone = false;
  bool short_path = false;   // terminal error above 1e-3 of the initial error
};

RateFit stability_rate(const TimeField& theta_path, const Field& theta_bar);

// sup_t || theta_{eps,m}(t) - theta_bar_K ||_inf starting from theta_bar_K.
double perturbation_gap(double eps, const TimeField& m_path, const Habitat& hab, const Kernel& rho, double T,
                        double dt);

}  // namespace hmfg
