#include "runner.hpp"

#include "run_config.hpp"

#include "hmfg/acceptance.hpp"
#include "hmfg/ergodic.hpp"
#include "hmfg/field_io.hpp"
#include "hmfg/longtime.hpp"
#include "hmfg/mfg.hpp"
#include "hmfg/operators.hpp"
#include "hmfg/spectral.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#ifndef HMFG_VERSION
#define HMFG_VERSION "0.0.0"
#endif

namespace hmfg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, const char* f = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

// Plain numeric CSV, 17 significant digits.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<double> row) { rows_.push_back(std::move(row)); }
  std::string str() const {
    std::ostringstream os;
    os.precision(17);
    for (size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << '\n';
    for (const auto& r : rows_) {
      for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << '\n';
    }
    return os.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

// One run directory: fields/, tables/, config.ini, manifest.json.
class Run {
 public:
  Run(std::string command, const RunConfig& cfg, std::ostream& out) : command_(std::move(command)), cfg_(cfg), out_(out) {
    std::string root = cfg.text("run.output");
    if (root.empty()) {
      const char* env = std::getenv("HMFG_OUTPUT_ROOT");
      root = env && *env ? env : "runs";
    }
    std::string name = cfg.text("run.name");
    if (name.empty()) {
      RunConfig keyed = cfg;
      keyed.set("run.output", "");
      keyed.set("run.jobs", "1");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(command_ + '\n' + keyed.to_ini())));
      name = command_ + "-" + std::string(buf).substr(0, 10);
    }
    dir_ = fs::path(root) / name;
    started_ = std::chrono::steady_clock::now();
  }

  // Nothing touches the disk before the first output, so rejected configs leave no directory.
  bool created() const { return created_; }

  const fs::path& dir() const { return dir_; }
  json& results() { return results_; }
  std::ostream& out() { return out_; }
  bool timing() const { return cfg_.flag("run.timing"); }

  void field(const std::string& name, const Field& f) {
    const std::string fm = cfg_.text("run.fields");
    if (fm != "binary") save_csv(path("fields/" + name + ".csv"), f);
    if (fm != "csv") save_binary(path("fields/" + name + ".bin"), f);
  }
  void field(const std::string& name, const TimeField& f) {
    const std::string fm = cfg_.text("run.fields");
    if (fm != "binary") save_csv(path("fields/" + name + ".csv"), f);
    if (fm != "csv") save_binary(path("fields/" + name + ".bin"), f);
  }
  void table(const std::string& name, const std::string& csv) { write_file("tables/" + name + ".csv", csv); }

  // value <= limit unless pass is given explicitly
  void check(const std::string& name, double value, double limit, const std::string& relation = "<=") {
    const bool pass = relation == "<=" ? value <= limit : relation == ">=" ? value >= limit : value == limit;
    checks_.push_back({{"name", name}, {"value", finite_or_null(value)}, {"relation", relation},
                       {"limit", limit}, {"pass", pass}});
    out_ << "  check " << name << ": " << fmt(value, "%.4g") << ' ' << relation << ' ' << fmt(limit, "%.4g")
         << (pass ? "  PASS" : "  FAIL") << '\n';
    all_pass_ = all_pass_ && pass;
  }
  bool all_pass() const { return all_pass_; }

  void finish(const std::string& status, const std::string& error = "") {
    const TorusGrid g = config_grid(cfg_);
    json m;
    m["artifact"] = "hmfg";
    m["version"] = HMFG_VERSION;
    m["command"] = command_;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["config"] = cfg_.values();
    m["config_file"] = "config.ini";
    m["grid"] = {{"dim", g.dim()}, {"n", g.n()}, {"h", g.h()}};
    m["time"] = {{"T", cfg_.real("game.T")}, {"dt", cfg_.real("game.dt")}};
    m["checks"] = checks_;
    m["all_checks_pass"] = all_pass_;
    m["results"] = results_;
    m["outputs"] = outputs_;
    m["wall_time_seconds"] =
        timing() ? json(std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count()) : json(nullptr);
    write_file("manifest.json", m.dump(2) + "\n");
    out_ << "run directory: " << dir_.string() << '\n';
  }

  static json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

 private:
  std::string path(const std::string& rel) {
    if (!created_) {
      created_ = true;
      fs::create_directories(dir_ / "fields");
      fs::create_directories(dir_ / "tables");
      write_file("config.ini", cfg_.to_ini());
    }
    outputs_.insert(rel);
    return (dir_ / rel).string();
  }
  // Write then rename, so a reader never sees a partial file.
  void write_file(const std::string& rel, const std::string& body) {
    const std::string target = path(rel);
    const std::string tmp = target + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << body;
      if (!f) throw std::runtime_error("cannot write " + tmp);
    }
    fs::rename(tmp, target);
  }

  std::string command_;
  RunConfig cfg_;
  std::ostream& out_;
  fs::path dir_;
  json results_ = json::object();
  json checks_ = json::array();
  std::set<std::string> outputs_;
  bool all_pass_ = true;
  bool created_ = false;
  std::chrono::steady_clock::time_point started_;
};

TimeField constant_reward(const RunConfig& c, const TorusGrid& g) {
  const double T = c.real("game.T");
  return TimeField::constant_in_time(config_profile(c, "hjb.F").sample(g), uniform_times(T, step_count(T, c.real("game.dt"))));
}

HJBOptions hjb_options(const RunConfig& c) {
  HJBOptions o;
  o.hamiltonian = c.text("solver.hamiltonian") == "godunov" ? NumericalHamiltonian::kGodunov
                                                             : NumericalHamiltonian::kEngquistOsher;
  return o;
}

void require_time_grid(const RunConfig& c) {
  try {
    step_count(c.real("game.T"), c.real("game.dt"));
  } catch (const std::invalid_argument&) {
    throw ConfigError("game.dt = " + c.text("game.dt") + " must divide game.T = " + c.text("game.T"));
  }
}

// ------------------------------------------------------------------ commands

void cmd_eig(Run& r, const RunConfig& c) {
  const TorusGrid g = config_grid(c);
  const double mu = c.real("habitat.mu");
  const Field V = config_profile(c, "eig.V").sample(g);
  const Eigenpair e = principal_eigenpair(mu, V);
  r.out() << "lambda1 = " << fmt(e.lambda1) << '\n';
  r.results() = {{"lambda1", e.lambda1}, {"residual", e.residual}, {"iterations", e.iterations}};
  r.field("eigenfunction", e.eigenfunction);
  double dense = std::numeric_limits<double>::quiet_NaN();
  if (g.size() <= 1024) {
    Eigen::MatrixXd A = -mu * Eigen::MatrixXd(laplacian_matrix(g));
    A.diagonal() -= V.values;
    dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    r.results()["dense_lambda1"] = dense;
  }
  Table t({"lambda1", "residual", "iterations", "dense_lambda1"});
  t.add({e.lambda1, e.residual, double(e.iterations), dense});
  r.table("eig", t.str());
  r.check("eigen_residual", e.residual, 1e-6);
  if (std::isfinite(dense)) r.check("dense_agreement", std::abs(e.lambda1 - dense), 1e-8 * std::max(1.0, std::abs(dense)));
}

void cmd_steady(Run& r, const RunConfig& c) {
  const Habitat hab = config_habitat(c);
  const SteadyState s = steady_state(hab.mu, hab.K);
  const Eigen::VectorXd& th = s.theta_bar.values;
  r.out() << "status = " << to_string(s.status) << '\n'
          << "theta_bar: min " << fmt(th.minCoeff()) << ", max " << fmt(th.maxCoeff()) << ", mean "
          << fmt(integrate(s.theta_bar)) << '\n';
  r.results() = {{"status", to_string(s.status)}, {"trivial", s.trivial}, {"residual", s.residual},
                 {"lambda1_check", s.lambda1_check}, {"newton_iterations", s.newton_iterations},
                 {"used_fallback", s.used_fallback}};
  r.field("theta_bar", s.theta_bar);
  Table t({"min", "max", "mean", "residual", "lambda1_check"});
  t.add({th.minCoeff(), th.maxCoeff(), integrate(s.theta_bar), s.residual, s.lambda1_check});
  r.table("steady", t.str());
  r.check("residual", s.residual, 1e-8);
  if (!s.trivial) r.check("eigen_identity", std::abs(s.lambda1_check), 5e-6);
}

void cmd_evolve(Run& r, const RunConfig& c) {
  const MFGProblem p = config_problem(c);
  const auto t = uniform_times(p.T, step_count(p.T, p.dt));
  const TimeField m = TimeField::constant_in_time(p.m0, t);
  TimeField th;
  try {
    th = evolve(p.theta0, p.habitat, p.eps, m, p.rho, p.T, p.dt);
  } catch (const DtTooLarge& e) {
    throw ConfigError(std::string("game.dt: ") + e.what() + " (suggested dt <= " + fmt(e.suggested_dt(), "%.3g") + ")");
  }
  const Field bar = steady_state(p.habitat.mu, p.habitat.K).theta_bar;
  Table tab({"t", "sup_distance", "min_theta", "mass"});
  for (Index k = 0; k < th.frame_count(); ++k)
    tab.add({th.t[size_t(k)], (th.col(k) - bar.values).lpNorm<Eigen::Infinity>(), th.col(k).minCoeff(),
             integrate(th.grid, th.col(k))});
  r.table("evolve", tab.str());
  r.field("theta", th);
  const double final_gap = (th.col(th.frame_count() - 1) - bar.values).lpNorm<Eigen::Infinity>();
  r.out() << "sup |theta(T) - theta_bar| = " << fmt(final_gap) << '\n';
  r.results() = {{"final_sup_distance", final_gap}};
  if (p.eps == 0) {
    const RateFit f = stability_rate(th, bar);
    r.results()["stability_rate"] = {{"rate", f.rate}, {"quality", f.quality}, {"points", f.points},
                                     {"degenerate", f.degenerate}, {"non_monotone", f.non_monotone},
                                     {"short_path", f.short_path}};
    if (!f.degenerate) r.out() << "stability rate = " << fmt(f.rate) << '\n';
  }
  r.check("min_theta", th.frames.minCoeff(), 0.0, ">=");
}

void cmd_hjb(Run& r, const RunConfig& c) {
  require_time_grid(c);
  const TorusGrid g = config_grid(c);
  const TimeField F = constant_reward(c, g);
  const double T = c.real("game.T");
  const HJBSolution s = solve_backward(F, c.real("game.nu"), T, c.real("game.dt"), hjb_options(c));
  r.field("u", s.u);
  Table tab({"t", "min_u", "max_u"});
  double lower = 0, upper = 0;  // comparison with the constant-control bounds
  const double fmin = F.frames.minCoeff(), fmax = F.frames.maxCoeff();
  for (Index k = 0; k < s.u.frame_count(); ++k) {
    const double left = T - s.u.t[size_t(k)];
    tab.add({s.u.t[size_t(k)], s.u.col(k).minCoeff(), s.u.col(k).maxCoeff()});
    lower = std::max(lower, fmin * left - s.u.col(k).minCoeff());
    upper = std::max(upper, s.u.col(k).maxCoeff() - fmax * left);
  }
  r.table("hjb", tab.str());
  r.out() << "u(0): min " << fmt(s.u.col(0).minCoeff()) << ", max " << fmt(s.u.col(0).maxCoeff()) << '\n';
  r.results() = {{"max_substeps_used", s.max_substeps_used}, {"semiconvexity", semiconvexity_bound(s.u)}};
  r.check("finite", all_finite(s.u.frames) ? 1.0 : 0.0, 1.0, "==");
  r.check("lower_bound_violation", lower, 1e-10);
  r.check("upper_bound_violation", upper, 1e-10);
}

void cmd_fpk(Run& r, const RunConfig& c) {
  require_time_grid(c);
  const TorusGrid g = config_grid(c);
  const double T = c.real("game.T"), dt = c.real("game.dt"), nu = c.real("game.nu");
  const HJBSolution s = solve_backward(constant_reward(c, g), nu, T, dt, hjb_options(c));
  const Field m0 = config_density(c, g);
  const DensityPath d = solve_forward(m0, s, T, dt);
  r.field("m", d.m);
  Table tab({"t", "mass_error", "min_m"});
  for (Index k = 0; k < d.m.frame_count(); ++k)
    tab.add({d.m.t[size_t(k)], integrate(g, d.m.col(k)) - 1, d.m.col(k).minCoeff()});
  r.table("fpk", tab.str());
  r.results() = {{"mass_drift", d.mass_drift}, {"max_substeps_used", d.max_substeps_used}};
  r.out() << "mass drift = " << fmt(d.mass_drift, "%.3g") << '\n';
  if (const int N = c.integer("fpk.particles"); N > 0) {
    ParticleOptions po;
    po.jobs = c.integer("run.jobs");
    const ParticleEnsemble ens = simulate_particles(m0, s.drift, nu, N, T, dt, uint64_t(c.integer("run.seed")), po);
    const double dist = density_particle_distance(d, ens, T);
    r.field("particle_histogram", particle_histogram(ens, T));
    r.results()["particles"] = {{"N", N}, {"l1_distance", dist}};
    r.out() << "particle L1 distance at T = " << fmt(dist, "%.4g") << '\n';
  }
  r.check("mass_drift", d.mass_drift, 1e-12);
  r.check("min_m", d.m.frames.minCoeff(), 0.0, ">=");
}

void cmd_mfg(Run& r, const RunConfig& c) {
  const MFGProblem p = config_problem(c);
  const EquilibriumSolution s = solve_equilibrium(p);
  r.field("u", s.u);
  r.field("m", s.m.m);
  r.field("theta", s.theta);
  Table hist({"iteration", "residual"});
  for (size_t k = 0; k < s.residual_history.size(); ++k) hist.add({double(k + 1), s.residual_history[k]});
  r.table("residuals", hist.str());
  Table tab({"t", "mass_error", "min_m", "min_theta"});
  for (Index k = 0; k < s.m.m.frame_count(); ++k)
    tab.add({s.m.m.t[size_t(k)], integrate(p.grid(), s.m.m.col(k)) - 1, s.m.m.col(k).minCoeff(), s.theta.col(k).minCoeff()});
  r.table("mfg", tab.str());
  r.out() << (s.converged ? "converged" : "not converged") << " after " << s.iterations << " iterations, residual "
          << fmt(s.residual, "%.3g") << '\n';
  r.results() = {{"converged", s.converged}, {"iterations", s.iterations}, {"residual", s.residual},
                 {"mass_drift", s.m.mass_drift}};
  r.check("fixed_point_residual", s.residual, p.fixed_point.tol);
  r.check("mass_drift", s.m.mass_drift, 1e-12);
  r.check("min_m", s.m.m.frames.minCoeff(), 0.0, ">=");
  r.check("min_theta", s.theta.frames.minCoeff(), 0.0, ">=");
}

json residual_json(const ErgodicResiduals& e) {
  return {{"stencil", e.stencil},
          {"hjb", e.hjb},
          {"fpk", e.fpk},
          {"fish", e.fish},
          {"hjb_centered", Run::finite_or_null(e.hjb_centered)},
          {"fpk_centered", Run::finite_or_null(e.fpk_centered)},
          {"mass_defect", e.mass_defect},
          {"mean_u", e.mean_u},
          {"min_m", e.min_m},
          {"min_theta", e.min_theta},
          {"support_defect", Run::finite_or_null(e.support_defect)},
          {"checked_nodes", e.checked_nodes}};
}

void ergodic_fields(Run& r, const ErgodicSolution& s) {
  r.field("u_bar", s.u_bar);
  r.field("m_bar", s.m_bar);
  r.field("theta_bar", s.theta_bar);
}

void cmd_ergodic(Run& r, const RunConfig& c) {
  if (!(c.real("game.nu") > 0)) throw ConfigError("game.nu must be > 0 for ergodic; the first-order 1D case is ergodic1d");
  const TorusGrid g = config_grid(c);
  const KernelSpec ks{c.text("game.rho") == "identity" ? KernelKind::kIdentity : KernelKind::kBump,
                      c.real("game.rho_radius")};
  const ErgodicSolution s =
      solve_ergodic_second_order(config_habitat(c), c.real("game.nu"), c.real("game.eps"), make_kernel(g, ks));
  r.out() << "lambda_bar = " << fmt(s.lambda_bar) << (s.extinct ? "  (extinct)" : "") << '\n';
  ergodic_fields(r, s);
  const ErgodicResiduals& e = s.residuals;
  Table t({"lambda_bar", "hjb", "fpk", "fish", "hjb_centered", "fpk_centered", "mass_defect", "iterations"});
  t.add({s.lambda_bar, e.hjb, e.fpk, e.fish, e.hjb_centered, e.fpk_centered, e.mass_defect, double(s.iterations)});
  r.table("ergodic", t.str());
  r.results() = {{"lambda_bar", s.lambda_bar}, {"extinct", s.extinct}, {"iterations", s.iterations},
                 {"residuals", residual_json(e)}};
  r.check("residual", e.worst_line(), 1e-8);
  r.check("mass_defect", e.mass_defect, 1e-10);
}

void cmd_ergodic1d(Run& r, const RunConfig& c) {
  if (c.integer("grid.dim") != 1) throw ConfigError("grid.dim must be 1 for ergodic1d");
  const Habitat hab = config_habitat(c);
  if (!hab.profile->decreasing_on_half())
    throw ConfigError("habitat.K = '" + c.text("habitat.K") + "': must be even and strictly decreasing on (0, 0.5)");
  const double eps = c.real("game.eps");
  if (!(eps > 0)) throw ConfigError("game.eps must be > 0 for ergodic1d");
  const ExplicitOneD e = construct_explicit_1d(hab, eps);
  const char* letter = e.regime == Regime1D::kExtinct ? "(a)" : e.regime == Regime1D::kConstant ? "(b)" : "(c)";
  r.out() << "regime " << letter << ' ' << to_string(e.regime) << '\n'
          << "lambda_bar = " << fmt(e.solution.lambda_bar) << '\n';
  if (e.regime == Regime1D::kInterior) r.out() << "y = " << fmt(e.y) << '\n';
  ergodic_fields(r, e.solution);
  r.field("u_printed", e.u_printed);
  const ErgodicResiduals& res = e.solution.residuals;
  Table t({"lambda_bar", "y", "hjb", "fpk", "fish", "mass_defect", "support_defect"});
  t.add({e.solution.lambda_bar, e.y, res.hjb, res.fpk, res.fish, res.mass_defect, res.support_defect});
  r.table("ergodic1d", t.str());
  r.results() = {{"regime", to_string(e.regime)}, {"regime_label", letter}, {"lambda_bar", e.solution.lambda_bar},
                 {"y", e.y}, {"residuals", residual_json(res)}};
  r.check("residual", res.worst_line(), 1e-6);
  r.check("mass_defect", res.mass_defect, 1e-10);
  if (e.regime == Regime1D::kInterior) r.check("support_defect", res.support_defect, 10 * hab.K.grid.h());
}

// Runs body(i) for i < count on `jobs` threads.
void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) body(i);
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min(jobs, count); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

void cmd_monotonicity(Run& r, const RunConfig& c) {
  const MFGProblem p = config_problem(c);
  const auto t = uniform_times(p.T, step_count(p.T, p.dt));
  const int pairs = c.integer("monotonicity.pairs");
  const double amp = c.real("monotonicity.amplitude");
  const uint64_t seed = uint64_t(c.integer("run.seed"));
  std::vector<MonotonicityReport> rep(static_cast<size_t>(pairs));
  parallel_for(pairs, c.integer("run.jobs"), [&](int k) {
    rep[size_t(k)] = monotonicity_gap(smooth_density_path(p.grid(), t, seed + 2 * uint64_t(k), amp),
                                      smooth_density_path(p.grid(), t, seed + 2 * uint64_t(k) + 1, amp), p);
  });
  Table tab({"pair", "seed1", "seed2", "lhs", "rhs", "ratio", "scaled_ratio"});
  double max_lhs = -INFINITY, min_scaled = INFINITY;
  for (int k = 0; k < pairs; ++k) {
    const auto& m = rep[size_t(k)];
    tab.add({double(k), double(seed + 2 * k), double(seed + 2 * k + 1), m.lhs, m.rhs, m.ratio, m.scaled_ratio});
    max_lhs = std::max(max_lhs, m.lhs);
    if (!m.degenerate) min_scaled = std::min(min_scaled, m.scaled_ratio);
  }
  r.table("monotonicity", tab.str());
  r.out() << "max lhs = " << fmt(max_lhs, "%.4g") << ", min scaled ratio = " << fmt(min_scaled, "%.4g") << '\n';
  r.results() = {{"max_lhs", max_lhs}, {"min_scaled_ratio", Run::finite_or_null(min_scaled)}};
  r.check("max_lhs", max_lhs, 1e-10);
}

void cmd_longtime(Run& r, const RunConfig& c) {
  const MFGProblem p = config_problem(c);
  const std::vector<double> Ts = c.real_list("longtime.T_list");
  for (size_t i = 0; i < Ts.size(); ++i) {
    if (!(Ts[i] > 0) || (i > 0 && !(Ts[i] > Ts[i - 1])))
      throw ConfigError("longtime.T_list must be positive and strictly increasing");
    try {
      step_count(Ts[i], p.dt);
    } catch (const std::invalid_argument&) {
      throw ConfigError("longtime.T_list: game.dt = " + c.text("game.dt") + " does not divide T = " + fmt(Ts[i]));
    }
  }
  StudyOptions opt;
  opt.jobs = c.integer("run.jobs");
  opt.exclude_smallest = c.integer("longtime.exclude_smallest");
  const RateTable t = convergence_study(p, Ts, opt);
  std::ostringstream csv;
  t.write_csv(csv, r.timing());
  r.table("rates", csv.str());
  Table turn({"T", "quarter", "mid", "averaged", "iterations", "residual"});
  for (const auto& row : t.rows) turn.add({row.T, row.quarter, row.mid, row.averaged, double(row.iterations), row.residual});
  r.table("turnpike", turn.str());
  r.results() = json::parse(t.to_json(r.timing()));
  r.out() << "lambda_bar = " << fmt(t.lambda_bar) << '\n'
          << "e_theta slope = " << fmt(t.theta_fit.slope, "%.4f") << " +- " << fmt(t.theta_fit.half_width, "%.2g") << '\n'
          << "e_u slope = " << fmt(t.u_fit.slope, "%.4f") << " +- " << fmt(t.u_fit.half_width, "%.2g") << '\n';
  r.check("gaps", double(t.gaps.size()), 0.0, "==");
}

void cmd_verify(Run& r, const RunConfig& c) {
  const Scale scale = parse_scale(c.text("verify.scale"));
  Table tab({"id", "pass", "seconds", "budget_seconds"});
  json rows = json::array();
  bool all = true;
  run_acceptance(scale, c.integer("run.jobs"), [&](const CriterionResult& res) {
    r.out() << format_line(res) << '\n' << std::flush;
    tab.add({double(res.id), res.pass ? 1.0 : 0.0, r.timing() ? res.seconds : 0.0, res.budget_seconds});
    json metrics = json::object();
    for (const auto& [k, v] : res.metrics) metrics[k] = Run::finite_or_null(v);
    rows.push_back({{"id", res.id}, {"title", res.title}, {"pass", res.pass}, {"metrics", metrics}, {"note", res.note}});
    all = all && res.pass;
  });
  r.table("acceptance", tab.str());
  r.results() = {{"scale", to_string(scale)}, {"criteria", rows}};
  r.check("criteria_passed", all ? 1.0 : 0.0, 1.0, "==");
}

struct Command {
  const char* name;
  void (*fn)(Run&, const RunConfig&);
  const char* about;
  const char* columns;
};

const Command kCommands[] = {
    {"eig", cmd_eig, "principal eigenpair of -mu Lap - V", "tables/eig.csv: lambda1,residual,iterations,dense_lambda1"},
    {"steady", cmd_steady, "positive steady state of the logistic equation", "tables/steady.csv: min,max,mean,residual,lambda1_check"},
    {"evolve", cmd_evolve, "fish density under a frozen harvest", "tables/evolve.csv: t,sup_distance,min_theta,mass"},
    {"hjb", cmd_hjb, "backward HJB with a time-independent reward", "tables/hjb.csv: t,min_u,max_u"},
    {"fpk", cmd_fpk, "forward FPK driven by the HJB control", "tables/fpk.csv: t,mass_error,min_m"},
    {"mfg", cmd_mfg, "equilibrium of the coupled system",
     "tables/residuals.csv: iteration,residual; tables/mfg.csv: t,mass_error,min_m,min_theta"},
    {"ergodic", cmd_ergodic, "ergodic system with nu > 0",
     "tables/ergodic.csv: lambda_bar,hjb,fpk,fish,hjb_centered,fpk_centered,mass_defect,iterations"},
    {"ergodic1d", cmd_ergodic1d, "explicit first-order ergodic solution in 1D",
     "tables/ergodic1d.csv: lambda_bar,y,hjb,fpk,fish,mass_defect,support_defect"},
    {"monotonicity", cmd_monotonicity, "monotonicity gap over random density pairs",
     "tables/monotonicity.csv: pair,seed1,seed2,lhs,rhs,ratio,scaled_ratio"},
    {"longtime", cmd_longtime, "long-time convergence sweep",
     "tables/rates.csv: T,e_theta,e_u,wall_time; tables/turnpike.csv: T,quarter,mid,averaged,iterations,residual"},
    {"verify", cmd_verify, "acceptance suite", "tables/acceptance.csv: id,pass,seconds,budget_seconds"},
};

struct Shortcut {
  const char* flag;
  const char* key;
};

const Shortcut kShortcuts[] = {
    {"--dim", "grid.dim"},        {"--n", "grid.n"},          {"--K", "habitat.K"},
    {"--mu", "habitat.mu"},       {"--nu", "game.nu"},        {"--eps", "game.eps"},
    {"--T", "game.T"},            {"--dt", "game.dt"},        {"--rho", "game.rho"},
    {"--m0", "game.m0"},          {"--theta0", "game.theta0"}, {"--damping", "solver.damping"},
    {"--tol", "solver.tol"},      {"--V", "eig.V"},           {"--F", "hjb.F"},
    {"--particles", "fpk.particles"}, {"--T-list", "longtime.T_list"}, {"--pairs", "monotonicity.pairs"},
    {"--scale", "verify.scale"},  {"--seed", "run.seed"},     {"--jobs", "run.jobs"},
    {"--out", "run.output"},      {"--name", "run.name"},     {"--fields", "run.fields"},
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Harvesting mean field game solver. Every subcommand writes a run directory with "
               "manifest.json, config.ini, tables/*.csv and fields/*."};
  app.set_version_flag("--version", HMFG_VERSION);
  app.require_subcommand(1);
  app.footer("Config files: INI sections [grid] [habitat] [game] [solver] [eig] [hjb] [fpk] [longtime] "
             "[monotonicity] [verify] [run]; see README. Precedence: defaults < --config < --set < flags.\n"
             "Output root: run.output, else $HMFG_OUTPUT_ROOT, else ./runs.");

  std::string config_path;
  std::vector<std::string> sets;
  bool timing = false;
  std::vector<std::pair<CLI::App*, std::vector<std::pair<CLI::Option*, std::string>>>> subs;
  std::map<std::string, std::string> shortcut_values;
  for (const auto& cmd : kCommands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.about);
    sub->footer(std::string("CSV columns: ") + cmd.columns);
    sub->add_option("--config", config_path, "INI config file");
    sub->add_option("--set", sets, "override section.key=value (repeatable)");
    sub->add_flag("--timing", timing, "record wall times");
    std::vector<std::pair<CLI::Option*, std::string>> opts;
    for (const auto& s : kShortcuts) {
      const KeySpec* k = find_key(s.key);
      opts.push_back({sub->add_option(s.flag, shortcut_values[s.key], std::string(s.key) + ", " + expected(*k)), s.key});
    }
    subs.push_back({sub, std::move(opts)});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  for (size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i].first->parsed()) continue;
    const Command& cmd = kCommands[i];
    RunConfig cfg;
    std::unique_ptr<Run> run;
    try {
      if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
      }
      for (const auto& [opt, key] : subs[i].second)
        if (opt->count() > 0) cfg.set(key, shortcut_values[key]);
      if (timing) cfg.set("run.timing", "true");
      config_grid(cfg);
      config_habitat(cfg);
      run = std::make_unique<Run>(cmd.name, cfg, out);
      cmd.fn(*run, cfg);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << '\n';
      if (run && run->created()) run->finish("config_error", e.what());
      return 2;
    } catch (const std::invalid_argument& e) {
      err << "invalid input: " << e.what() << '\n';
      if (run && run->created()) run->finish("config_error", e.what());
      return 2;
    } catch (const std::exception& e) {
      err << "solver failure: " << e.what() << '\n';
      if (run) run->finish("solver_failure", e.what());
      return 1;
    }
    run->finish(run->all_pass() ? "ok" : "check_failed");
    if (!run->all_pass()) {
      err << "some checks failed\n";
      return 1;
    }
    return 0;
  }
  return 2;
}

}  // namespace hmfg::cli
