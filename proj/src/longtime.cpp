#include "hmfg/longtime.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace hmfg {

RescaledTriple rescale(const EquilibriumSolution& sol, double T, int s_nodes) {
  const TimeField& th = sol.theta;
  const TimeField& m = sol.m.m;
  const TimeField& u = sol.u;
  if (th.frame_count() != m.frame_count() || th.frame_count() != u.frame_count() || th.frame_count() < 2)
    throw std::invalid_argument("theta, m and u must share their time frames");
  if (std::abs(th.t.back() - T) > 1e-9 * std::max(1.0, T)) throw std::invalid_argument("solution horizon differs from T");
  const Index steps = th.frame_count() - 1;
  if (s_nodes < 0 || (s_nodes > 0 && steps % s_nodes != 0))
    throw std::invalid_argument("s_nodes must divide the number of time steps");
  const Index stride = s_nodes > 0 ? steps / s_nodes : 1;
  const Index count = steps / stride + 1;

  std::vector<double> s(static_cast<size_t>(count));
  for (Index k = 0; k < count; ++k) s[size_t(k)] = double(k) / double(count - 1);
  RescaledTriple r{TimeField(th.grid, s), TimeField(th.grid, s), TimeField(th.grid, s), T};
  for (Index k = 0; k < count; ++k) {
    r.Theta.frames.col(k) = th.frames.col(k * stride);
    r.M.frames.col(k) = m.frames.col(k * stride);
    r.W.frames.col(k) = u.frames.col(k * stride);
  }
  return r;
}

double theta_error(const RescaledTriple& r, const Field& theta_bar) {
  require_same_grid(r.Theta.grid, theta_bar.grid);
  std::vector<double> v;
  for (Index k = 0; k < r.Theta.frame_count(); ++k)
    v.push_back(integrate(r.Theta.grid, Eigen::VectorXd((r.Theta.col(k) - theta_bar.values).cwiseAbs2())));
  return trapezoid(r.Theta.t, v);
}

double value_error(const RescaledTriple& r, double lambda_bar) {
  double e = 0;
  for (Index k = 0; k < r.W.frame_count(); ++k)
    e = std::max(e, (r.W.col(k).array() / r.T - lambda_bar * (1 - r.W.t[k])).abs().maxCoeff());
  return e;
}

SlopeFit fit_log_slope(const std::vector<double>& T, const std::vector<double>& e) {
  SlopeFit f;
  std::vector<double> x, y;
  for (size_t i = 0; i < T.size() && i < e.size(); ++i) {
    if (!(e[i] > 1e-13) || !std::isfinite(e[i])) {  // round-off level errors carry no slope
      f.degenerate = true;
      continue;
    }
    x.push_back(std::log(T[i]));
    y.push_back(std::log(e[i]));
  }
  f.points = int(x.size());
  if (f.points < 2) {
    f.degenerate = true;
    f.slope = std::numeric_limits<double>::quiet_NaN();
    f.half_width = std::numeric_limits<double>::infinity();
    return f;
  }
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  f.slope = sxy / sxx;
  if (f.points == 2) {
    f.half_width = std::numeric_limits<double>::infinity();
    return f;
  }
  double sse = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - my - f.slope * (x[i] - mx);
    sse += r * r;
  }
  static const double t975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228};
  const int df = f.points - 2;
  const double tq = df <= 10 ? t975[df - 1] : 1.96;
  f.half_width = tq * std::sqrt(sse / df / sxx);
  return f;
}

void RateTable::write_csv(std::ostream& os, bool with_timing) const {
  const auto old = os.precision(17);
  os << "T,e_theta,e_u,wall_time\n";
  for (const auto& r : rows) os << r.T << ',' << r.e_theta << ',' << r.e_u << ',' << (with_timing ? r.wall_time : 0.0) << '\n';
  os.precision(old);
}

std::string RateTable::to_json(bool with_timing) const {
  using nlohmann::json;
  auto fit = [](const SlopeFit& f) {
    return json{{"slope", f.slope}, {"half_width", std::isfinite(f.half_width) ? json(f.half_width) : json(nullptr)},
                {"points", f.points}, {"degenerate", f.degenerate}};
  };
  json j;
  j["lambda_bar"] = lambda_bar;
  j["fit_window"] = {{"excluded_smallest", excluded_smallest}, {"reason", "pre-asymptotic transient"}};
  j["e_theta_fit"] = fit(theta_fit);
  j["e_u_fit"] = fit(u_fit);
  j["gaps"] = gaps;
  j["rows"] = json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"T", r.T}, {"e_theta", r.e_theta}, {"e_u", r.e_u}, {"wall_time", with_timing ? r.wall_time : 0.0},
                         {"converged", r.converged}, {"iterations", r.iterations}, {"residual", r.residual},
                         {"turnpike", {{"quarter", r.quarter}, {"mid", r.mid}, {"averaged", r.averaged}}}});
  return j.dump(2);
}

ErgodicReference ergodic_reference(const MFGProblem& prob, const ErgodicOptions& opt) {
  if (prob.nu > 0) {
    const ErgodicSolution s = solve_ergodic_second_order(prob.habitat, prob.nu, prob.eps, prob.rho, opt);
    return {s.lambda_bar, s.theta_bar};
  }
  if (prob.rho.spec.kind != KernelKind::kIdentity)
    throw std::invalid_argument("first-order ergodic reference needs the identity kernel");
  const ExplicitOneD e = construct_explicit_1d(prob.habitat, prob.eps);
  return {e.solution.lambda_bar, e.solution.theta_bar};
}

RateTable convergence_study(const MFGProblem& prob_template, const std::vector<double>& T_list,
                            const StudyOptions& opt) {
  return convergence_study(prob_template, T_list, ergodic_reference(prob_template, opt.ergodic), opt);
}

RateTable convergence_study(const MFGProblem& prob_template, const std::vector<double>& T_list,
                            const ErgodicReference& ref, const StudyOptions& opt) {
  for (size_t i = 1; i < T_list.size(); ++i)
    if (!(T_list[i] > T_list[i - 1])) throw std::invalid_argument("T list must be strictly increasing");
  if (opt.jobs < 1) throw std::invalid_argument("jobs must be at least 1");
  RateTable table;
  table.lambda_bar = ref.lambda_bar;
  table.excluded_smallest = opt.exclude_smallest;
  table.rows.resize(T_list.size());

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < T_list.size(); i = next++) {
      const auto start = std::chrono::steady_clock::now();
      MFGProblem p = prob_template;
      p.T = T_list[i];
      validate(p);
      const EquilibriumSolution sol = solve_equilibrium(p);
      RateRow& row = table.rows[i];
      row.T = p.T;
      row.converged = sol.converged;
      row.iterations = sol.iterations;
      row.residual = sol.residual;
      if (sol.converged) {
        const RescaledTriple r = rescale(sol, p.T);
        row.e_theta = theta_error(r, ref.theta_bar);
        row.e_u = value_error(r, ref.lambda_bar);
        const Index last = r.Theta.frame_count() - 1;
        auto dist = [&](Index k) { return (r.Theta.col(k) - ref.theta_bar.values).lpNorm<Eigen::Infinity>(); };
        row.quarter = dist(last / 4);
        row.mid = dist(last / 2);
        std::vector<double> d;
        for (Index k = 0; k <= last; ++k) d.push_back(dist(k));
        row.averaged = trapezoid(r.Theta.t, d);
      } else {
        row.e_theta = row.e_u = std::numeric_limits<double>::quiet_NaN();
      }
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min<int>(opt.jobs, int(T_list.size())); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<double> T, et, eu;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const RateRow& r = table.rows[i];
    if (!r.converged) {
      table.gaps.push_back(r.T);
      continue;
    }
    if (int(i) < opt.exclude_smallest) continue;
    T.push_back(r.T);
    et.push_back(r.e_theta);
    eu.push_back(r.e_u);
  }
  table.theta_fit = fit_log_slope(T, et);
  table.u_fit = fit_log_slope(T, eu);
  return table;
}

}  // namespace hmfg
