#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace hmfg::cli {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

KeySpec num(std::string key, KeyType t, std::string fallback, double lo, double hi, bool lo_open, std::string help) {
  return {std::move(key), t, std::move(fallback), lo, hi, lo_open, {}, std::move(help)};
}
KeySpec text(std::string key, std::string fallback, std::string help) {
  return {std::move(key), KeyType::kText, std::move(fallback), 0, 0, false, {}, std::move(help)};
}
KeySpec choice(std::string key, std::vector<std::string> options, std::string help) {
  std::string first = options.front();
  return {std::move(key), KeyType::kChoice, first, 0, 0, false, std::move(options), std::move(help)};
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool parse_real(const std::string& s, double& v) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(v);
}

std::string fmt_bound(double v) { return std::isinf(v) ? (v > 0 ? "inf" : "-inf") : format_real(v); }
}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      num("grid.dim", KeyType::kInt, "1", 1, 2, false, "space dimension"),
      num("grid.n", KeyType::kInt, "128", 8, 4096, false, "nodes per axis"),
      text("habitat.K", "1+0.5cos", "carrying capacity, cosine series"),
      num("habitat.mu", KeyType::kReal, "1", 0, kInf, true, "fish diffusion"),
      num("game.nu", KeyType::kReal, "0.1", 0, kInf, false, "fishermen noise"),
      num("game.eps", KeyType::kReal, "0.05", 0, kInf, false, "harvest intensity"),
      num("game.T", KeyType::kReal, "2", 0, kInf, true, "horizon"),
      num("game.dt", KeyType::kReal, "0.01", 0, kInf, true, "time step; must divide T"),
      choice("game.rho", {"bump", "identity"}, "harvest kernel"),
      num("game.rho_radius", KeyType::kReal, "0.1", 0, 0.25, true, "bump radius"),
      text("game.m0", "uniform", "initial fishermen density: uniform or a positive cosine series (normalized)"),
      text("game.theta0", "steady", "initial fish density: steady or a nonnegative cosine series"),
      num("solver.damping", KeyType::kReal, "0.5", 0, 1, true, "fixed-point relaxation"),
      num("solver.tol", KeyType::kReal, "1e-06", 0, kInf, true, "fixed-point tolerance, sup-t L1"),
      num("solver.max_iter", KeyType::kInt, "500", 1, 1e6, false, "fixed-point iteration cap"),
      choice("solver.averaging", {"picard", "fictitious"}, "fixed-point update"),
      choice("solver.hamiltonian", {"engquist-osher", "godunov"}, "numerical Hamiltonian"),
      text("eig.V", "cos", "potential for eig, cosine series"),
      text("hjb.F", "1+0.5cos", "time-independent reward for hjb and fpk, cosine series"),
      num("fpk.particles", KeyType::kInt, "0", 0, 1e8, false, "particle count for the Monte Carlo comparison"),
      text("longtime.T_list", "2.5,5,10,20,40", "comma-separated increasing horizons"),
      num("longtime.exclude_smallest", KeyType::kInt, "1", 0, 100, false, "rows left out of the slope fits"),
      num("monotonicity.pairs", KeyType::kInt, "20", 1, 10000, false, "random density pairs"),
      num("monotonicity.amplitude", KeyType::kReal, "0.4", 0, 0.9, true, "perturbation amplitude"),
      choice("verify.scale", {"quick", "full"}, "acceptance scale"),
      num("run.seed", KeyType::kInt, "1", 0, 2147483647, false, "random seed"),
      num("run.jobs", KeyType::kInt, "1", 1, 256, false, "worker threads"),
      text("run.output", "", "output root; empty: $HMFG_OUTPUT_ROOT or ./runs"),
      text("run.name", "", "run directory name; empty: <command>-<config hash>"),
      choice("run.fields", {"both", "csv", "binary"}, "field file formats"),
      {"run.timing", KeyType::kFlag, "false", 0, 0, false, {}, "record wall times (outputs no longer byte-identical)"},
  };
  return keys;
}

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : schema())
    if (k.key == key) return &k;
  return nullptr;
}

std::string expected(const KeySpec& k) {
  switch (k.type) {
    case KeyType::kInt:
    case KeyType::kReal:
      return std::string(k.type == KeyType::kInt ? "integer in " : "number in ") + (k.lo_open ? "(" : "[") +
             fmt_bound(k.lo) + ", " + fmt_bound(k.hi) + (std::isinf(k.hi) ? ")" : "]");
    case KeyType::kChoice: {
      std::string s = "one of {";
      for (size_t i = 0; i < k.choices.size(); ++i) s += (i ? ", " : "") + k.choices[i];
      return s + "}";
    }
    case KeyType::kFlag:
      return "true or false";
    case KeyType::kText:
      return "text";
  }
  return "";
}

RunConfig::RunConfig() {
  for (const auto& k : schema()) values_[k.key] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const KeySpec* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  const std::string v = trim(raw);
  auto bad = [&] { return ConfigError(key + " = '" + v + "': expected " + expected(*k)); };
  switch (k->type) {
    case KeyType::kInt:
    case KeyType::kReal: {
      double x = 0;
      if (!parse_real(v, x)) throw bad();
      if (k->type == KeyType::kInt && x != std::floor(x)) throw bad();
      if (x < k->lo || (k->lo_open && x == k->lo) || x > k->hi) throw bad();
      values_[key] = k->type == KeyType::kInt ? std::to_string(static_cast<long long>(x)) : format_real(x);
      return;
    }
    case KeyType::kChoice: {
      std::string lower = v;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
      if (std::find(k->choices.begin(), k->choices.end(), lower) == k->choices.end()) throw bad();
      values_[key] = lower;
      return;
    }
    case KeyType::kFlag:
      if (v == "true" || v == "1" || v == "yes") values_[key] = "true";
      else if (v == "false" || v == "0" || v == "no") values_[key] = "false";
      else throw bad();
      return;
    case KeyType::kText:
      values_[key] = v;
      return;
  }
}

const std::string& RunConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("no config key " + key);
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  double v = 0;
  parse_real(text(key), v);
  return v;
}

int RunConfig::integer(const std::string& key) const { return static_cast<int>(real(key)); }
bool RunConfig::flag(const std::string& key) const { return text(key) == "true"; }

std::vector<double> RunConfig::real_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(text(key));
  for (std::string tok; std::getline(ss, tok, ',');) {
    double v = 0;
    if (!parse_real(trim(tok), v)) throw ConfigError(key + ": '" + trim(tok) + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      section = key.substr(0, dot);
      os << (os.tellp() > 0 ? "\n" : "") << '[' << section << "]\n";
    }
    os << key.substr(dot + 1) << " = " << value << '\n';
  }
  return os.str();
}

RunConfig RunConfig::from_text(const std::string& body, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(body);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, body_tree] : tree) {
    if (body_tree.empty()) throw ConfigError(origin + ": key '" + section + "' must sit inside a [section]");
    for (const auto& [name, node] : body_tree) c.set(section + "." + name, node.data());
  }
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    const bool exists = std::filesystem::exists(path);
    throw ConfigError("config file '" + path + "' " + (exists ? "cannot be read" : "does not exist"));
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

TorusGrid config_grid(const RunConfig& c) { return TorusGrid(c.integer("grid.dim"), c.integer("grid.n")); }

CosineProfile config_profile(const RunConfig& c, const std::string& key) {
  try {
    return CosineProfile::parse(c.text(key), c.integer("grid.dim"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + " = '" + c.text(key) + "': " + e.what());
  }
}

Habitat config_habitat(const RunConfig& c) {
  return make_habitat(config_profile(c, "habitat.K"), config_grid(c), c.real("habitat.mu"));
}

Field config_density(const RunConfig& c, const TorusGrid& g) {
  if (c.text("game.m0") == "uniform") return Field::constant(g, 1.0);
  const Field f = config_profile(c, "game.m0").sample(g);
  if (!(f.values.minCoeff() > 0)) throw ConfigError("game.m0 = '" + c.text("game.m0") + "': must be positive on the grid");
  return Field(g, f.values / integrate(f));
}

MFGProblem config_problem(const RunConfig& c) {
  const TorusGrid g = config_grid(c);
  const double T = c.real("game.T"), dt = c.real("game.dt");
  try {
    step_count(T, dt);
  } catch (const std::invalid_argument&) {
    throw ConfigError("game.dt = " + c.text("game.dt") + " must divide game.T = " + c.text("game.T"));
  }
  const KernelSpec ks{c.text("game.rho") == "identity" ? KernelKind::kIdentity : KernelKind::kBump,
                      c.real("game.rho_radius")};
  MFGProblem p = make_problem(config_habitat(c), c.real("game.nu"), c.real("game.eps"), T, dt, make_kernel(g, ks));
  p.m0 = config_density(c, g);
  if (c.text("game.theta0") != "steady") {
    const Field th = config_profile(c, "game.theta0").sample(g);
    if (th.values.minCoeff() < 0) throw ConfigError("game.theta0 = '" + c.text("game.theta0") + "': must be nonnegative");
    p.theta0 = th;
  }
  p.fixed_point.damping = c.real("solver.damping");
  p.fixed_point.tol = c.real("solver.tol");
  p.fixed_point.max_iter = c.integer("solver.max_iter");
  p.fixed_point.averaging = c.text("solver.averaging") == "fictitious" ? Averaging::kFictitiousPlay : Averaging::kPicard;
  p.hjb.hamiltonian = c.text("solver.hamiltonian") == "godunov" ? NumericalHamiltonian::kGodunov
                                                                 : NumericalHamiltonian::kEngquistOsher;
  try {
    validate(p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem rejected: ") + e.what());
  }
  return p;
}

}  // namespace hmfg::cli
