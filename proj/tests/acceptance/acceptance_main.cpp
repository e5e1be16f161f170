// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Usage: acceptance [--scale quick|full] [--jobs N] [--only 1,3,...]
#include "hmfg/acceptance.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

int main(int argc, char** argv) {
  hmfg::Scale scale = hmfg::Scale::kFull;
  int jobs = int(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> only;
  try {
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (i + 1 >= argc) throw std::invalid_argument("missing value for " + a);
      const std::string v = argv[++i];
      if (a == "--scale") {
        scale = hmfg::parse_scale(v);
      } else if (a == "--jobs") {
        jobs = std::stoi(v);
      } else if (a == "--only") {
        std::stringstream ss(v);
        for (std::string tok; std::getline(ss, tok, ',');) only.push_back(std::stoi(tok));
      } else {
        throw std::invalid_argument("unknown option " + a);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
  if (const char* s = std::getenv("HMFG_ACCEPTANCE_SCALE")) scale = hmfg::parse_scale(s);

  std::cout << "acceptance scale=" << hmfg::to_string(scale) << " jobs=" << jobs << std::endl;
  int failed = 0;
  const auto results = hmfg::run_acceptance(scale, jobs, [&](const hmfg::CriterionResult& r) {
    std::cout << hmfg::format_line(r) << std::endl;
    if (!r.pass) ++failed;
  }, only);
  std::cout << results.size() - size_t(failed) << '/' << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
