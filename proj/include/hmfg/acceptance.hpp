#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace hmfg {

enum class Scale { kQuick, kFull };
Scale parse_scale(const std::string& s);
const char* to_string(Scale s);

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0;
  double budget_seconds = 0;  // runtime limit; 0 when none applies
  std::vector<std::pair<std::string, double>> metrics;
  std::string note;
};

// One line: "PASS [n] title  key=value ...  (time s / budget s)".
std::string format_line(const CriterionResult& r);

// Runs the criteria in order. Full scale uses the stated sizes and runtime limits; quick
// scale shrinks sample counts and grids and ignores the runtime limits.
std::vector<CriterionResult> run_acceptance(Scale scale, int jobs = 1,
                                            const std::function<void(const CriterionResult&)>& on_result = {},
                                            const std::vector<int>& only = {});

}  // namespace hmfg
