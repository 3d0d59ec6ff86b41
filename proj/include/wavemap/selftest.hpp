#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace wavemap {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Suite {
  int id = 0;
  std::string name;
  std::string title;
  std::function<CriterionResult()> run;
};

/// The acceptance criteria as named suites, in order.
const std::vector<Suite>& suites();

/// Runs every suite whose name contains `filter` (all when empty), printing
/// one PASS/FAIL line per suite as it finishes.
std::vector<CriterionResult> run_suites(const std::string& filter, std::ostream& os);

}  // namespace wavemap
