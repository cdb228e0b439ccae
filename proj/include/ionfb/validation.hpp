#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ionfb {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationOptions {
  std::uint64_t seed = 20240611ULL;
  int threads = 0;
  std::vector<int> only;  // empty: all criteria
};

constexpr int kCriterionCount = 11;

CriterionResult run_criterion(int id, const ValidationOptions& opt);
std::vector<CriterionResult> run_validation(const ValidationOptions& opt, std::ostream* progress = nullptr);

/// One line per criterion followed by a summary line.
void print_report(std::ostream& out, const std::vector<CriterionResult>& results);
bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace ionfb
