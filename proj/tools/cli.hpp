#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ionfb/moments.hpp"
#include "ionfb/params.hpp"

namespace ionfb::cli {

/// Fully resolved inputs: defaults, then the config file, then flags.
struct RunConfig {
  std::string subcommand;
  std::string out_dir = ".";
  std::uint64_t seed = 20240611ULL;
  ModelRates rates = ModelRates::from_collection(0.1, 0.01, 15.0, 0.4);
  FeedbackConfig feedback;
  int n_max = 0;  // 0: derived from N
  double dt = 0.0;
  double t_final = 0.0;
  int ensemble = 0;
  Warnings warnings;
};

/// Returns 0 on success, 1 on failed validation or computation, 2 on
/// configuration errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ionfb::cli
