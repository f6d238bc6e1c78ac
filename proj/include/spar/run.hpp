#pragma once

#include "spar/config.hpp"
#include "spar/report.hpp"

namespace spar {

// Exit statuses: 0 success, 1 config error, 2 sweep boundary regression
// (empirical classification contradicts the analytic threshold), 3 numeric
// failure.
struct RunResult {
  Report report;
  int exit_code = 0;
};

RunResult run(const ExperimentConfig& config);

// Full batch front end: flags, config load, dispatch, report write.
int run_cli(int argc, char** argv);

}  // namespace spar
