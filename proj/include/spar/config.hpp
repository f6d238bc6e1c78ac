#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spar/system.hpp"

namespace spar {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { certify, moment, simulate, sweep, norms };

inline const char* command_name(Command c) {
  switch (c) {
    case Command::certify: return "certify";
    case Command::moment: return "moment";
    case Command::simulate: return "simulate";
    case Command::sweep: return "sweep";
    case Command::norms: return "norms";
  }
  return "";
}

// System selection: a named builtin with parameters, or explicit tensors.
struct SystemConfig {
  bool is_builtin = true;
  std::string builtin_name;
  std::vector<double> params;
  CoefficientSystem<double> explicit_system;

  CoefficientSystem<double> build() const;
};

struct CertifyConfig {
  double p = 2;
  std::string lambda_mode = "optimize";  // zero | sym | optimize
  double tol = 1e-9;
};

struct MomentConfig {
  std::string oracle;  // line | torus
  double x = 0;
  double t = 0;
  double p = 2;
  bool estimate = false;       // add a Monte Carlo estimate from exact samples
  std::int64_t n_paths = 0;
};

struct GridConfig {
  int M = 2;
  double L = 0;
  double dt = 0;
  double T = 0;
  std::string scheme = "exponential_drift";
};

struct OutputConfig {
  std::string kind;  // pointwise_moment | mixed_norm | energy_residual
  double x = 0;
  double t = 0;
  double p = 2;
  std::string norm = "linf_t_l2_x";  // mixed_norm only
};

struct SimulateConfig {
  GridConfig grid;
  std::string init;  // gaussian_line | mode_gaussian | single_mode
  int init_mode = 1;
  std::int64_t n_paths = 1;
  std::int64_t record_stride = 0;
  std::vector<OutputConfig> outputs;
  std::string states_out;  // optional columnar dump path
};

struct SweepConfig {
  std::string parameter;  // mu | lam | p | t | x
  std::vector<double> values;
  Command inner = Command::moment;
  MomentConfig moment;
  CertifyConfig certify;
};

struct NormsConfig {
  SimulateConfig simulate;
  NormSpec spec;
  double x0 = 0, x1 = 0, t0 = 0, t1 = 0;
  bool space_time = false;
};

struct ExperimentConfig {
  int schema_version = 1;
  SystemConfig system;
  Command command = Command::certify;
  CertifyConfig certify;
  MomentConfig moment;
  SimulateConfig simulate;
  SweepConfig sweep;
  NormsConfig norms;
  std::uint64_t seed = 0;
  int threads = 1;
  nlohmann::json echo;  // the parsed document, for the report
};

// Strict parse: unknown keys, type mismatches and out-of-range values are
// ConfigError with the offending key path in the message.
ExperimentConfig parse_config(const std::string& text);

}  // namespace spar
