#include "spar/config.hpp"

#include <initializer_list>

namespace spar {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(path, "unknown key '" + it.key() + "'");
  }
}

const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& need(const json& obj, const std::string& path, const std::string& key) {
  const json* v = find(obj, key);
  if (!v) fail(path, "missing required key '" + key + "'");
  return *v;
}

double as_num(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double need_num(const json& obj, const std::string& path, const std::string& key) {
  return as_num(need(obj, path, key), path + "." + key);
}

double opt_num(const json& obj, const std::string& path, const std::string& key, double dflt) {
  const json* v = find(obj, key);
  return v ? as_num(*v, path + "." + key) : dflt;
}

std::int64_t as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::int64_t need_int(const json& obj, const std::string& path, const std::string& key) {
  return as_int(need(obj, path, key), path + "." + key);
}

std::int64_t opt_int(const json& obj, const std::string& path, const std::string& key,
                     std::int64_t dflt) {
  const json* v = find(obj, key);
  return v ? as_int(*v, path + "." + key) : dflt;
}

std::string need_str(const json& obj, const std::string& path, const std::string& key) {
  const json& v = need(obj, path, key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::string opt_str(const json& obj, const std::string& path, const std::string& key,
                    const std::string& dflt) {
  const json* v = find(obj, key);
  if (!v) return dflt;
  if (!v->is_string()) fail(path + "." + key, "expected a string");
  return v->get<std::string>();
}

bool opt_bool(const json& obj, const std::string& path, const std::string& key, bool dflt) {
  const json* v = find(obj, key);
  if (!v) return dflt;
  if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

Mat<double> as_matrix(const json& v, const std::string& path, int n) {
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    fail(path, "expected " + std::to_string(n) + " rows");
  Mat<double> m(n, n);
  for (int r = 0; r < n; ++r) {
    const json& row = v[r];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      fail(path + "[" + std::to_string(r) + "]", "expected " + std::to_string(n) + " entries");
    for (int c = 0; c < n; ++c)
      m(r, c) = as_num(row[c], path + "[" + std::to_string(r) + "]");
  }
  return m;
}

SystemConfig parse_system(const json& v, const std::string& path) {
  SystemConfig out;
  if (find(v, "builtin")) {
    check_keys(v, path, {"builtin", "params"});
    out.is_builtin = true;
    out.builtin_name = need_str(v, path, "builtin");
    if (!builtin_by_name(out.builtin_name))
      fail(path + ".builtin", "unknown system name '" + out.builtin_name + "'");
    const json& params = need(v, path, "params");
    if (!params.is_array()) fail(path + ".params", "expected an array");
    for (std::size_t i = 0; i < params.size(); ++i)
      out.params.push_back(as_num(params[i], path + ".params[" + std::to_string(i) + "]"));
    try {
      out.build();
    } catch (const std::invalid_argument& e) {
      fail(path, e.what());
    }
    return out;
  }
  check_keys(v, path, {"d", "N", "K", "a", "sigma", "b", "c", "nu", "bound"});
  out.is_builtin = false;
  const int d = static_cast<int>(need_int(v, path, "d"));
  const int N = static_cast<int>(need_int(v, path, "N"));
  const int K = static_cast<int>(need_int(v, path, "K"));
  if (d < 1 || N < 1 || K < 1) fail(path, "d, N, K must all be positive");
  auto sys = CoefficientSystem<double>::zero(d, N, K);
  sys.bound = opt_num(v, path, "bound", 100);
  auto grid_of = [&](const json& g, const std::string& gp, int rows, int cols,
                     BlockGrid<double>& dst) {
    if (!g.is_array() || static_cast<int>(g.size()) != rows)
      fail(gp, "expected " + std::to_string(rows) + " outer rows");
    for (int r = 0; r < rows; ++r) {
      const json& row = g[r];
      if (!row.is_array() || static_cast<int>(row.size()) != cols)
        fail(gp + "[" + std::to_string(r) + "]",
             "expected " + std::to_string(cols) + " blocks");
      for (int c = 0; c < cols; ++c)
        dst(r, c) = as_matrix(row[c], gp + "[" + std::to_string(r) + "][" + std::to_string(c) + "]",
                              N);
    }
  };
  grid_of(need(v, path, "a"), path + ".a", d, d, sys.a);
  grid_of(need(v, path, "sigma"), path + ".sigma", d, K, sys.sigma);
  if (const json* b = find(v, "b")) {
    if (!b->is_array() || static_cast<int>(b->size()) != d) fail(path + ".b", "expected d blocks");
    for (int i = 0; i < d; ++i)
      sys.b[i] = as_matrix((*b)[i], path + ".b[" + std::to_string(i) + "]", N);
  }
  if (const json* c = find(v, "c")) sys.c = as_matrix(*c, path + ".c", N);
  if (const json* nu = find(v, "nu")) {
    if (!nu->is_array() || static_cast<int>(nu->size()) != K)
      fail(path + ".nu", "expected K blocks");
    for (int k = 0; k < K; ++k)
      sys.nu[k] = as_matrix((*nu)[k], path + ".nu[" + std::to_string(k) + "]", N);
  }
  const auto check = validate(sys);
  if (!check.ok) fail(path, check.violations.front().detail);
  out.explicit_system = sys;
  return out;
}

CertifyConfig parse_certify(const json& v, const std::string& path) {
  check_keys(v, path, {"p", "lambda", "tol"});
  CertifyConfig out;
  out.p = need_num(v, path, "p");
  if (!(out.p >= 2)) fail(path + ".p", "p must be >= 2");
  out.lambda_mode = opt_str(v, path, "lambda", "optimize");
  if (out.lambda_mode != "zero" && out.lambda_mode != "sym" && out.lambda_mode != "optimize")
    fail(path + ".lambda", "expected zero, sym or optimize");
  out.tol = opt_num(v, path, "tol", 1e-9);
  if (!(out.tol > 0)) fail(path + ".tol", "tol must be positive");
  return out;
}

MomentConfig parse_moment(const json& v, const std::string& path) {
  check_keys(v, path, {"oracle", "x", "t", "p", "estimate"});
  MomentConfig out;
  out.oracle = need_str(v, path, "oracle");
  if (out.oracle != "line" && out.oracle != "torus")
    fail(path + ".oracle", "expected line or torus");
  out.x = opt_num(v, path, "x", 0);
  out.t = need_num(v, path, "t");
  if (!(out.t >= 0)) fail(path + ".t", "t must be >= 0");
  out.p = need_num(v, path, "p");
  if (!(out.p >= 2)) fail(path + ".p", "p must be >= 2");
  if (const json* est = find(v, "estimate")) {
    check_keys(*est, path + ".estimate", {"n_paths"});
    out.estimate = true;
    out.n_paths = need_int(*est, path + ".estimate", "n_paths");
    if (out.n_paths < 16) fail(path + ".estimate.n_paths", "at least 16 paths required");
  }
  return out;
}

GridConfig parse_grid(const json& v, const std::string& path) {
  check_keys(v, path, {"M", "L", "dt", "T", "scheme"});
  GridConfig out;
  out.M = static_cast<int>(need_int(v, path, "M"));
  if (out.M < 2 || out.M % 2 != 0) fail(path + ".M", "M must be even and >= 2");
  out.L = need_num(v, path, "L");
  if (!(out.L > 0)) fail(path + ".L", "L must be positive");
  out.dt = need_num(v, path, "dt");
  if (!(out.dt > 0)) fail(path + ".dt", "dt must be positive");
  out.T = need_num(v, path, "T");
  if (!(out.T >= out.dt)) fail(path + ".T", "T must be >= dt");
  out.scheme = opt_str(v, path, "scheme", "exponential_drift");
  if (out.scheme != "euler_maruyama" && out.scheme != "exponential_drift")
    fail(path + ".scheme", "expected euler_maruyama or exponential_drift");
  return out;
}

OutputConfig parse_output(const json& v, const std::string& path) {
  OutputConfig out;
  out.kind = need_str(v, path, "kind");
  if (out.kind == "pointwise_moment") {
    check_keys(v, path, {"kind", "x", "t", "p"});
    out.x = opt_num(v, path, "x", 0);
    out.t = need_num(v, path, "t");
    out.p = need_num(v, path, "p");
    if (!(out.p >= 2)) fail(path + ".p", "p must be >= 2");
  } else if (out.kind == "mixed_norm") {
    check_keys(v, path, {"kind", "p", "norm"});
    out.p = need_num(v, path, "p");
    if (!(out.p >= 2)) fail(path + ".p", "p must be >= 2");
    out.norm = opt_str(v, path, "norm", "linf_t_l2_x");
    if (out.norm != "linf_t_l2_x" && out.norm != "l2_t_l2_x")
      fail(path + ".norm", "expected linf_t_l2_x or l2_t_l2_x");
  } else if (out.kind == "energy_residual") {
    check_keys(v, path, {"kind"});
  } else {
    fail(path + ".kind", "expected pointwise_moment, mixed_norm or energy_residual");
  }
  return out;
}

SimulateConfig parse_simulate(const json& v, const std::string& path) {
  check_keys(v, path,
             {"grid", "init", "init_mode", "n_paths", "record_stride", "outputs", "states_out"});
  SimulateConfig out;
  out.grid = parse_grid(need(v, path, "grid"), path + ".grid");
  out.init = need_str(v, path, "init");
  if (out.init != "gaussian_line" && out.init != "mode_gaussian" && out.init != "single_mode")
    fail(path + ".init", "expected gaussian_line, mode_gaussian or single_mode");
  out.init_mode = static_cast<int>(opt_int(v, path, "init_mode", 1));
  out.n_paths = need_int(v, path, "n_paths");
  if (out.n_paths < 1) fail(path + ".n_paths", "at least one path required");
  out.record_stride = opt_int(v, path, "record_stride", 0);
  if (out.record_stride < 0) fail(path + ".record_stride", "record_stride must be >= 0");
  if (const json* outs = find(v, "outputs")) {
    if (!outs->is_array()) fail(path + ".outputs", "expected an array");
    for (std::size_t i = 0; i < outs->size(); ++i)
      out.outputs.push_back(
          parse_output((*outs)[i], path + ".outputs[" + std::to_string(i) + "]"));
  }
  out.states_out = opt_str(v, path, "states_out", "");
  return out;
}

SweepConfig parse_sweep(const json& v, const std::string& path) {
  check_keys(v, path, {"parameter", "values", "moment", "certify"});
  SweepConfig out;
  out.parameter = need_str(v, path, "parameter");
  if (out.parameter != "mu" && out.parameter != "lam" && out.parameter != "p" &&
      out.parameter != "t" && out.parameter != "x")
    fail(path + ".parameter", "expected mu, lam, p, t or x");
  const json& values = need(v, path, "values");
  if (!values.is_array() || values.empty()) fail(path + ".values", "expected a non-empty array");
  for (std::size_t i = 0; i < values.size(); ++i)
    out.values.push_back(as_num(values[i], path + ".values[" + std::to_string(i) + "]"));
  const bool has_moment = find(v, "moment") != nullptr;
  const bool has_certify = find(v, "certify") != nullptr;
  if (has_moment == has_certify)
    fail(path, "exactly one inner payload (moment or certify) required");
  if (has_moment) {
    out.inner = Command::moment;
    out.moment = parse_moment(need(v, path, "moment"), path + ".moment");
  } else {
    out.inner = Command::certify;
    out.certify = parse_certify(need(v, path, "certify"), path + ".certify");
  }
  return out;
}

NormsConfig parse_norms(const json& v, const std::string& path) {
  check_keys(v, path, {"simulate", "p", "delta", "m", "region"});
  NormsConfig out;
  out.simulate = parse_simulate(need(v, path, "simulate"), path + ".simulate");
  out.spec.p = need_num(v, path, "p");
  out.spec.delta = need_num(v, path, "delta");
  out.spec.m = static_cast<int>(opt_int(v, path, "m", 0));
  const auto check = validate(out.spec);
  if (!check.ok) fail(path, check.violations.front().detail);
  const json& region = need(v, path, "region");
  check_keys(region, path + ".region", {"x0", "x1", "t0", "t1", "space_time"});
  out.x0 = need_num(region, path + ".region", "x0");
  out.x1 = need_num(region, path + ".region", "x1");
  out.t0 = need_num(region, path + ".region", "t0");
  out.t1 = need_num(region, path + ".region", "t1");
  out.space_time = opt_bool(region, path + ".region", "space_time", false);
  if (!(out.x1 > out.x0)) fail(path + ".region", "x1 must exceed x0");
  if (!(out.t1 >= out.t0)) fail(path + ".region", "t1 must be >= t0");
  return out;
}

}  // namespace

CoefficientSystem<double> SystemConfig::build() const {
  if (is_builtin) return builtin<double>(builtin_name, params);
  return explicit_system;
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Recover line and column from the byte offset for the message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("config: syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col));
  }
  check_keys(doc, "top level",
             {"schema_version", "system", "certify", "moment", "simulate", "sweep", "norms",
              "seed", "threads"});
  ExperimentConfig cfg;
  cfg.schema_version = static_cast<int>(need_int(doc, "top level", "schema_version"));
  if (cfg.schema_version != 1) fail("schema_version", "only version 1 is supported");
  cfg.system = parse_system(need(doc, "top level", "system"), "system");

  int payloads = 0;
  if (find(doc, "certify")) {
    cfg.command = Command::certify;
    cfg.certify = parse_certify(doc["certify"], "certify");
    ++payloads;
  }
  if (find(doc, "moment")) {
    cfg.command = Command::moment;
    cfg.moment = parse_moment(doc["moment"], "moment");
    ++payloads;
  }
  if (find(doc, "simulate")) {
    cfg.command = Command::simulate;
    cfg.simulate = parse_simulate(doc["simulate"], "simulate");
    ++payloads;
  }
  if (find(doc, "sweep")) {
    cfg.command = Command::sweep;
    cfg.sweep = parse_sweep(doc["sweep"], "sweep");
    ++payloads;
  }
  if (find(doc, "norms")) {
    cfg.command = Command::norms;
    cfg.norms = parse_norms(doc["norms"], "norms");
    ++payloads;
  }
  if (payloads != 1) fail("top level", "exactly one command payload required");

  const std::int64_t seed = opt_int(doc, "top level", "seed", 0);
  if (seed < 0) fail("seed", "seed must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.threads = static_cast<int>(opt_int(doc, "top level", "threads", 1));
  if (cfg.threads < 1 || cfg.threads > 256) fail("threads", "threads must be in [1, 256]");
  cfg.echo = doc;
  return cfg;
}

}  // namespace spar
