#include "spar/run.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spar/certify.hpp"
#include "spar/closed_form.hpp"
#include "spar/estimators.hpp"
#include "spar/spectral.hpp"
#include "spar/version.hpp"

namespace spar {

using nlohmann::json;

namespace {

json system_echo(const SystemConfig& sc) {
  json j;
  if (sc.is_builtin) {
    j["builtin"] = sc.builtin_name;
    j["params"] = sc.params;
  } else {
    j["d"] = sc.explicit_system.d;
    j["N"] = sc.explicit_system.N;
    j["K"] = sc.explicit_system.K;
  }
  return j;
}

json lambda_to_json(const LambdaTensor<double>& lam) {
  json out = json::array();
  for (int i = 0; i < lam.entries.outer_rows; ++i)
    for (int k = 0; k < lam.entries.outer_cols; ++k) {
      json blk;
      blk["i"] = i;
      blk["k"] = k;
      json rows = json::array();
      const auto& m = lam.entries(i, k);
      for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
      }
      blk["block"] = rows;
      out.push_back(blk);
    }
  return out;
}

json vec_to_json(const Vec<double>& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json report_to_json(const MomentReport& rep) {
  json j;
  j["estimate"] = rep.estimate;
  j["stderr"] = rep.stderr_;
  j["n_paths"] = rep.n_paths;
  j["diverged_fraction"] = rep.diverged_fraction;
  j["tail_slope"] = json_num(rep.tail_slope);
  j["rel_change"] = rep.rel_change;
  j["verdict"] = verdict_name(rep.verdict);
  return j;
}

json certificate_to_json(const Certificate<double>& cert) {
  json j;
  j["p"] = cert.p;
  j["method"] = method_name(cert.method);
  j["status"] = status_name(cert.status);
  j["margin"] = cert.margin;
  j["lambda"] = lambda_to_json(cert.lambda);
  j["witness"] = {{"xi", vec_to_json(cert.xi)}, {"eta", vec_to_json(cert.eta)}};
  if (!cert.note.empty()) j["note"] = cert.note;
  return j;
}

struct BuiltinParams {
  double lam = 0;
  double mu = 0;
};

BuiltinParams builtin_params(const SystemConfig& sc) {
  BuiltinParams out;
  const auto which = builtin_by_name(sc.builtin_name);
  if (which == BuiltinSystem::gradient_rotation) {
    out.mu = sc.params.at(0);
  } else {
    out.lam = sc.params.at(0);
    out.mu = sc.params.at(1);
  }
  return out;
}

// ---- certify -------------------------------------------------------------

json run_certify(const ExperimentConfig& cfg) {
  const auto sys = cfg.system.build();
  const auto& cc = cfg.certify;
  Certificate<double> cert;
  if (cc.lambda_mode == "zero")
    cert = certify(sys, cc.p, LambdaTensor<double>::zero(sys.d, sys.K, sys.N), cc.tol);
  else if (cc.lambda_mode == "sym")
    cert = certify(sys, cc.p, LambdaTensor<double>::sym_sigma(sys), cc.tol);
  else
    cert = best_correction(sys, cc.p, cc.tol);

  json results;
  results["command"] = "certify";
  results["system"] = system_echo(cfg.system);
  results["lambda_mode"] = cc.lambda_mode;
  results["tol"] = cc.tol;
  results["certificate"] = certificate_to_json(cert);
  const auto classical = classical_margins(sys);
  results["classical"] = {{"full", classical.full}, {"rank_one", classical.rank_one}};
  if (sys.d == 1) {
    const auto condition = condition_from_lambda(sys, cert.lambda);
    json blocks = json::array();
    for (int k = 0; k < sys.K; ++k) {
      json rows = json::array();
      for (int r = 0; r < sys.N; ++r) {
        json row = json::array();
        for (int c = 0; c < sys.N; ++c) row.push_back(condition[k](r, c));
        rows.push_back(row);
      }
      blocks.push_back(rows);
    }
    results["condition"] = blocks;
    if (sys.N == 2 && sys.K == 1) results["condition_offdiag"] = condition[0](0, 1);
  }
  return results;
}

// ---- moment --------------------------------------------------------------

std::vector<double> line_pow_p_samples(double x, double t, double mu, double p,
                                       std::int64_t n_paths, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(n_paths));
  const double sqrt_t = std::sqrt(t);
  for (std::int64_t pi = 0; pi < n_paths; ++pi) {
    const double w = sqrt_t * normal_at(seed, static_cast<std::uint64_t>(pi), 0, 0);
    out[static_cast<std::size_t>(pi)] = std::pow(std::abs(line_solution(x, t, mu, w)), p);
  }
  return out;
}

std::vector<double> torus_pow_p_samples(double t, double lam, double mu, double p,
                                        std::int64_t n_paths, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(n_paths));
  const double sqrt_t = std::sqrt(t);
  for (std::int64_t pi = 0; pi < n_paths; ++pi) {
    const double w = sqrt_t * normal_at(seed, static_cast<std::uint64_t>(pi), 0, 0);
    out[static_cast<std::size_t>(pi)] =
        std::pow(torus_l2_norm_sq(t, lam, mu, w), p / 2);
  }
  return out;
}

json moment_value_to_json(const MomentValue& mv) {
  json j;
  j["finite"] = mv.finite;
  j["value"] = mv.finite ? json_num(mv.value) : json(nullptr);
  if (mv.finite) j["log_value"] = json_num(mv.log_value);
  j["blowup_time"] = json_num(mv.blowup_time);
  if (mv.detail.nodes > 0 || mv.detail.n_max > 0)
    j["quadrature"] = {{"nodes", mv.detail.nodes},
                       {"n_max", mv.detail.n_max},
                       {"est_error", mv.detail.est_error}};
  return j;
}

// One oracle evaluation plus the optional exact-sample Monte Carlo check.
// mismatch is set when the empirical verdict contradicts the analytic
// finiteness classification.
json run_moment_inner(const SystemConfig& sc, const MomentConfig& mc, std::uint64_t seed,
                      bool* mismatch) {
  if (!sc.is_builtin)
    throw ConfigError("config: moment: a builtin system is required to name the oracle inputs");
  const auto family = builtin_by_name(sc.builtin_name);
  json results;
  results["command"] = "moment";
  results["system"] = system_echo(sc);
  results["oracle"] = mc.oracle;
  results["x"] = mc.x;
  results["t"] = mc.t;
  results["p"] = mc.p;
  MomentValue mv;
  const BuiltinParams bp = builtin_params(sc);
  if (mc.oracle == "line") {
    if (family != BuiltinSystem::gradient_rotation)
      throw ConfigError("config: moment: the line oracle requires the gradient_rotation system");
    mv = line_moment(mc.x, mc.t, bp.mu, mc.p);
  } else {
    if (family != BuiltinSystem::gradient_similarity)
      throw ConfigError(
          "config: moment: the torus oracle requires the gradient_similarity system");
    mv = torus_l2_moment(mc.t, bp.lam, bp.mu, mc.p);
  }
  results["analytic"] = moment_value_to_json(mv);
  if (mc.estimate) {
    const auto samples = mc.oracle == "line"
                             ? line_pow_p_samples(mc.x, mc.t, bp.mu, mc.p, mc.n_paths, seed)
                             : torus_pow_p_samples(mc.t, bp.lam, bp.mu, mc.p, mc.n_paths, seed);
    const auto rep = moment_report_from_samples(samples, mc.p);
    results["estimate"] = report_to_json(rep);
    if (mismatch) {
      const bool contradicts = (rep.verdict == Verdict::divergent && mv.finite) ||
                               (rep.verdict == Verdict::bounded && !mv.finite);
      *mismatch = contradicts;
    }
  } else if (mismatch) {
    *mismatch = false;
  }
  return results;
}

// ---- simulate ------------------------------------------------------------

Scheme scheme_from(const std::string& name) {
  return name == "euler_maruyama" ? Scheme::euler_maruyama : Scheme::exponential_drift;
}

GridSpec grid_from(const GridConfig& gc, int d) {
  GridSpec g;
  g.d = d;
  g.M = gc.M;
  g.L = gc.L;
  g.dt = gc.dt;
  g.T = gc.T;
  g.scheme = scheme_from(gc.scheme);
  return g;
}

void dump_states(const PathEnsemble& ens, std::uint64_t config_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open states file: " + path);
  char buf[256];
  std::snprintf(buf, sizeof buf, "# seed=%llu d=%d M=%d L=%.17g dt=%.17g T=%.17g system=%016llx\n",
                static_cast<unsigned long long>(ens.seed), ens.grid.d, ens.grid.M, ens.grid.L,
                ens.grid.dt, ens.grid.T, static_cast<unsigned long long>(config_hash));
  out << buf << "path,step,mode,component,re,im\n";
  for (std::size_t pi = 0; pi < ens.paths.size(); ++pi) {
    const auto& p = ens.paths[pi];
    for (std::size_t s = 0; s < p.states.size(); ++s)
      for (std::int64_t m = 0; m < p.states[s].rows(); ++m)
        for (std::int64_t c = 0; c < p.states[s].cols(); ++c) {
          std::snprintf(buf, sizeof buf, "%zu,%zu,%lld,%lld,%.17g,%.17g\n", pi, s,
                        static_cast<long long>(m), static_cast<long long>(c),
                        p.states[s](m, c).real(), p.states[s](m, c).imag());
          out << buf;
        }
  }
}

json run_simulate(const ExperimentConfig& cfg, std::uint64_t config_hash) {
  const auto sys = cfg.system.build();
  const auto& scfg = cfg.simulate;
  if (sys.d != 1 || sys.N != 2)
    throw ConfigError("config: simulate: initial data requires a one-dimensional two-component system");
  const GridSpec grid = grid_from(scfg.grid, sys.d);
  SpectralState init;
  if (scfg.init == "gaussian_line")
    init = init_gaussian_line(grid);
  else if (scfg.init == "mode_gaussian")
    init = init_mode_gaussian(grid);
  else
    init = init_single_mode(grid, scfg.init_mode);

  bool wants_residual = false;
  for (const auto& oc : scfg.outputs) wants_residual |= oc.kind == "energy_residual";

  SimulateOptions opts;
  opts.record_stride = wants_residual ? 1 : scfg.record_stride;
  opts.keep_increments = wants_residual;
  opts.threads = cfg.threads;
  const Forcing forcing;
  const auto ens = simulate(sys, forcing, init, grid, scfg.n_paths, RngSpec{cfg.seed}, opts);

  std::int64_t diverged = 0;
  for (const auto& p : ens.paths) diverged += p.diverged ? 1 : 0;

  json results;
  results["command"] = "simulate";
  results["system"] = system_echo(cfg.system);
  results["scheme"] = scfg.grid.scheme;
  results["n_paths"] = scfg.n_paths;
  results["n_steps"] = static_cast<std::int64_t>(std::llround(grid.T / grid.dt));
  results["stability_flag"] = ens.stability_flag;
  results["diverged_fraction"] =
      static_cast<double>(diverged) / static_cast<double>(scfg.n_paths);
  json outputs = json::array();
  for (const auto& oc : scfg.outputs) {
    json o;
    o["kind"] = oc.kind;
    if (oc.kind == "pointwise_moment") {
      Eigen::VectorXd x(1);
      x(0) = oc.x;
      o["x"] = oc.x;
      o["t"] = oc.t;
      o["p"] = oc.p;
      o["report"] = report_to_json(pointwise_moment(ens, x, oc.t, oc.p));
    } else if (oc.kind == "mixed_norm") {
      const MixedKind kind =
          oc.norm == "linf_t_l2_x" ? MixedKind::linf_t_l2_x : MixedKind::l2_t_l2_x;
      o["p"] = oc.p;
      o["norm"] = oc.norm;
      o["report"] = report_to_json(mixed_norm(ens, oc.p, kind));
    } else {
      double acc = 0;
      std::int64_t count = 0;
      for (const auto& p : ens.paths) {
        if (p.diverged) continue;
        for (double r : energy_residual(p, sys, forcing, grid)) {
          acc += std::abs(r);
          ++count;
        }
      }
      o["mean_abs_residual"] = count ? acc / static_cast<double>(count) : 0.0;
      o["steps_counted"] = count;
    }
    outputs.push_back(o);
  }
  results["outputs"] = outputs;
  if (!scfg.states_out.empty()) {
    dump_states(ens, config_hash, scfg.states_out);
    results["states_out"] = scfg.states_out;
  }
  return results;
}

// ---- norms ---------------------------------------------------------------

json run_norms(const ExperimentConfig& cfg) {
  const auto sys = cfg.system.build();
  const auto& nc = cfg.norms;
  if (sys.d != 1 || sys.N != 2)
    throw ConfigError("config: norms: a one-dimensional two-component system is required");
  const GridSpec grid = grid_from(nc.simulate.grid, sys.d);
  SpectralState init;
  if (nc.simulate.init == "gaussian_line")
    init = init_gaussian_line(grid);
  else if (nc.simulate.init == "mode_gaussian")
    init = init_mode_gaussian(grid);
  else
    init = init_single_mode(grid, nc.simulate.init_mode);
  SimulateOptions opts;
  opts.record_stride = nc.simulate.record_stride;
  opts.threads = cfg.threads;
  const auto ens =
      simulate(sys, Forcing{}, init, grid, nc.simulate.n_paths, RngSpec{cfg.seed}, opts);
  Region region;
  region.x0 = nc.x0;
  region.x1 = nc.x1;
  region.t0 = nc.t0;
  region.t1 = nc.t1;
  region.space_time = nc.space_time;
  const double value = holder_seminorm(ens, nc.spec, region);
  json results;
  results["command"] = "norms";
  results["system"] = system_echo(cfg.system);
  results["p"] = nc.spec.p;
  results["delta"] = nc.spec.delta;
  results["m"] = nc.spec.m;
  results["space_time"] = nc.space_time;
  results["holder_seminorm"] = value;
  return results;
}

// ---- sweep ---------------------------------------------------------------

void apply_parameter(SystemConfig& sc, MomentConfig& mc, CertifyConfig& cc, Command inner,
                     const std::string& param, double value) {
  if (param == "mu" || param == "lam") {
    if (!sc.is_builtin)
      throw ConfigError("config: sweep: parameter '" + param + "' needs a builtin system");
    const auto which = builtin_by_name(sc.builtin_name);
    if (which == BuiltinSystem::gradient_rotation) {
      if (param == "lam")
        throw ConfigError("config: sweep: gradient_rotation has no 'lam' parameter");
      sc.params.at(0) = value;
    } else {
      sc.params.at(param == "lam" ? 0 : 1) = value;
    }
    return;
  }
  if (param == "p") {
    if (inner == Command::moment)
      mc.p = value;
    else
      cc.p = value;
    return;
  }
  if (inner != Command::moment)
    throw ConfigError("config: sweep: parameter '" + param + "' applies to moment sweeps only");
  if (param == "t")
    mc.t = value;
  else
    mc.x = value;
}

json run_sweep(const ExperimentConfig& cfg, int* exit_code) {
  const auto& sw = cfg.sweep;
  json results;
  results["command"] = "sweep";
  results["parameter"] = sw.parameter;
  results["values"] = sw.values;
  json runs = json::array();
  bool any_mismatch = false;
  for (double value : sw.values) {
    SystemConfig sc = cfg.system;
    MomentConfig mc = sw.moment;
    CertifyConfig cc = sw.certify;
    apply_parameter(sc, mc, cc, sw.inner, sw.parameter, value);
    json inner;
    if (sw.inner == Command::moment) {
      bool mismatch = false;
      inner = run_moment_inner(sc, mc, cfg.seed, &mismatch);
      any_mismatch |= mismatch;
      inner["boundary_mismatch"] = mismatch;
    } else {
      ExperimentConfig sub = cfg;
      sub.system = sc;
      sub.certify = cc;
      inner = run_certify(sub);
    }
    inner["sweep_value"] = value;
    runs.push_back(inner);
  }
  results["runs"] = runs;
  results["boundary_consistent"] = !any_mismatch;
  if (any_mismatch && exit_code) *exit_code = 2;
  return results;
}

// ---- table ---------------------------------------------------------------

json certify_row(double sweep_value, bool with_axis, const json& results) {
  const json& cert = results.at("certificate");
  json row = json::array();
  if (with_axis) row.push_back(sweep_value);
  row.push_back(cert.at("method"));
  row.push_back(cert.at("margin"));
  row.push_back(cert.at("status"));
  row.push_back(cert.at("p"));
  return row;
}

json moment_row(bool with_axis, const json& results) {
  json row = json::array();
  if (with_axis) row.push_back(results.at("sweep_value"));
  row.push_back(results.at("oracle"));
  row.push_back(results.at("x"));
  row.push_back(results.at("t"));
  row.push_back(results.at("p"));
  const json& mv = results.at("analytic");
  row.push_back(mv.at("finite"));
  row.push_back(mv.at("value"));
  row.push_back(mv.at("blowup_time"));
  if (results.contains("estimate")) {
    const json& est = results.at("estimate");
    row.push_back(est.at("estimate"));
    row.push_back(est.at("stderr"));
    row.push_back(est.at("verdict"));
  }
  return row;
}

json build_table(const ExperimentConfig& cfg, const json& results) {
  json table;
  json columns = json::array();
  json rows = json::array();
  switch (cfg.command) {
    case Command::certify: {
      columns = {"method", "margin", "status", "p"};
      rows.push_back(certify_row(0, false, results));
      break;
    }
    case Command::moment: {
      columns = {"oracle", "x", "t", "p", "finite", "value", "blowup_time"};
      if (cfg.moment.estimate) {
        columns.push_back("estimate");
        columns.push_back("stderr");
        columns.push_back("verdict");
      }
      rows.push_back(moment_row(false, results));
      break;
    }
    case Command::simulate: {
      columns = {"kind", "value", "stderr", "verdict"};
      for (const auto& o : results.at("outputs")) {
        json row = json::array();
        row.push_back(o.at("kind"));
        if (o.contains("report")) {
          row.push_back(o.at("report").at("estimate"));
          row.push_back(o.at("report").at("stderr"));
          row.push_back(o.at("report").at("verdict"));
        } else {
          row.push_back(o.at("mean_abs_residual"));
          row.push_back(nullptr);
          row.push_back(nullptr);
        }
        rows.push_back(row);
      }
      break;
    }
    case Command::sweep: {
      columns.push_back(cfg.sweep.parameter);
      if (cfg.sweep.inner == Command::moment) {
        for (const char* c : {"oracle", "x", "t", "p", "finite", "value", "blowup_time"})
          columns.push_back(c);
        if (cfg.sweep.moment.estimate)
          for (const char* c : {"estimate", "stderr", "verdict"}) columns.push_back(c);
        for (const auto& r : results.at("runs")) rows.push_back(moment_row(true, r));
      } else {
        for (const char* c : {"method", "margin", "status", "p"}) columns.push_back(c);
        for (const auto& r : results.at("runs"))
          rows.push_back(certify_row(r.at("sweep_value").get<double>(), true, r));
      }
      break;
    }
    case Command::norms: {
      columns = {"estimator", "value"};
      json row = json::array();
      row.push_back("holder_seminorm");
      row.push_back(results.at("holder_seminorm"));
      rows.push_back(row);
      break;
    }
  }
  table["columns"] = columns;
  table["rows"] = rows;
  return table;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const std::string canonical = cfg.echo.dump();
  const std::uint64_t hash = fnv1a64(canonical);
  int exit_code = 0;
  json results;
  switch (cfg.command) {
    case Command::certify: results = run_certify(cfg); break;
    case Command::moment: results = run_moment_inner(cfg.system, cfg.moment, cfg.seed, nullptr); break;
    case Command::simulate: results = run_simulate(cfg, hash); break;
    case Command::sweep: results = run_sweep(cfg, &exit_code); break;
    case Command::norms: results = run_norms(cfg); break;
  }
  RunResult out;
  out.exit_code = exit_code;
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx", static_cast<unsigned long long>(hash));
  out.report.doc["schema_version"] = 1;
  out.report.doc["tool_version"] = k_version;
  out.report.doc["config"] = cfg.echo;
  out.report.doc["config_hash"] = hash_hex;
  out.report.doc["seed"] = cfg.seed;
  out.report.doc["results"] = results;
  out.report.doc["table"] = build_table(cfg, results);
  const auto end = std::chrono::steady_clock::now();
  out.report.doc["timing_ms"] =
      std::chrono::duration_cast<std::chrono::microseconds>(end - start).count() / 1000.0;
  return out;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"certification and simulation toolkit for stochastic parabolic systems"};
  std::string config_path, out_path, format = "json";
  std::uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--out", out_path, "report destination (stdout when absent)");
  app.add_option("--format", format, "report format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (results unchanged)");
  app.add_flag("--verbose", verbose, "progress notes on stderr");
  app.set_version_flag("--version", k_version);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "config: cannot open " << config_path << "\n";
      return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_config(buf.str());
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (threads_opt->count() > 0) {
      if (threads < 1 || threads > 256) {
        std::cerr << "config: threads must be in [1, 256]\n";
        return 1;
      }
      cfg.threads = threads;
    }
    if (verbose)
      std::cerr << "running " << command_name(cfg.command) << " with seed " << cfg.seed << "\n";
    const RunResult result = run(cfg);
    write_report(result.report, format, out_path);
    if (verbose) std::cerr << "exit " << result.exit_code << "\n";
    return result.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace spar
