// Command-line front end: exact nested-coalescent simulation, gamma
// estimation, scaling experiments, and the statistical verification suites.
//
// Exit codes: 0 success, 2 configuration error, 3 non-convergence,
// 4 scaling assertion failure, 5 verification failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nkc/analysis.hpp"
#include "nkc/kingman.hpp"
#include "nkc/nested.hpp"
#include "nkc/parallel.hpp"
#include "nkc/rde.hpp"
#include "nkc/verify.hpp"

using nlohmann::json;

namespace {

constexpr double kFullScaleEventGuard = 2e7;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Relative outputs land under $NKC_OUT_DIR when it is set.
std::filesystem::path resolve_output(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* base = std::getenv("NKC_OUT_DIR")) {
    return std::filesystem::path(base) / p;
  }
  return p;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& body) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << body;
  }
  std::filesystem::rename(tmp, path);
}

struct ManifestWriter {
  json manifest;
  std::filesystem::path path;

  ManifestWriter(const std::string& command, const std::filesystem::path& manifest_path)
      : path(manifest_path) {
    manifest["command"] = command;
    manifest["version"] = NKC_VERSION;
    manifest["started_at"] = iso_utc_now();
    manifest["outputs"] = json::array();
  }
  void add_output(const std::filesystem::path& p) {
    manifest["outputs"].push_back(p.string());
  }
  void finish() {
    manifest["finished_at"] = iso_utc_now();
    write_file_atomic(path, manifest.dump(2) + "\n");
  }
};

json scaling_report_json(const nkc::ScalingReport& report) {
  json j;
  j["window"] = {{"t_lo", report.window.t_lo}, {"t_hi", report.window.t_hi}};
  j["grid_points"] = report.grid_points;
  j["slope"] = report.slope;
  j["intercept"] = report.intercept;
  j["r_squared"] = report.r_squared;
  j["target_slope"] = report.target_slope;
  j["degenerate"] = report.degenerate;
  j["max_abs_deviation"] = report.max_abs_deviation;
  j["level"] = report.level;
  json series = json::array();
  for (const auto& [t, dev] : report.deviation_series) series.push_back({t, dev});
  j["deviation_series"] = std::move(series);
  return j;
}

json gamma_estimate_json(const nkc::GammaEstimate& est) {
  return json{{"mean_lower", est.mean_lower}, {"mean_upper", est.mean_upper},
              {"stderr", est.std_error},      {"ci95_lo", est.ci95_lo},
              {"ci95_hi", est.ci95_hi},       {"depth", est.depth},
              {"replicates", est.replicates}, {"seed", est.seed}};
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  nkc::NestedConfig cfg;
  std::string out;
  std::string decimate = "geometric:1.02";
  double t_max = -1.0;
  bool to_absorption = false;
  bool full_scale = false;
};

int cmd_simulate(SimulateArgs& args) {
  if (args.to_absorption == (args.t_max >= 0.0)) {
    throw ConfigError("stop rule: pass exactly one of --t-max or --to-absorption");
  }
  args.cfg.stop = args.to_absorption ? nkc::StopRule::to_absorption()
                                     : nkc::StopRule::at_time(args.t_max);
  args.cfg.decimation = nkc::DecimationPolicy::parse(args.decimate);
  if (!(args.cfg.rate_c > 0.0)) throw ConfigError("rate-c: must be > 0");
  args.cfg.validate();
  const double events = static_cast<double>(args.cfg.species) * args.cfg.lineages +
                        args.cfg.species;
  if (events > kFullScaleEventGuard && !args.full_scale) {
    throw ConfigError("run exceeds the desk-scale event budget; pass --full-scale");
  }

  const auto out_path = resolve_output(args.out);
  ManifestWriter manifest("simulate", out_path.string() + ".manifest.json");
  manifest.manifest["config"] = {
      {"species", args.cfg.species},  {"lineages", args.cfg.lineages},
      {"rate_c", args.cfg.rate_c},    {"seed", args.cfg.seed},
      {"stream", args.cfg.stream},
      {"stop", args.to_absorption ? json("to-absorption") : json(args.t_max)},
      {"decimate", args.cfg.decimation.to_string()},
      {"out", out_path.string()}};
  manifest.manifest["seed"] = args.cfg.seed;

  const nkc::Trajectory traj = nkc::simulate_nested(args.cfg);
  traj.write_csv_file(out_path.string());
  manifest.add_output(out_path);
  manifest.finish();
  std::cerr << "simulate: " << traj.lineage_merges + traj.species_merges
            << " events, terminal S=" << traj.terminal().species
            << " N=" << traj.terminal().lineages << "\n";
  return 0;
}

// ------------------------------------------------------------ estimate-gamma

struct EstimateArgs {
  std::string method;
  int depth = 12;
  std::uint64_t replicates = 100000;
  std::uint64_t particles = 100000;
  double tol = 1e-3;
  int max_iter = 60;
  std::string init = "delta2";
  std::uint64_t seed = 1;
  unsigned workers = 1;
  bool full_scale = false;
  std::string out;
  std::string particles_out;
};

int cmd_estimate_gamma(EstimateArgs& args) {
  const auto out_path = resolve_output(args.out);
  ManifestWriter manifest("estimate-gamma", out_path.string() + ".manifest.json");
  json config{{"method", args.method}, {"seed", args.seed},
              {"workers", args.workers}, {"out", out_path.string()}};
  json result;
  int status = 0;

  if (args.method == "bounds") {
    const nkc::GammaBounds bounds = nkc::gamma_analytic_bounds();
    result = {{"lower", bounds.lower},
              {"upper", bounds.upper},
              {"residual", bounds.residual}};
  } else if (args.method == "sandwich") {
    if (args.replicates > 1000000 && !args.full_scale) {
      throw ConfigError("replicates above 1e6 need --full-scale");
    }
    if (args.depth < 0 || args.depth > 30) throw ConfigError("depth: must be in [0, 30]");
    config["depth"] = args.depth;
    config["replicates"] = args.replicates;
    const nkc::GammaEstimate est =
        nkc::estimate_gamma(args.depth, args.replicates, args.seed, args.workers);
    result = gamma_estimate_json(est);
  } else if (args.method == "rde") {
    if (args.particles < 1000) throw ConfigError("particles: must be >= 1000");
    if (!(args.tol > 0.0)) throw ConfigError("tol: must be > 0");
    if (args.max_iter < 1) throw ConfigError("max-iter: must be >= 1");
    nkc::FixedPointInit init;
    if (args.init == "delta2") {
      init = nkc::FixedPointInit::Delta2;
    } else if (args.init == "deltaInf") {
      init = nkc::FixedPointInit::DeltaInf;
    } else {
      throw ConfigError("init: expected delta2 or deltaInf");
    }
    config["particles"] = args.particles;
    config["tol"] = args.tol;
    config["max_iter"] = args.max_iter;
    config["init"] = args.init;
    nkc::RngStream rng(args.seed, 0);
    try {
      const nkc::FixedPointResult fp =
          nkc::iterate_to_fixed_point(args.particles, args.tol, args.max_iter, init, rng);
      result = {{"gamma_hat", fp.gamma_hat},
                {"iterations", fp.iterations},
                {"converged", fp.converged},
                {"plateaued", fp.plateaued},
                {"plateau_level", fp.plateau_level},
                {"distances", fp.distance_sequence},
                {"particles", args.particles},
                {"init", args.init},
                {"seed", args.seed}};
      if (!args.particles_out.empty()) {
        const auto cloud_path = resolve_output(args.particles_out);
        std::ofstream cloud(cloud_path, std::ios::binary);
        if (!cloud) throw std::runtime_error("cannot open " + cloud_path.string());
        cloud << "w\n";
        for (double w : fp.final_state.particles()) {
          cloud << nkc::format_double(w) << '\n';
        }
        manifest.add_output(cloud_path);
      }
    } catch (const nkc::NonConvergenceError& err) {
      result = {{"error", "non-convergence"},
                {"converged", false},
                {"distances", err.distance_sequence},
                {"particles", args.particles},
                {"init", args.init},
                {"seed", args.seed}};
      status = 3;
    }
  } else {
    throw ConfigError("method: expected sandwich, rde, or bounds");
  }

  manifest.manifest["config"] = std::move(config);
  manifest.manifest["seed"] = args.seed;
  write_file_atomic(out_path, result.dump(2) + "\n");
  manifest.add_output(out_path);
  manifest.finish();
  if (status == 3) std::cerr << "estimate-gamma: did not converge\n";
  return status;
}

// ----------------------------------------------------------------------- ltt

struct LttArgs {
  std::string config_path;
  std::string out_dir;
  double gamma_flag = -1.0;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  bool svg = false;
  bool full_scale = false;
};

struct CheckOutcome {
  std::string name;
  bool pass;
  std::string detail;
};

int cmd_ltt(LttArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw ConfigError("config: cannot open " + args.config_path);
  json config;
  try {
    in >> config;
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config: invalid JSON: ") + err.what());
  }
  if (!config.contains("sets") || !config["sets"].is_array() ||
      config["sets"].empty()) {
    throw ConfigError("config: needs a non-empty 'sets' array");
  }

  const auto out_dir = resolve_output(args.out_dir);
  std::filesystem::create_directories(out_dir);
  ManifestWriter manifest("ltt", out_dir / "manifest.json");
  manifest.manifest["seed"] = args.seed;
  manifest.manifest["config"] = config;
  manifest.manifest["config_path"] = args.config_path;
  manifest.manifest["workers"] = args.workers;

  // Reference gamma: flag > config > sandwich estimate computed on the fly.
  double gamma = args.gamma_flag;
  if (gamma <= 0.0 && config.contains("gamma") && config["gamma"].is_number()) {
    gamma = config["gamma"].get<double>();
  }
  if (gamma <= 0.0) {
    const nkc::GammaEstimate est = nkc::estimate_gamma(12, 100000, args.seed, args.workers);
    gamma = 0.5 * (est.mean_lower + est.mean_upper);
    std::cerr << "ltt: using sandwich gamma = " << gamma << "\n";
  }
  manifest.manifest["gamma"] = gamma;

  std::vector<CheckOutcome> outcomes;
  for (const json& set : config["sets"]) {
    nkc::NestedConfig cfg;
    const std::string name = set.value("name", std::string("set"));
    try {
      cfg.species = set.at("species").get<std::int64_t>();
      cfg.lineages = set.at("lineages").get<std::int64_t>();
      cfg.rate_c = set.at("rate_c").get<double>();
    } catch (const json::exception& err) {
      throw ConfigError("config: set '" + name + "': " + err.what());
    }
    const std::uint64_t n_seeds = set.value("seeds", std::uint64_t{1});
    cfg.seed = set.value("base_seed", args.seed);
    cfg.decimation = nkc::DecimationPolicy::parse(
        set.value("decimate", std::string("geometric:1.02")));
    if (set.value("to_absorption", false)) {
      cfg.stop = nkc::StopRule::to_absorption();
    } else if (set.contains("t_max")) {
      cfg.stop = nkc::StopRule::at_time(set["t_max"].get<double>());
    } else {
      throw ConfigError("config: set '" + name + "' needs t_max or to_absorption");
    }
    cfg.validate();
    const double events =
        static_cast<double>(cfg.species) * cfg.lineages + cfg.species;
    if (events > kFullScaleEventGuard && !args.full_scale) {
      throw ConfigError("config: set '" + name +
                        "' exceeds the desk-scale budget; pass --full-scale");
    }
    const int grid_points = set.value("grid_points", 40);

    const std::vector<nkc::Trajectory> trajs =
        nkc::parallel_map_indexed<nkc::Trajectory>(
            n_seeds, args.workers, [&](std::uint64_t r) {
              nkc::NestedConfig run = cfg;
              run.stream = r;
              return nkc::simulate_nested(run);
            });

    json report_json;
    report_json["name"] = name;
    report_json["gamma"] = gamma;
    report_json["seeds"] = n_seeds;

    for (const json& check : set.value("checks", json::array())) {
      const std::string type = check.at("type").get<std::string>();
      const std::string label = name + ":" + type;
      try {
        if (type == "theorem1" || type == "prop2") {
          const nkc::Window window{check.at("t_lo").get<double>(),
                                   check.at("t_hi").get<double>()};
          const double max_dev = check.value("max_abs_dev", 0.15);
          const nkc::ScalingReport report =
              type == "theorem1"
                  ? nkc::check_theorem1_multi(trajs, cfg.rate_c, gamma, window,
                                              grid_points)
                  : nkc::check_prop2_multi(trajs, cfg.species, window, grid_points);
          report_json[type] = scaling_report_json(report);
          outcomes.push_back({label, report.max_abs_deviation < max_dev,
                              "max|dev|=" + nkc::format_double(report.max_abs_deviation) +
                                  " limit=" + nkc::format_double(max_dev)});
          // plot data on the check grid
          std::vector<double> ts, ns, refs, devs;
          for (const auto& [t, dev] : report.deviation_series) {
            const double ref = type == "theorem1"
                                   ? 2.0 * gamma / (cfg.rate_c * t * t)
                                   : 2.0 * static_cast<double>(cfg.species) / t;
            ts.push_back(t);
            refs.push_back(ref);
            devs.push_back(dev);
            ns.push_back(ref * (1.0 + dev));
          }
          const auto csv = out_dir / (name + "_" + type + ".csv");
          nkc::write_plot_csv(csv.string(), ts, ns, refs, devs);
          manifest.add_output(csv);
        } else if (type == "two_phase") {
          const auto [early, late] = nkc::two_phase_detect_multi(trajs, cfg, grid_points);
          report_json["two_phase"] = {{"early", scaling_report_json(early)},
                                      {"late", scaling_report_json(late)}};
          const auto early_range = check.value("early_slope", std::vector<double>{-1.3, -0.7});
          const auto late_range = check.value("late_slope", std::vector<double>{-2.3, -1.7});
          const bool ok = early.slope >= early_range[0] && early.slope <= early_range[1] &&
                          late.slope >= late_range[0] && late.slope <= late_range[1];
          outcomes.push_back({label, ok,
                              "early=" + nkc::format_double(early.slope) +
                                  " late=" + nkc::format_double(late.slope)});
        } else {
          throw ConfigError("config: unknown check type '" + type + "'");
        }
      } catch (const nkc::InsufficientSeparationError& err) {
        throw ConfigError(std::string("config: ") + err.what());
      }
    }

    const auto report_path = out_dir / (name + "_report.json");
    write_file_atomic(report_path, report_json.dump(2) + "\n");
    manifest.add_output(report_path);

    if (args.svg) {
      // mean trajectory over the retained support, for a quick look
      double t_lo = trajs[0].terminal().t;
      for (const auto& p : trajs[0].points) {
        if (p.t > 0) {
          t_lo = p.t;
          break;
        }
      }
      double t_hi = trajs[0].terminal().t;
      for (const auto& traj : trajs) t_hi = std::min(t_hi, traj.terminal().t);
      if (t_lo < t_hi) {
        const auto grid = nkc::geometric_grid(t_lo, t_hi, 200);
        std::vector<double> mean_n(grid.size(), 0.0);
        for (std::size_t g = 0; g < grid.size(); ++g) {
          for (const auto& traj : trajs) mean_n[g] += traj.at_time(grid[g]).lineages;
          mean_n[g] /= static_cast<double>(trajs.size());
        }
        const auto svg_path = out_dir / (name + ".svg");
        nkc::write_loglog_svg(svg_path.string(), grid, mean_n, name);
        manifest.add_output(svg_path);
      }
    }
  }

  manifest.finish();
  bool all_pass = true;
  for (const CheckOutcome& outcome : outcomes) {
    std::cout << (outcome.pass ? "[pass] " : "[FAIL] ") << outcome.name << " "
              << outcome.detail << "\n";
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 4;
}

// -------------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  std::vector<nkc::PropertyResult> results;
  if (suite == "core" || suite == "all") {
    auto r = nkc::verify_core(seed);
    results.insert(results.end(), r.begin(), r.end());
  }
  if (suite == "nested" || suite == "all") {
    auto r = nkc::verify_nested(seed);
    results.insert(results.end(), r.begin(), r.end());
  }
  if (suite == "rde" || suite == "all") {
    auto r = nkc::verify_rde(seed);
    results.insert(results.end(), r.begin(), r.end());
  }
  if (results.empty()) throw ConfigError("suite: expected core, nested, rde, or all");

  bool all_pass = true;
  for (const auto& result : results) {
    std::cout << (result.pass ? "[pass] " : "[FAIL] ") << result.name;
    if (!result.detail.empty()) std::cout << "  (" << result.detail << ")";
    std::cout << "\n";
    all_pass = all_pass && result.pass;
  }
  return all_pass ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested Kingman coalescent toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NKC_VERSION);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Run one nested coalescent simulation");
  simulate->add_option("--species", sim.cfg.species, "Initial species count")->required();
  simulate->add_option("--lineages", sim.cfg.lineages, "Initial lineages per species")->required();
  simulate->add_option("--rate-c", sim.cfg.rate_c, "Species pair merge rate")->required();
  simulate->add_option("--seed", sim.cfg.seed, "RNG seed")->default_val(1);
  simulate->add_option("--stream", sim.cfg.stream, "RNG stream index")->default_val(0);
  simulate->add_option("--t-max", sim.t_max, "Stop at this time");
  simulate->add_flag("--to-absorption", sim.to_absorption, "Run until N = 1");
  simulate->add_option("--out", sim.out, "Trajectory CSV path")->required();
  simulate->add_option("--decimate", sim.decimate,
                       "all | geometric:<ratio> | every:<k>");
  simulate->add_flag("--full-scale", sim.full_scale, "Allow paper-scale runs");

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate-gamma", "Estimate the descent constant");
  estimate->add_option("--method", est.method, "sandwich | rde | bounds")->required();
  estimate->add_option("--depth", est.depth, "Sandwich tree depth")->default_val(12);
  estimate->add_option("--replicates", est.replicates, "Sandwich replicates")->default_val(100000);
  estimate->add_option("--particles", est.particles, "RDE particle count")->default_val(100000);
  estimate->add_option("--tol", est.tol, "RDE Wasserstein tolerance")->default_val(1e-3);
  estimate->add_option("--max-iter", est.max_iter, "RDE iteration cap")->default_val(60);
  estimate->add_option("--init", est.init, "RDE start: delta2 | deltaInf");
  estimate->add_option("--seed", est.seed, "RNG seed")->default_val(1);
  estimate->add_option("--workers", est.workers, "Worker threads")->default_val(1);
  estimate->add_option("--out", est.out, "Result JSON path")->required();
  estimate->add_option("--particles-out", est.particles_out,
                       "Optional particle cloud CSV (rde)");
  estimate->add_flag("--full-scale", est.full_scale, "Allow paper-scale runs");

  LttArgs ltt;
  CLI::App* ltt_cmd = app.add_subcommand("ltt", "Lineages-through-time scaling experiments");
  ltt_cmd->add_option("--config", ltt.config_path, "Experiment config JSON")->required();
  ltt_cmd->add_option("--out-dir", ltt.out_dir, "Output directory")->required();
  ltt_cmd->add_option("--gamma", ltt.gamma_flag, "Reference gamma (default: sandwich)");
  ltt_cmd->add_option("--seed", ltt.seed, "RNG seed")->default_val(1);
  ltt_cmd->add_option("--workers", ltt.workers, "Worker threads")->default_val(1);
  ltt_cmd->add_flag("--svg", ltt.svg, "Emit log-log SVG plots");
  ltt_cmd->add_flag("--full-scale", ltt.full_scale, "Allow paper-scale runs");

  std::string verify_suite;
  std::uint64_t verify_seed = 1;
  CLI::App* verify = app.add_subcommand("verify", "Run statistical property suites");
  verify->add_option("--suite", verify_suite, "core | nested | rde | all")->required();
  verify->add_option("--seed", verify_seed, "RNG seed")->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (estimate->parsed()) return cmd_estimate_gamma(est);
    if (ltt_cmd->parsed()) return cmd_ltt(ltt);
    if (verify->parsed()) return cmd_verify(verify_suite, verify_seed);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
