// Command-line front end: simulation, estimation solves, turnpike scans and
// performance comparisons, with CSV/JSON outputs per run directory.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mhe/estimators.hpp"
#include "mhe/io.hpp"
#include "mhe/performance.hpp"
#include "mhe/turnpike_analysis.hpp"

namespace fs = std::filesystem;
using namespace mhe;

namespace {

constexpr const char* kVersion = "mhelab 0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string scenario = "batch_reactor";
  std::optional<int> T;
  std::uint64_t seed = 1;
  fs::path out = "out";
  int parallel = 1;
  bool cache = true;
  double scale = 1.0;
  ToleranceConfig tol;
  std::optional<io::json> weights_json;
  std::vector<int> horizons;
  std::vector<int> taus;
  double epsilon = 0.5;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) vals.push_back(std::stod(item));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = vals[i];
  return v;
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
  const io::json j = io::read_json(path);
  if (j.contains("scenario")) cfg.scenario = j.at("scenario").get<std::string>();
  if (j.contains("T")) cfg.T = j.at("T").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (j.contains("parallel")) cfg.parallel = j.at("parallel").get<int>();
  if (j.contains("cache")) cfg.cache = j.at("cache").get<bool>();
  if (j.contains("scale")) cfg.scale = j.at("scale").get<double>();
  if (j.contains("weights")) cfg.weights_json = j.at("weights");
  if (j.contains("horizons")) cfg.horizons = j.at("horizons").get<std::vector<int>>();
  if (j.contains("taus")) cfg.taus = j.at("taus").get<std::vector<int>>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    cfg.tol.tol_kkt = t.value("tol_kkt", cfg.tol.tol_kkt);
    cfg.tol.tol_feas = t.value("tol_feas", cfg.tol.tol_feas);
    cfg.tol.max_iter = t.value("max_iter", cfg.tol.max_iter);
  }
}

Scenario resolve_scenario(const RunConfig& cfg) {
  Scenario sc;
  if (cfg.scenario == "mot_integrator") {
    sc = motivating_scenario(cfg.T.value_or(70), cfg.seed);
  } else if (cfg.scenario == "batch_reactor") {
    sc = batch_reactor_scenario(cfg.T.value_or(400), cfg.seed);
  } else if (fs::exists(cfg.scenario)) {
    sc = io::scenario_from_json(io::read_json(cfg.scenario));
    if (cfg.T) sc.T = *cfg.T;
  } else {
    throw ConfigError("unknown scenario: " + cfg.scenario);
  }
  if (cfg.scale != 1.0) {
    if (cfg.scale <= 0.0) throw ConfigError("scale must be positive");
    sc.T = std::max(1, static_cast<int>(std::lround(sc.T * cfg.scale)));
  }
  sc.seed = cfg.seed;
  return sc;
}

CostWeights resolve_weights(const RunConfig& cfg, const SystemModel& model) {
  if (cfg.weights_json) return io::weights_from_json(*cfg.weights_json);
  return make_cost_weights(Eigen::MatrixXd::Identity(model.q, model.q),
                           Eigen::MatrixXd::Identity(model.p, model.p),
                           Eigen::MatrixXd::Identity(model.p, model.p));
}

struct Workbench {
  Scenario scenario;
  SimulationResult sim;
  ProblemSetup setup;
  std::unique_ptr<WindowCache> cache;
  WindowCache* cache_ptr = nullptr;
};

Workbench make_workbench(const RunConfig& cfg) {
  Workbench wb;
  wb.scenario = resolve_scenario(cfg);
  wb.sim = simulate(wb.scenario, cfg.seed);
  wb.setup = ProblemSetup{wb.scenario.model, wb.scenario.sets,
                          resolve_weights(cfg, wb.scenario.model)};
  if (cfg.cache) {
    wb.cache = std::make_unique<WindowCache>();
    wb.cache_ptr = wb.cache.get();
  }
  return wb;
}

io::json config_echo(const RunConfig& cfg, const Scenario& sc) {
  io::json j;
  j["scenario"] = cfg.scenario;
  j["T"] = sc.T;
  j["seed"] = cfg.seed;
  j["parallel"] = cfg.parallel;
  j["cache"] = cfg.cache;
  j["scale"] = cfg.scale;
  j["tolerances"] = {{"tol_kkt", cfg.tol.tol_kkt},
                     {"tol_feas", cfg.tol.tol_feas},
                     {"max_iter", cfg.tol.max_iter}};
  j["epsilon"] = cfg.epsilon;
  return j;
}

void write_manifest(const RunConfig& cfg, const Scenario& sc, const std::string& command,
                    double wall_seconds) {
  io::json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config"] = config_echo(cfg, sc);
  j["wall_seconds"] = wall_seconds;
  j["timestamp"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  io::write_json(cfg.out / "manifest.json", j);
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::pair<int, int>> fie_sources(int T) {
  std::vector<std::pair<int, int>> s;
  for (int j = 0; j <= T; ++j) s.emplace_back(0, j);
  return s;
}

// Gap profiles of every window the approximate estimator uses at this N.
std::vector<GapProfile> window_profiles(Workbench& wb, int N, const SolveReport& fie,
                                        const ToleranceConfig& tol, int parallel) {
  const int T = wb.sim.data.horizon();
  std::vector<WindowSolution> windows(T - N + 1);
  parallel_for_ordered(T - N + 1, parallel, [&](int i) {
    windows[i] = solve_window(wb.sim.data, i, N, wb.setup, tol, wb.cache_ptr);
  });
  std::vector<GapProfile> profiles;
  profiles.reserve(windows.size());
  for (const auto& win : windows) profiles.push_back(gap_profile(win, fie));
  return profiles;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc = resolve_scenario(cfg);
  const SimulationResult sim = simulate(sc, cfg.seed);
  fs::create_directories(cfg.out);
  io::write_data_csv(cfg.out / "data.csv", sim.data);
  io::write_truth_csv(cfg.out / "truth.csv", sim.states, sim.disturbances);
  io::write_json(cfg.out / "scenario.json", io::scenario_to_json(sc));
  write_manifest(cfg, sc, "simulate", seconds_since(start));
  return kExitOk;
}

int cmd_solve_fie(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  const SolveReport fie = fie_reference(wb.sim.data, wb.setup, cfg.tol, wb.cache_ptr);
  fs::create_directories(cfg.out);
  io::write_trajectory_csv(cfg.out / "fie.csv", fie.trajectory.x, fie.trajectory.w,
                           fie_sources(wb.scenario.T));
  io::write_json(cfg.out / "fie_report.json", io::report_to_json(fie));
  write_manifest(cfg, wb.scenario, "solve-fie", seconds_since(start));
  return fie.status == SolveStatus::converged ? kExitOk : kExitSolver;
}

int cmd_solve_window(const RunConfig& cfg, int tau, int N, const std::string& pin_init,
                     const std::string& pin_term) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  if (tau < 0 || N < 0 || tau + N > wb.scenario.T)
    throw ConfigError("window outside the data range");

  SolveReport report;
  if (pin_init.empty() && pin_term.empty()) {
    report = solve_window(wb.sim.data, tau, N, wb.setup, cfg.tol, wb.cache_ptr).report;
  } else {
    ProblemSpec spec{wb.sim.data.slice(tau, N), wb.setup.model, wb.setup.sets, wb.setup.weights,
                     std::nullopt, std::nullopt, tau};
    if (!pin_init.empty()) spec.pin_initial = parse_vector(pin_init);
    if (!pin_term.empty()) spec.pin_terminal = parse_vector(pin_term);
    report = solve(spec, cfg.tol);
  }
  fs::create_directories(cfg.out);
  const std::string stem = "window_t" + std::to_string(tau) + "_N" + std::to_string(N);
  std::vector<std::pair<int, int>> sources;
  for (int j = 0; j <= N; ++j) sources.emplace_back(tau, j);
  io::write_trajectory_csv(cfg.out / (stem + ".csv"), report.trajectory.x, report.trajectory.w,
                           sources);
  io::write_json(cfg.out / (stem + "_report.json"), io::report_to_json(report));
  write_manifest(cfg, wb.scenario, "solve-window", seconds_since(start));
  return report.status == SolveStatus::converged ? kExitOk : kExitSolver;
}

int cmd_approx(const RunConfig& cfg, int N) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  const ApproxEstimate ae = approximate_estimator(wb.sim.data, N, wb.setup, cfg.tol,
                                                  cfg.parallel > 1, cfg.parallel, wb.cache_ptr);
  fs::create_directories(cfg.out);
  io::write_trajectory_csv(cfg.out / ("approx_N" + std::to_string(N) + ".csv"), ae.x_ae, ae.w_ae,
                           ae.windows_used);
  write_manifest(cfg, wb.scenario, "approx", seconds_since(start));
  return kExitOk;
}

int cmd_mhe(const RunConfig& cfg, int N) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  const MheResult mhe = mhe_sequence(wb.sim.data, N, wb.setup, cfg.tol, wb.cache_ptr);
  fs::create_directories(cfg.out);
  std::vector<std::pair<int, int>> sources;
  for (int t = 0; t <= wb.scenario.T; ++t)
    sources.emplace_back(std::max(0, t - N), std::min(t, N));
  io::write_trajectory_csv(cfg.out / ("mhe_N" + std::to_string(N) + ".csv"), mhe.x_mhe, mhe.w_mhe,
                           sources);
  write_manifest(cfg, wb.scenario, "mhe", seconds_since(start));
  return kExitOk;
}

int cmd_turnpike_scan(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  const int T = wb.scenario.T;
  const SolveReport fie = fie_reference(wb.sim.data, wb.setup, cfg.tol, wb.cache_ptr);
  if (fie.status != SolveStatus::converged) throw std::runtime_error("reference solve failed");

  const std::vector<int> horizons =
      cfg.horizons.empty() ? std::vector<int>{5, 10, 15, 20} : cfg.horizons;
  fs::create_directories(cfg.out);
  std::vector<GapProfile> profiles;
  io::json cells = io::json::array();
  io::json envelopes;
  for (int N : horizons) {
    if (N > T) continue;
    std::vector<int> taus = cfg.taus.empty() ? std::vector<int>{0, 10, 25, 45, -1} : cfg.taus;
    for (int& tau : taus)
      if (tau < 0) tau = T - N;  // -1 selects the right-boundary window
    std::set<int> unique_taus;
    for (int tau : taus)
      if (tau >= 0 && tau + N <= T) unique_taus.insert(tau);

    std::vector<GapProfile> per_n;
    for (int tau : unique_taus) {
      io::json cell{{"tau", tau}, {"N", N}};
      try {
        const WindowSolution win =
            solve_window(wb.sim.data, tau, N, wb.setup, cfg.tol, wb.cache_ptr);
        cell["status"] = io::status_name(win.report.status);
        if (win.report.status != SolveStatus::infeasible) {
          per_n.push_back(gap_profile(win, fie));
          profiles.push_back(per_n.back());
        }
      } catch (const std::exception& e) {
        cell["status"] = std::string("error: ") + e.what();
      }
      cells.push_back(cell);
    }
    if (per_n.size() >= 2 && N >= 4)
      envelopes["N" + std::to_string(N)] = io::fit_to_json(fit_envelope(per_n));
  }
  io::write_profiles_csv(cfg.out / "profiles.csv", profiles);
  std::vector<GapProfile> fittable;
  for (const auto& p : profiles)
    if (p.N >= 4) fittable.push_back(p);
  if (fittable.size() >= 2) envelopes["overall"] = io::fit_to_json(fit_envelope(fittable));
  envelopes["cells"] = cells;
  io::write_json(cfg.out / "envelopes.json", envelopes);
  write_manifest(cfg, wb.scenario, "turnpike-scan", seconds_since(start));
  return kExitOk;
}

int cmd_sensitivity_probe(const RunConfig& cfg, int tau, int N, const std::string& perturb_init,
                          const std::string& perturb_term) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  if (tau < 0 || N < 1 || tau + N > wb.scenario.T)
    throw ConfigError("probe window outside the data range");
  const SolveReport fie = fie_reference(wb.sim.data, wb.setup, cfg.tol, wb.cache_ptr);
  const Eigen::VectorXd xi = fie.trajectory.x.col(tau);
  const Eigen::VectorXd xt = fie.trajectory.x.col(tau + N);
  Eigen::VectorXd di = Eigen::VectorXd::Zero(wb.setup.model.n);
  Eigen::VectorXd dt = Eigen::VectorXd::Zero(wb.setup.model.n);
  if (!perturb_init.empty()) di = parse_vector(perturb_init);
  if (!perturb_term.empty()) dt = parse_vector(perturb_term);
  if (di.size() != wb.setup.model.n || dt.size() != wb.setup.model.n)
    throw ConfigError("perturbation dimension mismatch");

  const SensitivityProbe probe = sensitivity_probe(wb.sim.data.slice(tau, N), N, xi, xt, xi + di,
                                                   xt + dt, wb.setup, cfg.tol);
  fs::create_directories(cfg.out);
  {
    std::ofstream out(cfg.out / "probe.csv");
    if (!out) throw std::runtime_error("cannot open probe.csv");
    out << "j,difference\n";
    for (int j = 0; j <= N; ++j)
      out << j << ',' << io::format_double(probe.differences[j]) << "\n";
  }
  io::json pj;
  pj["tau"] = tau;
  pj["N"] = N;
  pj["pin_distance_initial"] = di.norm();
  pj["pin_distance_terminal"] = dt.norm();
  pj["fit"] = io::fit_to_json(probe.fit);
  io::write_json(cfg.out / "probe.json", pj);
  write_manifest(cfg, wb.scenario, "sensitivity-probe", seconds_since(start));
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  if (!wb.setup.model.additive) throw ConfigError("compare requires an additive model");
  const int T = wb.scenario.T;
  const std::vector<int> horizons =
      cfg.horizons.empty() ? std::vector<int>{40, 70, 100, 130, 160} : cfg.horizons;

  const SolveReport fie = fie_reference(wb.sim.data, wb.setup, cfg.tol, wb.cache_ptr);
  if (fie.status != SolveStatus::converged) throw std::runtime_error("reference solve failed");
  fs::create_directories(cfg.out);
  io::write_trajectory_csv(cfg.out / "fie.csv", fie.trajectory.x, fie.trajectory.w,
                           fie_sources(T));
  const double sne_fie = sum_normed_errors(fie.trajectory.x, wb.sim.states);

  std::vector<io::SummaryRow> rows;
  for (int N : horizons) {
    io::SummaryRow row;
    row.N = N;
    row.V_T = fie.objective;
    row.sne_fie = sne_fie;
    if (N > T || N % 2 != 0 || N < 1) {
      row.status = "skipped";
      rows.push_back(row);
      continue;
    }
    try {
      const ApproxEstimate ae = approximate_estimator(
          wb.sim.data, N, wb.setup, cfg.tol, cfg.parallel > 1, cfg.parallel, wb.cache_ptr);
      const MheResult mhe = mhe_sequence(wb.sim.data, N, wb.setup, cfg.tol, wb.cache_ptr);
      io::write_trajectory_csv(cfg.out / ("approx_N" + std::to_string(N) + ".csv"), ae.x_ae,
                               ae.w_ae, ae.windows_used);
      std::vector<std::pair<int, int>> mhe_sources;
      for (int t = 0; t <= T; ++t) mhe_sources.emplace_back(std::max(0, t - N), std::min(t, N));
      io::write_trajectory_csv(cfg.out / ("mhe_N" + std::to_string(N) + ".csv"), mhe.x_mhe,
                               mhe.w_mhe, mhe_sources);

      const PerfReport perf_ae = perf_report(ae.trajectory(), fie, wb.sim.data, wb.setup.weights,
                                             wb.setup.model, &wb.sim.states);
      const PerfReport perf_mhe = perf_report(mhe.trajectory(), fie, wb.sim.data,
                                              wb.setup.weights, wb.setup.model, &wb.sim.states);
      row.J_ae = perf_ae.J_candidate;
      row.J_mhe = perf_mhe.J_candidate;
      row.gap_ae = perf_ae.gap;
      row.gap_mhe = perf_mhe.gap;
      row.sne_ae = perf_ae.sne.value();
      row.sne_mhe = perf_mhe.sne.value();
      const std::vector<GapProfile> profiles = window_profiles(wb, N, fie, cfg.tol, cfg.parallel);
      const EnvelopeFit envelope = fit_envelope(profiles);
      row.bound = theorem_bound(cfg.epsilon, N, T, envelope, wb.setup.model.L_f,
                                wb.setup.model.L_h, wb.setup.weights, fie.objective);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows.push_back(row);
  }
  io::write_summary_csv(cfg.out / "summary.csv", rows);
  write_manifest(cfg, wb.scenario, "compare", seconds_since(start));
  return kExitOk;
}

int cmd_perf_report(const RunConfig& cfg, const std::string& candidate_path,
                    const std::string& truth_path) {
  const auto start = std::chrono::steady_clock::now();
  Workbench wb = make_workbench(cfg);
  const SolveReport fie = fie_reference(wb.sim.data, wb.setup, cfg.tol, wb.cache_ptr);

  // Candidate trajectory from an estimator CSV written by this tool.
  EstimateTrajectory cand;
  {
    const int n = wb.setup.model.n, q = wb.setup.model.q, T = wb.scenario.T;
    std::ifstream in(candidate_path);
    if (!in) throw std::runtime_error("cannot open candidate: " + candidate_path);
    std::string line;
    std::getline(in, line);
    cand.x.resize(n, T + 1);
    cand.w = Eigen::MatrixXd::Zero(q, T);
    int row = 0;
    while (std::getline(in, line) && row <= T) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string item;
      std::vector<std::string> fields;
      while (std::getline(ss, item, ',')) fields.push_back(item);
      if (static_cast<int>(fields.size()) < 1 + n + q)
        throw std::runtime_error("candidate row too short");
      for (int i = 0; i < n; ++i) cand.x(i, row) = std::stod(fields[1 + i]);
      if (row < T)
        for (int i = 0; i < q; ++i)
          if (!fields[1 + n + i].empty()) cand.w(i, row) = std::stod(fields[1 + n + i]);
      ++row;
    }
    if (row != T + 1) throw std::runtime_error("candidate has the wrong horizon");
  }

  std::optional<Eigen::MatrixXd> truth;
  if (!truth_path.empty()) truth = io::read_truth_states(truth_path, wb.setup.model.n);
  const PerfReport rep = perf_report(cand, fie, wb.sim.data, wb.setup.weights, wb.setup.model,
                                     truth ? &*truth : nullptr);
  fs::create_directories(cfg.out);
  io::write_json(cfg.out / "perf_report.json", io::perf_to_json(rep));
  write_manifest(cfg, wb.scenario, "perf-report", seconds_since(start));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-estimation workbench: full-information, windowed and "
               "moving-horizon solves with turnpike diagnostics"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::string horizons_text, taus_text;
  int t_flag = -1;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--scenario", cfg.scenario, "built-in name or scenario JSON path");
  app.add_option("--T", t_flag, "horizon override");
  app.add_option("--seed", cfg.seed, "simulation seed");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--parallel", cfg.parallel, "worker threads for window solves");
  app.add_flag("--no-cache", "disable the window-solve cache");
  app.add_option("--scale", cfg.scale, "horizon scale factor for desk-size runs");
  app.add_option("--tol-kkt", cfg.tol.tol_kkt, "optimality tolerance");
  app.add_option("--tol-feas", cfg.tol.tol_feas, "feasibility tolerance");
  app.add_option("--max-iter", cfg.tol.max_iter, "iteration budget");
  app.add_option("--horizons", horizons_text, "comma-separated N values");
  app.add_option("--taus", taus_text, "comma-separated window starts (-1 = T-N)");
  app.add_option("--epsilon", cfg.epsilon, "epsilon in the performance bound");

  auto* sim_cmd = app.add_subcommand("simulate", "roll out the scenario, write data/truth CSVs");
  auto* fie_cmd = app.add_subcommand("solve-fie", "solve the full-information problem");
  auto* win_cmd =
      app.add_subcommand("solve-window", "solve one truncated (optionally pinned) problem");
  int win_tau = 0, win_N = 0;
  std::string pin_init, pin_term;
  win_cmd->add_option("--tau", win_tau, "window start")->required();
  win_cmd->add_option("--N", win_N, "window length")->required();
  win_cmd->add_option("--pin-init", pin_init, "pinned initial state, comma-separated");
  win_cmd->add_option("--pin-term", pin_term, "pinned terminal state, comma-separated");
  auto* approx_cmd = app.add_subcommand("approx", "build the parallel approximate estimator");
  int approx_N = 0;
  approx_cmd->add_option("--N", approx_N, "window length (even)")->required();
  auto* mhe_cmd = app.add_subcommand("mhe", "build the moving-horizon sequence");
  int mhe_N = 0;
  mhe_cmd->add_option("--N", mhe_N, "window length")->required();
  auto* scan_cmd =
      app.add_subcommand("turnpike-scan", "gap profiles and envelope fits over a grid");
  auto* probe_cmd =
      app.add_subcommand("sensitivity-probe", "pinned-endpoint sensitivity experiment");
  int probe_tau = 0, probe_N = 0;
  std::string perturb_init, perturb_term;
  probe_cmd->add_option("--tau", probe_tau, "window start")->required();
  probe_cmd->add_option("--N", probe_N, "window length")->required();
  probe_cmd->add_option("--perturb-init", perturb_init, "initial-pin perturbation");
  probe_cmd->add_option("--perturb-term", perturb_term, "terminal-pin perturbation");
  auto* compare_cmd = app.add_subcommand("compare", "FIE vs approximate estimator vs MHE per N");
  auto* perf_cmd = app.add_subcommand("perf-report", "performance report for a candidate CSV");
  std::string candidate_path, truth_path;
  perf_cmd->add_option("--candidate", candidate_path, "estimator CSV")->required();
  perf_cmd->add_option("--truth", truth_path, "ground-truth CSV for the SNE");

  for (CLI::App* sub : {sim_cmd, fie_cmd, win_cmd, approx_cmd, mhe_cmd, scan_cmd, probe_cmd,
                        compare_cmd, perf_cmd})
    sub->fallthrough(true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    // Flags win over the config file.
    if (t_flag >= 0) cfg.T = t_flag;
    if (app.count("--no-cache") > 0) cfg.cache = false;
    if (!horizons_text.empty()) cfg.horizons = parse_int_list(horizons_text);
    if (!taus_text.empty()) cfg.taus = parse_int_list(taus_text);

    if (sim_cmd->parsed()) return cmd_simulate(cfg);
    if (fie_cmd->parsed()) return cmd_solve_fie(cfg);
    if (win_cmd->parsed()) return cmd_solve_window(cfg, win_tau, win_N, pin_init, pin_term);
    if (approx_cmd->parsed()) return cmd_approx(cfg, approx_N);
    if (mhe_cmd->parsed()) return cmd_mhe(cfg, mhe_N);
    if (scan_cmd->parsed()) return cmd_turnpike_scan(cfg);
    if (probe_cmd->parsed())
      return cmd_sensitivity_probe(cfg, probe_tau, probe_N, perturb_init, perturb_term);
    if (compare_cmd->parsed()) return cmd_compare(cfg);
    if (perf_cmd->parsed()) return cmd_perf_report(cfg, candidate_path, truth_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("filesystem") != std::string::npos) {
      std::fprintf(stderr, "io error: %s\n", what.c_str());
      return kExitIo;
    }
    std::fprintf(stderr, "error: %s\n", what.c_str());
    return kExitSolver;
  }
  return kExitConfig;
}
