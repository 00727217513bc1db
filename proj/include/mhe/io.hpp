#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "mhe/performance.hpp"

namespace mhe::io {

using json = nlohmann::json;

/// Shortest round-trip decimal representation; keeps CSV output
/// byte-deterministic across runs.
std::string format_double(double v);

void write_data_csv(const std::filesystem::path& path, const DataBatch& data);
DataBatch read_data_csv(const std::filesystem::path& path, int m, int p);

/// Ground truth: states over [0, T] and disturbances over [0, T-1]
/// (disturbance cells are empty on the final row).
void write_truth_csv(const std::filesystem::path& path, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& disturbances);
Eigen::MatrixXd read_truth_states(const std::filesystem::path& path, int n);

/// Estimator output rows `j,x_0..,w_0..,source_tau,source_offset`.
void write_trajectory_csv(const std::filesystem::path& path, const Eigen::MatrixXd& x,
                          const Eigen::MatrixXd& w,
                          const std::vector<std::pair<int, int>>& sources);

/// Long-format gap profiles `tau,N,j,gap`.
void write_profiles_csv(const std::filesystem::path& path,
                        const std::vector<GapProfile>& profiles);

struct SummaryRow {
  int N = 0;
  double J_ae = 0, J_mhe = 0, V_T = 0, gap_ae = 0, gap_mhe = 0;
  double sne_fie = 0, sne_ae = 0, sne_mhe = 0, bound = 0;
  std::string status = "ok";
};

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

json box_to_json(const Box& box);
Box box_from_json(const json& j);

json scenario_to_json(const Scenario& scenario);
/// Rebuilds the scenario around the named built-in model; box bounds, x0,
/// horizon, seed, laws and resets come from the document.
Scenario scenario_from_json(const json& j);

json weights_to_json(const CostWeights& weights);
CostWeights weights_from_json(const json& j);

json report_to_json(const SolveReport& report);
json fit_to_json(const EnvelopeFit& fit);
json perf_to_json(const PerfReport& report);

std::string status_name(SolveStatus status);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

}  // namespace mhe::io
