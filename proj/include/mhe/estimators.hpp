#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "mhe/trajectory_solver.hpp"

namespace mhe {

/// Bundle of everything an estimation run needs besides the data.
struct ProblemSetup {
  SystemModel model;
  ConstraintSets sets;
  CostWeights weights;
};

/// Solution of the truncated problem over d_{tau : tau+N}.
struct WindowSolution {
  int tau = 0;
  int N = 0;
  SolveReport report;
};

/// Concurrent cache of unpinned window solves over one fixed data batch,
/// keyed by (tau, N, data hash). Caching never changes results: entries are
/// exactly what solve() would return for the same inputs.
class WindowCache {
 public:
  std::shared_ptr<const SolveReport> find(int tau, int N, std::uint64_t data_hash) const;
  void store(int tau, int N, std::uint64_t data_hash, std::shared_ptr<const SolveReport> report);
  std::size_t size() const;

 private:
  using Key = std::tuple<int, int, std::uint64_t>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const SolveReport>> entries_;
};

/// Solve the truncated problem P_N(d_{tau:tau+N}) with the default
/// initializer, consulting/filling the cache when given.
WindowSolution solve_window(const DataBatch& data, int tau, int N, const ProblemSetup& setup,
                            const ToleranceConfig& tol, WindowCache* cache = nullptr);

/// Full-information solve over the complete batch: the turnpike reference.
SolveReport fie_reference(const DataBatch& data, const ProblemSetup& setup,
                          const ToleranceConfig& tol, WindowCache* cache = nullptr);

/// Stitched trajectory of Eq.-style centered truncated solves: index j takes
/// the window solution value at a fixed interior offset; disturbances are
/// recovered from the stitched states through the additive dynamics, so the
/// result is dynamically feasible by construction.
struct ApproxEstimate {
  Eigen::MatrixXd x_ae;  // n x (T+1)
  Eigen::MatrixXd w_ae;  // n x T
  std::vector<std::pair<int, int>> windows_used;  // (tau, offset) per index
  int N = 0;

  EstimateTrajectory trajectory() const;
};

/// Requires N even, N <= T, and an additive model. The T - N + 1 window
/// solves are independent; with `parallel` they run on `workers` threads and
/// the output is bit-identical to the serial path.
ApproxEstimate approximate_estimator(const DataBatch& data, int N, const ProblemSetup& setup,
                                     const ToleranceConfig& tol, bool parallel = false,
                                     int workers = 1, WindowCache* cache = nullptr);

/// Moving-horizon sequence: x_mhe_t is the terminal point of the growing
/// full-information solve for t < N and of the solve over d_{t-N:t} for
/// t >= N; disturbances recovered through the additive dynamics.
struct MheResult {
  Eigen::MatrixXd x_mhe;  // n x (T+1)
  Eigen::MatrixXd w_mhe;  // n x T

  EstimateTrajectory trajectory() const;
};

MheResult mhe_sequence(const DataBatch& data, int N, const ProblemSetup& setup,
                       const ToleranceConfig& tol, WindowCache* cache = nullptr);

/// Runs tasks 0..count-1 on a bounded pool and keeps results ordered by
/// index, so aggregation is independent of scheduling.
void parallel_for_ordered(int count, int workers, const std::function<void(int)>& task);

}  // namespace mhe
