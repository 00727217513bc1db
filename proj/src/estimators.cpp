#include "mhe/estimators.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

namespace mhe {

std::shared_ptr<const SolveReport> WindowCache::find(int tau, int N,
                                                     std::uint64_t data_hash) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = entries_.find({tau, N, data_hash});
  return it == entries_.end() ? nullptr : it->second;
}

void WindowCache::store(int tau, int N, std::uint64_t data_hash,
                        std::shared_ptr<const SolveReport> report) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_.emplace(Key{tau, N, data_hash}, std::move(report));
}

std::size_t WindowCache::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size();
}

WindowSolution solve_window(const DataBatch& data, int tau, int N, const ProblemSetup& setup,
                            const ToleranceConfig& tol, WindowCache* cache) {
  if (tau < 0 || N < 0 || tau + N > data.horizon())
    throw std::out_of_range("solve_window: window outside data range");
  const std::uint64_t h = cache ? data.hash() : 0;
  if (cache) {
    if (auto hit = cache->find(tau, N, h)) return {tau, N, *hit};
  }
  ProblemSpec spec{data.slice(tau, N), setup.model, setup.sets, setup.weights,
                   std::nullopt,        std::nullopt, tau};
  WindowSolution out{tau, N, solve(spec, tol)};
  if (cache) cache->store(tau, N, h, std::make_shared<SolveReport>(out.report));
  return out;
}

SolveReport fie_reference(const DataBatch& data, const ProblemSetup& setup,
                          const ToleranceConfig& tol, WindowCache* cache) {
  return solve_window(data, 0, data.horizon(), setup, tol, cache).report;
}

EstimateTrajectory ApproxEstimate::trajectory() const {
  EstimateTrajectory traj;
  traj.x = x_ae;
  traj.w = w_ae;
  traj.feasible = true;  // by construction of w_ae
  return traj;
}

EstimateTrajectory MheResult::trajectory() const {
  EstimateTrajectory traj;
  traj.x = x_mhe;
  traj.w = w_mhe;
  traj.feasible = true;
  return traj;
}

void parallel_for_ordered(int count, int workers, const std::function<void(int)>& task) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

ApproxEstimate approximate_estimator(const DataBatch& data, int N, const ProblemSetup& setup,
                                     const ToleranceConfig& tol, bool parallel, int workers,
                                     WindowCache* cache) {
  const int T = data.horizon();
  if (N % 2 != 0) throw std::invalid_argument("approximate_estimator: N must be even");
  if (N > T) throw std::invalid_argument("approximate_estimator: N exceeds the data horizon");
  if (N < 0) throw std::invalid_argument("approximate_estimator: negative N");
  if (!setup.model.additive || setup.model.q != setup.model.n)
    throw std::invalid_argument("approximate_estimator: model must be additive");

  // Piecewise index map: j in [0, N/2] from the leading window at offset j;
  // j in [N/2+1, T-N/2-1] from the window centered at j, offset N/2;
  // j in [T-N/2, T] from the trailing window at offset N - T + j.
  const int half = N / 2;
  std::vector<std::pair<int, int>> assignment(T + 1);  // (tau, offset)
  for (int j = 0; j <= T; ++j) {
    if (j <= half)
      assignment[j] = {0, j};
    else if (j <= T - half - 1)
      assignment[j] = {j - half, half};
    else
      assignment[j] = {T - N, N - T + j};
  }

  // Distinct windows, in fixed tau order.
  std::vector<int> taus;
  for (int j = 0; j <= T; ++j)
    if (taus.empty() || taus.back() != assignment[j].first) taus.push_back(assignment[j].first);

  std::vector<WindowSolution> solutions(taus.size());
  auto run = [&](int i) { solutions[i] = solve_window(data, taus[i], N, setup, tol, cache); };
  parallel_for_ordered(static_cast<int>(taus.size()), parallel ? workers : 1, run);

  std::map<int, const WindowSolution*> by_tau;
  for (const auto& sol : solutions) by_tau[sol.tau] = &sol;

  ApproxEstimate out;
  out.N = N;
  out.windows_used = assignment;
  out.x_ae.resize(setup.model.n, T + 1);
  out.w_ae.resize(setup.model.n, std::max(T, 0));
  for (int j = 0; j <= T; ++j) {
    const auto [tau, offset] = assignment[j];
    out.x_ae.col(j) = by_tau.at(tau)->report.trajectory.x.col(offset);
  }
  for (int j = 0; j < T; ++j)
    out.w_ae.col(j) = out.x_ae.col(j + 1) - setup.model.f_a(out.x_ae.col(j), data.u.col(j));
  return out;
}

MheResult mhe_sequence(const DataBatch& data, int N, const ProblemSetup& setup,
                       const ToleranceConfig& tol, WindowCache* cache) {
  const int T = data.horizon();
  if (N < 1) throw std::invalid_argument("mhe_sequence: N must be >= 1");
  if (!setup.model.additive || setup.model.q != setup.model.n)
    throw std::invalid_argument("mhe_sequence: model must be additive");

  MheResult out;
  out.x_mhe.resize(setup.model.n, T + 1);
  out.w_mhe.resize(setup.model.n, std::max(T, 0));
  for (int t = 0; t <= T; ++t) {
    const WindowSolution sol = t < N ? solve_window(data, 0, t, setup, tol, cache)
                                     : solve_window(data, t - N, N, setup, tol, cache);
    const int offset = t < N ? t : N;
    out.x_mhe.col(t) = sol.report.trajectory.x.col(offset);
  }
  for (int j = 0; j < T; ++j)
    out.w_mhe.col(j) = out.x_mhe.col(j + 1) - setup.model.f_a(out.x_mhe.col(j), data.u.col(j));
  return out;
}

}  // namespace mhe
