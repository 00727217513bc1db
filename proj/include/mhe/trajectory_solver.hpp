#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "mhe/box.hpp"
#include "mhe/cost_model.hpp"
#include "mhe/system_model.hpp"

namespace mhe {

struct ToleranceConfig {
  double tol_kkt = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 200;
};

/// One estimation NLP over a data slice d_{tau : tau+N}. Without pins this
/// is the (possibly truncated) estimation problem; with pins it is the
/// auxiliary problem with fixed initial and/or terminal state.
struct ProblemSpec {
  DataBatch data;  // slice of length N+1
  SystemModel model;
  ConstraintSets sets;
  CostWeights weights;
  std::optional<Eigen::VectorXd> pin_initial;
  std::optional<Eigen::VectorXd> pin_terminal;
  int tau = 0;  // absolute index of data column 0, bookkeeping only

  int horizon() const { return data.horizon(); }
};

enum class SolveStatus { converged, max_iter, infeasible };

struct IterationDiag {
  double mu = 0.0;
  int iter = 0;
  double merit_before = 0.0;  // l1 merit at the iterate, at this step's penalty
  double merit_after = 0.0;   // l1 merit at the accepted point
  double step_norm = 0.0;
  double stationarity = 0.0;
};

struct SolveReport {
  EstimateTrajectory trajectory;
  double objective = 0.0;      // attained cost (the value function on success)
  double kkt_residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  std::vector<IterationDiag> diagnostics;
};

/// Gauss-Newton SQP over the full decision vector (x_{0:N}, w_{0:N-1}) with
/// the dynamics (and pins, by elimination) as equality constraints and a
/// logarithmic barrier for the box constraints. Deterministic for fixed
/// inputs and tolerances.
SolveReport solve(const ProblemSpec& spec, const std::optional<EstimateTrajectory>& init,
                  const ToleranceConfig& tol);
inline SolveReport solve(const ProblemSpec& spec, const ToleranceConfig& tol = {}) {
  return solve(spec, std::nullopt, tol);
}

/// First-order optimality residual of the trajectory for the given problem:
/// the max of the Lagrangian stationarity residual (multipliers reconstructed
/// by least squares), equality/set infeasibilities, multiplier sign
/// violations, and complementarity products. Zero at an exact KKT point.
double kkt_residual(const ProblemSpec& spec, const EstimateTrajectory& traj);

/// Deterministic initializer: x_0 from the first measurement through the
/// least-squares inverse of the linear output map when available (otherwise
/// zeros), then forward simulation with w = 0.
EstimateTrajectory default_initializer(const ProblemSpec& spec);

/// Initializer for a window that overlaps an already-solved trajectory:
/// overlapping (x, w) values are copied, the tail is extended by forward
/// simulation with w = 0. `overlap_tau` is the absolute index of overlap's
/// first state.
EstimateTrajectory warm_start_from(const EstimateTrajectory& overlap, int overlap_tau,
                                   const ProblemSpec& spec);

}  // namespace mhe
