#pragma once

#include <optional>

#include "mhe/turnpike_analysis.hpp"

namespace mhe {

/// Candidate-versus-optimum performance quantities for one horizon.
struct PerfReport {
  double J_candidate = 0.0;
  double V_T = 0.0;
  double gap = 0.0;           // J_candidate - V_T
  double gap_relative = 0.0;  // gap / max(V_T, 1e-12)
  double averaged = 0.0;      // J_candidate / T
  std::optional<double> bound;  // performance-estimate right-hand side, if computed
  std::optional<double> sne;    // sum of normed state errors vs the truth
};

PerfReport perf_report(const EstimateTrajectory& candidate, const SolveReport& reference,
                       const DataBatch& data, const CostWeights& weights,
                       const SystemModel& model,
                       const Eigen::MatrixXd* true_states = nullptr);

/// Sum of normed errors  SNE = sum_j |x_hat_j - x_j|, j in [0, T].
double sum_normed_errors(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

/// Right-hand side of the performance estimate
///   (1+eps) V_T + (1+eps)/eps (T sigma1(N) + sigma2(N))
/// with sigma(s) = 2 c rho^{s/2} from the fitted envelope and
///   sigma1(s) = ((1+L_f)^2 lmax(Q)^2 + L_h^2 lmax(R)^2) sigma(s)^2,
///   sigma2(s) = L_h^2 lmax(G)^2 sigma(s)^2.
double theorem_bound(double epsilon, int N, int T, const EnvelopeFit& envelope, double L_f,
                     double L_h, const CostWeights& weights, double V_T);

/// Worst-case per-stage cost constants over compact disturbance and noise
/// boxes, by vertex enumeration of the positive-definite quadratics:
///   C_Q = max |w|^2_Q over W, C_R = max |v|^2_R over V, C_G likewise with G;
///   V_T <= A T + B with A = C_Q + C_R and B = C_G.
struct LinearGrowthConstants {
  double C_Q = 0.0, C_R = 0.0, C_G = 0.0;
  double A = 0.0, B = 0.0;
};

LinearGrowthConstants lemma4_constants(const ConstraintSets& sets, const CostWeights& weights);

/// Maximum of v' M v over a finite box (attained at a vertex). Rejects boxes
/// with more than 8 dimensions.
double max_quadratic_over_box(const Eigen::MatrixXd& M, const Box& box);

struct AveragedPerformance {
  double avg_J = 0.0;
  double avg_V = 0.0;
};

AveragedPerformance averaged_performance(const EstimateTrajectory& candidate,
                                         const SolveReport& reference, const DataBatch& data,
                                         const CostWeights& weights, const SystemModel& model);

}  // namespace mhe
