#include "mhe/performance.hpp"

#include <cmath>
#include <stdexcept>

namespace mhe {

double sum_normed_errors(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("sum_normed_errors: shape mismatch");
  double sne = 0.0;
  for (Eigen::Index j = 0; j < estimate.cols(); ++j)
    sne += (estimate.col(j) - truth.col(j)).norm();
  return sne;
}

PerfReport perf_report(const EstimateTrajectory& candidate, const SolveReport& reference,
                       const DataBatch& data, const CostWeights& weights,
                       const SystemModel& model, const Eigen::MatrixXd* true_states) {
  const int T = candidate.horizon();
  if (reference.trajectory.horizon() != T || data.horizon() != T)
    throw std::invalid_argument("perf_report: horizon mismatch");
  PerfReport rep;
  rep.J_candidate = total_cost(weights, candidate, data, model);
  rep.V_T = reference.objective;
  rep.gap = rep.J_candidate - rep.V_T;
  rep.gap_relative = rep.gap / std::max(rep.V_T, 1e-12);
  rep.averaged = T > 0 ? rep.J_candidate / T : rep.J_candidate;
  if (true_states) rep.sne = sum_normed_errors(candidate.x, *true_states);
  return rep;
}

double theorem_bound(double epsilon, int N, int T, const EnvelopeFit& envelope, double L_f,
                     double L_h, const CostWeights& weights, double V_T) {
  if (epsilon <= 0.0) throw std::invalid_argument("theorem_bound: epsilon must be positive");
  const double sigma = 2.0 * envelope.beta(0.5 * N);
  const double sigma_sq = sigma * sigma;
  const double lq = weights.lambda_max_Q, lr = weights.lambda_max_R, lg = weights.lambda_max_G;
  const double sigma1 = ((1.0 + L_f) * (1.0 + L_f) * lq * lq + L_h * L_h * lr * lr) * sigma_sq;
  const double sigma2 = L_h * L_h * lg * lg * sigma_sq;
  return (1.0 + epsilon) * V_T + (1.0 + epsilon) / epsilon * (T * sigma1 + sigma2);
}

double max_quadratic_over_box(const Eigen::MatrixXd& M, const Box& box) {
  const int d = box.dim();
  if (!box.is_bounded()) throw std::invalid_argument("max_quadratic_over_box: unbounded box");
  if (d > 8) throw std::invalid_argument("max_quadratic_over_box: box dimension exceeds 8");
  if (M.rows() != d || M.cols() != d)
    throw std::invalid_argument("max_quadratic_over_box: dimension mismatch");
  double best = 0.0;
  Eigen::VectorXd v(d);
  for (long mask = 0; mask < (1L << d); ++mask) {
    for (int i = 0; i < d; ++i) v[i] = (mask >> i) & 1 ? box.upper[i] : box.lower[i];
    best = std::max(best, v.dot(M * v));
  }
  return best;
}

LinearGrowthConstants lemma4_constants(const ConstraintSets& sets, const CostWeights& weights) {
  LinearGrowthConstants out;
  out.C_Q = max_quadratic_over_box(weights.Q, sets.W);
  out.C_R = max_quadratic_over_box(weights.R, sets.V);
  out.C_G = max_quadratic_over_box(weights.G, sets.V);
  out.A = out.C_Q + out.C_R;
  out.B = out.C_G;
  return out;
}

AveragedPerformance averaged_performance(const EstimateTrajectory& candidate,
                                         const SolveReport& reference, const DataBatch& data,
                                         const CostWeights& weights, const SystemModel& model) {
  const int T = candidate.horizon();
  if (T < 1) throw std::invalid_argument("averaged_performance: T must be >= 1");
  AveragedPerformance avg;
  avg.avg_J = total_cost(weights, candidate, data, model) / T;
  avg.avg_V = reference.objective / T;
  return avg;
}

}  // namespace mhe
