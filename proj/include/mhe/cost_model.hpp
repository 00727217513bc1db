#pragma once

#include <Eigen/Core>

#include <functional>

#include "mhe/system_model.hpp"

namespace mhe {

/// Filtering form keeps the terminal fitting-error cost g = |y - h(x,u)|^2_G;
/// prediction form sets g = 0.
enum class TerminalMode { filtering, prediction };

/// Positive-definite quadratic weights of the estimation objective.
/// Construct through make_cost_weights, which validates definiteness and
/// caches Cholesky factors and maximum eigenvalues.
struct CostWeights {
  Eigen::MatrixXd Q;  // disturbance weight, q x q
  Eigen::MatrixXd R;  // fitting-error weight, p x p
  Eigen::MatrixXd G;  // terminal fitting-error weight, p x p
  TerminalMode terminal_mode = TerminalMode::filtering;

  // Cached at construction: U factors with |v|^2_M = |U v|^2.
  Eigen::MatrixXd Q_sqrt, R_sqrt, G_sqrt;
  double lambda_max_Q = 0.0, lambda_max_R = 0.0, lambda_max_G = 0.0;
};

CostWeights make_cost_weights(Eigen::MatrixXd Q, Eigen::MatrixXd R, Eigen::MatrixXd G,
                              TerminalMode mode = TerminalMode::filtering);

/// Identity weights of matching dimensions (the motivating-example setup).
CostWeights identity_weights(const SystemModel& model,
                             TerminalMode mode = TerminalMode::filtering,
                             double q_scale = 1.0);

/// Weighted squared norm v' M v evaluated through the cached factor.
double weighted_sq_norm(const Eigen::MatrixXd& sqrt_factor, const Eigen::VectorXd& v);

/// Paired state/disturbance sequence with the terminal convention
/// z_T = (x_T, 0): states cover [0, T], disturbances [0, T-1].
struct EstimateTrajectory {
  Eigen::MatrixXd x;  // n x (T+1)
  Eigen::MatrixXd w;  // q x T
  bool feasible = false;  // set once dynamics hold to 1e-8

  int horizon() const { return static_cast<int>(x.cols()) - 1; }

  /// Stacked point z_j = (x_j, w_j), with w = 0 at j = T.
  Eigen::VectorXd z(int j) const;
};

/// Max dynamics defect |x_{j+1} - f(x_j, u_j, w_j)| over the horizon.
double dynamics_defect(const EstimateTrajectory& traj, const DataBatch& data,
                       const SystemModel& model);

double stage_cost(const CostWeights& weights, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                  const Eigen::VectorXd& u, const Eigen::VectorXd& y, const SystemModel& model);

double terminal_cost(const CostWeights& weights, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                     const SystemModel& model);

/// Sum of stage costs over [0, T-1] plus the terminal cost at T.
double total_cost(const CostWeights& weights, const EstimateTrajectory& traj,
                  const DataBatch& data, const SystemModel& model);

/// Analytic gradient of the total cost with respect to every x_j and w_j
/// (the dynamics are not involved; they enter the solver as constraints).
struct CostGradient {
  Eigen::MatrixXd gx;  // n x (T+1)
  Eigen::MatrixXd gw;  // q x T
};

CostGradient cost_gradient(const CostWeights& weights, const EstimateTrajectory& traj,
                           const DataBatch& data, const SystemModel& model);

/// Extension hook for non-quadratic objectives. Only the quadratic costs
/// above are built in; the solver requires them.
struct GeneralCost {
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& u, const Eigen::VectorXd& y)>
      stage;
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       const Eigen::VectorXd& y)>
      terminal;
};

double total_cost(const GeneralCost& cost, const EstimateTrajectory& traj, const DataBatch& data);

}  // namespace mhe
