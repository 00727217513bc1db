#include "mhe/cost_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace mhe {
namespace {

void validate_pd(const Eigen::MatrixXd& M, const char* which, Eigen::MatrixXd& sqrt_out,
                 double& lambda_max_out) {
  if (M.rows() != M.cols()) throw std::invalid_argument(std::string(which) + " must be square");
  if (!M.isApprox(M.transpose(), 1e-12))
    throw std::invalid_argument(std::string(which) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(std::string(which) + " must be positive definite");
  sqrt_out = llt.matrixU();  // |v|^2_M = |U v|^2
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  lambda_max_out = eig.eigenvalues().maxCoeff();
}

}  // namespace

CostWeights make_cost_weights(Eigen::MatrixXd Q, Eigen::MatrixXd R, Eigen::MatrixXd G,
                              TerminalMode mode) {
  CostWeights w;
  w.Q = std::move(Q);
  w.R = std::move(R);
  w.G = std::move(G);
  w.terminal_mode = mode;
  validate_pd(w.Q, "Q", w.Q_sqrt, w.lambda_max_Q);
  validate_pd(w.R, "R", w.R_sqrt, w.lambda_max_R);
  validate_pd(w.G, "G", w.G_sqrt, w.lambda_max_G);
  return w;
}

CostWeights identity_weights(const SystemModel& model, TerminalMode mode, double q_scale) {
  return make_cost_weights(q_scale * Eigen::MatrixXd::Identity(model.q, model.q),
                           Eigen::MatrixXd::Identity(model.p, model.p),
                           Eigen::MatrixXd::Identity(model.p, model.p), mode);
}

double weighted_sq_norm(const Eigen::MatrixXd& sqrt_factor, const Eigen::VectorXd& v) {
  return (sqrt_factor * v).squaredNorm();
}

Eigen::VectorXd EstimateTrajectory::z(int j) const {
  const int n = static_cast<int>(x.rows());
  const int q = static_cast<int>(w.rows());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n + q);
  out.head(n) = x.col(j);
  if (j < horizon()) out.tail(q) = w.col(j);
  return out;
}

double dynamics_defect(const EstimateTrajectory& traj, const DataBatch& data,
                       const SystemModel& model) {
  double worst = 0.0;
  for (int j = 0; j < traj.horizon(); ++j) {
    const Eigen::VectorXd pred = model.f(traj.x.col(j), data.u.col(j), traj.w.col(j));
    worst = std::max(worst, (traj.x.col(j + 1) - pred).norm());
  }
  return worst;
}

double stage_cost(const CostWeights& weights, const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                  const Eigen::VectorXd& u, const Eigen::VectorXd& y, const SystemModel& model) {
  if (x.size() != model.n || w.size() != model.q || y.size() != model.p)
    throw std::invalid_argument("stage_cost: dimension mismatch");
  const Eigen::VectorXd r = y - model.h(x, u);
  return weighted_sq_norm(weights.Q_sqrt, w) + weighted_sq_norm(weights.R_sqrt, r);
}

double terminal_cost(const CostWeights& weights, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                     const SystemModel& model) {
  if (weights.terminal_mode == TerminalMode::prediction) return 0.0;
  if (x.size() != model.n || y.size() != model.p)
    throw std::invalid_argument("terminal_cost: dimension mismatch");
  const Eigen::VectorXd r = y - model.h(x, u);
  return weighted_sq_norm(weights.G_sqrt, r);
}

double total_cost(const CostWeights& weights, const EstimateTrajectory& traj,
                  const DataBatch& data, const SystemModel& model) {
  const int T = traj.horizon();
  if (data.horizon() != T) throw std::invalid_argument("total_cost: length mismatch");
  double cost = 0.0;
  for (int j = 0; j < T; ++j)
    cost += stage_cost(weights, traj.x.col(j), traj.w.col(j), data.u.col(j), data.y.col(j), model);
  cost += terminal_cost(weights, traj.x.col(T), data.u.col(T), data.y.col(T), model);
  return cost;
}

CostGradient cost_gradient(const CostWeights& weights, const EstimateTrajectory& traj,
                           const DataBatch& data, const SystemModel& model) {
  const int T = traj.horizon();
  if (data.horizon() != T) throw std::invalid_argument("cost_gradient: length mismatch");
  CostGradient g;
  g.gx = Eigen::MatrixXd::Zero(model.n, T + 1);
  g.gw = Eigen::MatrixXd::Zero(model.q, T);
  for (int j = 0; j < T; ++j) {
    const Eigen::VectorXd r = data.y.col(j) - model.h(traj.x.col(j), data.u.col(j));
    const Eigen::MatrixXd Hx = model.h_x(traj.x.col(j), data.u.col(j));
    g.gx.col(j) = -2.0 * Hx.transpose() * (weights.R * r);
    g.gw.col(j) = 2.0 * (weights.Q * traj.w.col(j));
  }
  if (weights.terminal_mode == TerminalMode::filtering) {
    const Eigen::VectorXd r = data.y.col(T) - model.h(traj.x.col(T), data.u.col(T));
    const Eigen::MatrixXd Hx = model.h_x(traj.x.col(T), data.u.col(T));
    g.gx.col(T) = -2.0 * Hx.transpose() * (weights.G * r);
  }
  if (!g.gx.allFinite() || !g.gw.allFinite())
    throw std::runtime_error("cost_gradient: non-finite values");
  return g;
}

double total_cost(const GeneralCost& cost, const EstimateTrajectory& traj, const DataBatch& data) {
  const int T = traj.horizon();
  if (data.horizon() != T) throw std::invalid_argument("total_cost: length mismatch");
  double acc = 0.0;
  for (int j = 0; j < T; ++j)
    acc += cost.stage(traj.x.col(j), traj.w.col(j), data.u.col(j), data.y.col(j));
  acc += cost.terminal(traj.x.col(T), data.u.col(T), data.y.col(T));
  return acc;
}

}  // namespace mhe
