#include "mhe/trajectory_solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mhe {
namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kPrimalReg = 1e-8;
constexpr double kDualReg = 1e-10;
constexpr double kMuInitial = 1.0;
constexpr double kMuFactor = 0.2;
constexpr double kMuFinal = 1e-11;
constexpr double kArmijo = 1e-4;
constexpr double kAlphaMin = 1e-12;
constexpr int kInnerCap = 40;

// Relaxed logarithmic barrier: -ln(s) for s >= delta, C2 quadratic
// extension below. Defined for all s, which removes the need for a
// strictly interior starting point.
struct Barrier {
  double delta = 1.0;

  double value(double s) const {
    if (s >= delta) return -std::log(s);
    const double d = (s - delta) / delta;
    return -std::log(delta) - d + 0.5 * d * d;
  }
  double slope(double s) const {
    if (s >= delta) return -1.0 / s;
    return (-1.0 + (s - delta) / delta) / delta;
  }
  double curvature(double s) const {
    if (s >= delta) return 1.0 / (s * s);
    return 1.0 / (delta * delta);
  }
};

struct SlackItem {
  enum class Kind { var_lo, var_hi, res_lo, res_hi };
  Kind kind;
  int j;        // time index
  int coord;    // coordinate within the block / residual
  double bound;
  bool on_w = false;  // var items: true when the block is w_j
};

// All finite-bound box constraints of the problem. Items on pinned states
// are skipped (constant slacks).
std::vector<SlackItem> enumerate_slacks(const ProblemSpec& spec) {
  std::vector<SlackItem> items;
  const int N = spec.horizon();
  const auto& sets = spec.sets;
  auto pinned = [&](int j) {
    return (j == 0 && spec.pin_initial.has_value()) ||
           (j == N && spec.pin_terminal.has_value());
  };
  for (int j = 0; j <= N; ++j) {
    if (pinned(j)) continue;
    for (int i = 0; i < spec.model.n; ++i) {
      if (std::isfinite(sets.X.lower[i]))
        items.push_back({SlackItem::Kind::var_lo, j, i, sets.X.lower[i], false});
      if (std::isfinite(sets.X.upper[i]))
        items.push_back({SlackItem::Kind::var_hi, j, i, sets.X.upper[i], false});
    }
    for (int i = 0; i < spec.model.p; ++i) {
      if (std::isfinite(sets.V.lower[i]))
        items.push_back({SlackItem::Kind::res_lo, j, i, sets.V.lower[i], false});
      if (std::isfinite(sets.V.upper[i]))
        items.push_back({SlackItem::Kind::res_hi, j, i, sets.V.upper[i], false});
    }
  }
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < spec.model.q; ++i) {
      if (std::isfinite(sets.W.lower[i]))
        items.push_back({SlackItem::Kind::var_lo, j, i, sets.W.lower[i], true});
      if (std::isfinite(sets.W.upper[i]))
        items.push_back({SlackItem::Kind::var_hi, j, i, sets.W.upper[i], true});
    }
  }
  return items;
}

double slack_of(const SlackItem& item, const EstimateTrajectory& traj, const ProblemSpec& spec) {
  switch (item.kind) {
    case SlackItem::Kind::var_lo: {
      const double v = item.on_w ? traj.w(item.coord, item.j) : traj.x(item.coord, item.j);
      return v - item.bound;
    }
    case SlackItem::Kind::var_hi: {
      const double v = item.on_w ? traj.w(item.coord, item.j) : traj.x(item.coord, item.j);
      return item.bound - v;
    }
    case SlackItem::Kind::res_lo:
    case SlackItem::Kind::res_hi: {
      const Eigen::VectorXd r =
          spec.data.y.col(item.j) - spec.model.h(traj.x.col(item.j), spec.data.u.col(item.j));
      return item.kind == SlackItem::Kind::res_lo ? r[item.coord] - item.bound
                                                  : item.bound - r[item.coord];
    }
  }
  return 0.0;
}

// Reduced variable layout: pinned endpoint states are eliminated.
struct VarLayout {
  int N = 0, n = 0, q = 0;
  std::vector<int> x_off;  // reduced offset of x_j, -1 when pinned
  std::vector<int> w_off;
  int dim = 0;

  static VarLayout build(const ProblemSpec& spec) {
    VarLayout L;
    L.N = spec.horizon();
    L.n = spec.model.n;
    L.q = spec.model.q;
    L.x_off.assign(L.N + 1, -1);
    L.w_off.assign(std::max(L.N, 0), -1);
    int off = 0;
    for (int j = 0; j <= L.N; ++j) {
      const bool pinned = (j == 0 && spec.pin_initial.has_value()) ||
                          (j == L.N && spec.pin_terminal.has_value());
      if (!pinned) {
        L.x_off[j] = off;
        off += L.n;
      }
      if (j < L.N) {
        L.w_off[j] = off;
        off += L.q;
      }
    }
    L.dim = off;
    return L;
  }
};

void apply_step(EstimateTrajectory& traj, const VarLayout& L, const Eigen::VectorXd& dv,
                double alpha) {
  for (int j = 0; j <= L.N; ++j)
    if (L.x_off[j] >= 0) traj.x.col(j) += alpha * dv.segment(L.x_off[j], L.n);
  for (int j = 0; j < L.N; ++j) traj.w.col(j) += alpha * dv.segment(L.w_off[j], L.q);
}

Eigen::VectorXd dynamics_residual(const ProblemSpec& spec, const EstimateTrajectory& traj) {
  const int N = spec.horizon();
  const int n = spec.model.n;
  Eigen::VectorXd c(n * N);
  for (int j = 0; j < N; ++j)
    c.segment(j * n, n) =
        traj.x.col(j + 1) - spec.model.f(traj.x.col(j), spec.data.u.col(j), traj.w.col(j));
  return c;
}

double barrier_total(const std::vector<SlackItem>& items, const Barrier& bar,
                     const EstimateTrajectory& traj, const ProblemSpec& spec) {
  double total = 0.0;
  for (const auto& item : items) total += bar.value(slack_of(item, traj, spec));
  return total;
}

double max_box_violation(const std::vector<SlackItem>& items, const EstimateTrajectory& traj,
                         const ProblemSpec& spec) {
  double worst = 0.0;
  for (const auto& item : items) worst = std::max(worst, -slack_of(item, traj, spec));
  return worst;
}

void validate_spec(const ProblemSpec& spec) {
  const auto& m = spec.model;
  if (spec.data.length() < 1) throw std::invalid_argument("solve: empty data slice");
  if (spec.data.u.rows() != m.m || spec.data.y.rows() != m.p)
    throw std::invalid_argument("solve: data dimensions do not match the model");
  if (spec.weights.Q.rows() != m.q || spec.weights.R.rows() != m.p ||
      spec.weights.G.rows() != m.p)
    throw std::invalid_argument("solve: weight dimensions do not match the model");
  if (spec.sets.X.dim() != m.n || spec.sets.W.dim() != m.q || spec.sets.V.dim() != m.p)
    throw std::invalid_argument("solve: constraint-set dimensions do not match the model");
  if (spec.pin_initial && spec.pin_initial->size() != m.n)
    throw std::invalid_argument("solve: pin_initial dimension mismatch");
  if (spec.pin_terminal && spec.pin_terminal->size() != m.n)
    throw std::invalid_argument("solve: pin_terminal dimension mismatch");
  if (spec.pin_initial && !spec.sets.X.contains(*spec.pin_initial))
    throw std::invalid_argument("solve: pin_initial outside X");
  if (spec.pin_terminal && !spec.sets.X.contains(*spec.pin_terminal))
    throw std::invalid_argument("solve: pin_terminal outside X");
}

// Gradient of cost + mu * barrier and the Gauss-Newton Hessian, in reduced
// coordinates, plus the equality-constraint Jacobian.
struct QpData {
  Eigen::VectorXd grad;
  std::vector<Triplet> hess;  // GN Hessian + barrier curvature
  SpMat A;                    // dynamics Jacobian, e x dim
  Eigen::VectorXd c;          // dynamics residual
};

QpData assemble(const ProblemSpec& spec, const EstimateTrajectory& traj, const VarLayout& L,
                const std::vector<SlackItem>& items, double mu, const Barrier& bar) {
  const auto& model = spec.model;
  const auto& weights = spec.weights;
  const int N = L.N, n = L.n, q = L.q;
  QpData qp;
  qp.grad = Eigen::VectorXd::Zero(L.dim);

  const CostGradient cg = cost_gradient(weights, traj, spec.data, model);
  for (int j = 0; j <= N; ++j)
    if (L.x_off[j] >= 0) qp.grad.segment(L.x_off[j], n) = cg.gx.col(j);
  for (int j = 0; j < N; ++j) qp.grad.segment(L.w_off[j], q) = cg.gw.col(j);

  // Gauss-Newton blocks: 2 h_x' R h_x on states, 2 Q on disturbances,
  // 2 h_x' G h_x at the terminal index in filtering mode.
  std::vector<Eigen::MatrixXd> x_blocks(N + 1, Eigen::MatrixXd::Zero(n, n));
  for (int j = 0; j <= N; ++j) {
    if (L.x_off[j] < 0) continue;
    const Eigen::MatrixXd Hx = model.h_x(traj.x.col(j), spec.data.u.col(j));
    if (j < N)
      x_blocks[j] = 2.0 * Hx.transpose() * weights.R * Hx;
    else if (weights.terminal_mode == TerminalMode::filtering)
      x_blocks[j] = 2.0 * Hx.transpose() * weights.G * Hx;
  }

  // Barrier gradient and curvature.
  std::vector<Eigen::VectorXd> w_diag(std::max(N, 0), Eigen::VectorXd::Zero(q));
  if (mu > 0.0) {
    for (const auto& item : items) {
      const double s = slack_of(item, traj, spec);
      const double bp = mu * bar.slope(s);
      const double bpp = mu * bar.curvature(s);
      const double sign =
          (item.kind == SlackItem::Kind::var_lo || item.kind == SlackItem::Kind::res_lo) ? 1.0
                                                                                         : -1.0;
      switch (item.kind) {
        case SlackItem::Kind::var_lo:
        case SlackItem::Kind::var_hi: {
          if (item.on_w) {
            qp.grad[L.w_off[item.j] + item.coord] += bp * sign;
            w_diag[item.j][item.coord] += bpp;
          } else if (L.x_off[item.j] >= 0) {
            qp.grad[L.x_off[item.j] + item.coord] += bp * sign;
            x_blocks[item.j](item.coord, item.coord) += bpp;
          }
          break;
        }
        case SlackItem::Kind::res_lo:
        case SlackItem::Kind::res_hi: {
          if (L.x_off[item.j] < 0) break;
          const Eigen::MatrixXd Hx = model.h_x(traj.x.col(item.j), spec.data.u.col(item.j));
          const Eigen::VectorXd row = Hx.row(item.coord).transpose();
          // d r / d x = -h_x, so the lower-side slack gradient is -row.
          qp.grad.segment(L.x_off[item.j], n) += bp * (-sign) * row;
          x_blocks[item.j] += bpp * row * row.transpose();
          break;
        }
      }
    }
  }

  for (int j = 0; j <= N; ++j) {
    if (L.x_off[j] < 0) continue;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (x_blocks[j](a, b) != 0.0)
          qp.hess.emplace_back(L.x_off[j] + a, L.x_off[j] + b, x_blocks[j](a, b));
  }
  for (int j = 0; j < N; ++j) {
    const Eigen::MatrixXd Wb = 2.0 * weights.Q;
    for (int a = 0; a < q; ++a) {
      for (int b = 0; b < q; ++b)
        if (Wb(a, b) != 0.0) qp.hess.emplace_back(L.w_off[j] + a, L.w_off[j] + b, Wb(a, b));
      if (w_diag[j][a] != 0.0) qp.hess.emplace_back(L.w_off[j] + a, L.w_off[j] + a, w_diag[j][a]);
    }
  }

  // Dynamics Jacobian.
  qp.c = dynamics_residual(spec, traj);
  std::vector<Triplet> at;
  for (int j = 0; j < N; ++j) {
    const Eigen::MatrixXd Fx = model.f_x(traj.x.col(j), spec.data.u.col(j), traj.w.col(j));
    const Eigen::MatrixXd Fw = model.f_w(traj.x.col(j), spec.data.u.col(j), traj.w.col(j));
    for (int r = 0; r < n; ++r) {
      if (L.x_off[j + 1] >= 0) at.emplace_back(j * n + r, L.x_off[j + 1] + r, 1.0);
      if (L.x_off[j] >= 0)
        for (int cidx = 0; cidx < n; ++cidx)
          if (Fx(r, cidx) != 0.0) at.emplace_back(j * n + r, L.x_off[j] + cidx, -Fx(r, cidx));
      for (int cidx = 0; cidx < q; ++cidx)
        if (Fw(r, cidx) != 0.0) at.emplace_back(j * n + r, L.w_off[j] + cidx, -Fw(r, cidx));
    }
  }
  qp.A.resize(n * N, L.dim);
  qp.A.setFromTriplets(at.begin(), at.end());
  return qp;
}

struct KktSolution {
  Eigen::VectorXd dv;
  Eigen::VectorXd lambda;
  bool ok = false;
};

KktSolution solve_kkt(const QpData& qp, int dim) {
  const int e = static_cast<int>(qp.c.size());
  std::vector<Triplet> base = qp.hess;
  for (int k = 0; k < qp.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(qp.A, k); it; ++it) {
      base.emplace_back(static_cast<int>(it.row()) + dim, static_cast<int>(it.col()), it.value());
      base.emplace_back(static_cast<int>(it.col()), static_cast<int>(it.row()) + dim, it.value());
    }
  SpMat K0(dim + e, dim + e);  // exact KKT matrix, used for refinement
  K0.setFromTriplets(base.begin(), base.end());

  std::vector<Triplet> kt = base;
  for (int i = 0; i < dim; ++i) kt.emplace_back(i, i, kPrimalReg);
  for (int i = 0; i < e; ++i) kt.emplace_back(dim + i, dim + i, -kDualReg);
  SpMat K(dim + e, dim + e);
  K.setFromTriplets(kt.begin(), kt.end());

  Eigen::VectorXd rhs(dim + e);
  rhs.head(dim) = -qp.grad;
  rhs.tail(e) = -qp.c;

  KktSolution out;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  double reg = kPrimalReg;
  for (int attempt = 0; attempt < 4; ++attempt) {
    ldlt.compute(K);
    if (ldlt.info() == Eigen::Success) break;
    // Bump the primal regularization and retry.
    reg *= 100.0;
    for (int i = 0; i < dim; ++i) K.coeffRef(i, i) += reg;
  }
  if (ldlt.info() != Eigen::Success) return out;

  Eigen::VectorXd sol = ldlt.solve(rhs);
  // Iterative refinement against the unregularized system removes the
  // regularization bias from the step.
  for (int pass = 0; pass < 3; ++pass) sol += ldlt.solve(rhs - K0 * sol);
  if (!sol.allFinite()) return out;
  out.dv = sol.head(dim);
  out.lambda = sol.tail(e);
  out.ok = true;
  return out;
}

EstimateTrajectory make_empty_traj(const ProblemSpec& spec) {
  EstimateTrajectory traj;
  traj.x = Eigen::MatrixXd::Zero(spec.model.n, spec.horizon() + 1);
  traj.w = Eigen::MatrixXd::Zero(spec.model.q, std::max(spec.horizon(), 0));
  return traj;
}

void enforce_pins(EstimateTrajectory& traj, const ProblemSpec& spec) {
  if (spec.pin_initial) traj.x.col(0) = *spec.pin_initial;
  if (spec.pin_terminal) traj.x.col(spec.horizon()) = *spec.pin_terminal;
}

}  // namespace

EstimateTrajectory default_initializer(const ProblemSpec& spec) {
  EstimateTrajectory traj = make_empty_traj(spec);
  const auto& model = spec.model;
  Eigen::VectorXd x0;
  if (spec.pin_initial) {
    x0 = *spec.pin_initial;
  } else if (model.h_output_matrix) {
    x0 = model.h_output_matrix->completeOrthogonalDecomposition().pseudoInverse() *
         spec.data.y.col(0);
  } else {
    x0 = Eigen::VectorXd::Zero(model.n);
  }
  traj.x.col(0) = x0;
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(model.q);
  for (int j = 0; j < spec.horizon(); ++j)
    traj.x.col(j + 1) = model.f(traj.x.col(j), spec.data.u.col(j), w0);
  enforce_pins(traj, spec);
  return traj;
}

EstimateTrajectory warm_start_from(const EstimateTrajectory& overlap, int overlap_tau,
                                   const ProblemSpec& spec) {
  EstimateTrajectory traj = default_initializer(spec);
  const int N = spec.horizon();
  int last_copied = -1;
  for (int j = 0; j <= N; ++j) {
    const int abs_idx = spec.tau + j;
    if (abs_idx >= overlap_tau && abs_idx <= overlap_tau + overlap.horizon()) {
      traj.x.col(j) = overlap.x.col(abs_idx - overlap_tau);
      last_copied = j;
    }
    if (j < N && abs_idx >= overlap_tau && abs_idx < overlap_tau + overlap.horizon())
      traj.w.col(j) = overlap.w.col(abs_idx - overlap_tau);
  }
  // Extend the tail by forward simulation with w = 0.
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(spec.model.q);
  for (int j = std::max(last_copied, 0); j < N; ++j) {
    traj.w.col(j).setZero();
    traj.x.col(j + 1) = spec.model.f(traj.x.col(j), spec.data.u.col(j), w0);
  }
  enforce_pins(traj, spec);
  return traj;
}

SolveReport solve(const ProblemSpec& spec, const std::optional<EstimateTrajectory>& init,
                  const ToleranceConfig& tol) {
  validate_spec(spec);
  const int N = spec.horizon();
  if (N == 0 && spec.pin_initial && spec.pin_terminal &&
      !spec.pin_initial->isApprox(*spec.pin_terminal, 0.0)) {
    SolveReport rep;
    rep.trajectory = default_initializer(spec);
    rep.status = SolveStatus::infeasible;
    return rep;
  }

  const VarLayout L = VarLayout::build(spec);
  const std::vector<SlackItem> items = enumerate_slacks(spec);

  EstimateTrajectory traj = init ? *init : default_initializer(spec);
  if (traj.x.rows() != spec.model.n || traj.x.cols() != N + 1 || traj.w.rows() != spec.model.q ||
      traj.w.cols() != std::max(N, 0))
    throw std::invalid_argument("solve: initializer dimensions mismatch");
  enforce_pins(traj, spec);

  std::vector<double> mu_schedule;
  if (items.empty()) {
    mu_schedule.push_back(0.0);
  } else {
    for (double mu = kMuInitial;; mu *= kMuFactor) {
      mu_schedule.push_back(mu);
      if (mu <= kMuFinal) break;
    }
  }

  SolveReport report;
  double rho_merit = 1.0;
  int total_iters = 0;
  int stalls = 0;
  bool budget_out = false;

  for (std::size_t stage = 0; stage < mu_schedule.size(); ++stage) {
    const double mu = mu_schedule[stage];
    const bool last_stage = stage + 1 == mu_schedule.size();
    Barrier bar{std::clamp(mu, 1e-12, 1.0)};
    // Intermediate barrier subproblems are solved loosely; only the final
    // stage is polished to the requested optimality level.
    const double inner_tol =
        last_stage ? 0.25 * tol.tol_kkt : std::max(mu, 0.25 * tol.tol_kkt);
    for (int inner = 0; inner < kInnerCap; ++inner) {
      if (total_iters >= tol.max_iter) {
        budget_out = true;
        break;
      }
      QpData qp = assemble(spec, traj, L, items, mu, bar);
      if (L.dim == 0) break;  // everything pinned
      KktSolution sol = solve_kkt(qp, L.dim);
      if (!sol.ok) {
        ++stalls;
        break;
      }
      const double stat = L.dim > 0
                              ? (qp.grad + qp.A.transpose() * sol.lambda).cwiseAbs().maxCoeff()
                              : 0.0;
      const double cviol = qp.c.size() > 0 ? qp.c.cwiseAbs().maxCoeff() : 0.0;
      if (stat <= inner_tol && cviol <= tol.tol_feas) break;

      if (sol.lambda.size() > 0)
        rho_merit = std::max(rho_merit, 2.0 * sol.lambda.cwiseAbs().maxCoeff() + 1.0);

      const double f0 = total_cost(spec.weights, traj, spec.data, spec.model) +
                        mu * barrier_total(items, bar, traj, spec);
      const double c0 = qp.c.cwiseAbs().sum();
      const double merit0 = f0 + rho_merit * c0;
      const double descent = qp.grad.dot(sol.dv) - rho_merit * c0;

      double alpha = 1.0;
      bool accepted = false;
      double merit_accepted = merit0;
      EstimateTrajectory trial = traj;
      while (alpha >= kAlphaMin) {
        trial = traj;
        apply_step(trial, L, sol.dv, alpha);
        const double f_trial = total_cost(spec.weights, trial, spec.data, spec.model) +
                               mu * barrier_total(items, bar, trial, spec);
        const double c_trial = dynamics_residual(spec, trial).cwiseAbs().sum();
        const double merit_trial = f_trial + rho_merit * c_trial;
        if (merit_trial <= merit0 + kArmijo * alpha * std::min(descent, 0.0)) {
          accepted = true;
          merit_accepted = merit_trial;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        ++stalls;
        break;
      }
      traj = trial;
      ++total_iters;
      report.diagnostics.push_back(
          {mu, total_iters, merit0, merit_accepted, alpha * sol.dv.norm(), stat});
      // Negligible progress with the subproblem still unsolved: move on.
      if (merit0 - merit_accepted <= 1e-14 * (1.0 + std::abs(merit0))) {
        if (cviol > 1e-6) ++stalls;
        break;
      }
    }
    if (budget_out || stalls >= 3) break;
  }

  const double dyn_defect = N > 0 ? dynamics_residual(spec, traj).cwiseAbs().maxCoeff() : 0.0;
  const double box_viol = max_box_violation(items, traj, spec);
  report.trajectory = traj;
  report.trajectory.feasible = dyn_defect <= 1e-8;
  report.objective = total_cost(spec.weights, traj, spec.data, spec.model);
  report.kkt_residual = kkt_residual(spec, traj);
  report.iterations = total_iters;

  const bool feasible = dyn_defect <= tol.tol_feas && box_viol <= tol.tol_feas;
  if (feasible && report.kkt_residual <= tol.tol_kkt) {
    report.status = SolveStatus::converged;
  } else if (std::max(dyn_defect, box_viol) > 1e-6) {
    // A violation persisting through the whole barrier schedule means the
    // restoration failed: the pins (or sets) are incompatible.
    report.status = SolveStatus::infeasible;
  } else {
    report.status = SolveStatus::max_iter;
  }
  return report;
}

double kkt_residual(const ProblemSpec& spec, const EstimateTrajectory& traj) {
  const auto& model = spec.model;
  const int N = spec.horizon();
  const int n = model.n, q = model.q;
  const int dim = (N + 1) * n + N * q;  // full variables, pins kept as rows
  auto x_off = [&](int j) { return j * (n + q); };
  auto w_off = [&](int j) { return j * (n + q) + n; };

  Eigen::VectorXd grad(dim);
  const CostGradient cg = cost_gradient(spec.weights, traj, spec.data, model);
  for (int j = 0; j <= N; ++j) grad.segment(x_off(j), n) = cg.gx.col(j);
  for (int j = 0; j < N; ++j) grad.segment(w_off(j), q) = cg.gw.col(j);

  // Equality rows: dynamics, then pins.
  std::vector<Triplet> mt;
  int rows = 0;
  Eigen::VectorXd cvals(n * N + (spec.pin_initial ? n : 0) + (spec.pin_terminal ? n : 0));
  for (int j = 0; j < N; ++j) {
    const Eigen::MatrixXd Fx = model.f_x(traj.x.col(j), spec.data.u.col(j), traj.w.col(j));
    const Eigen::MatrixXd Fw = model.f_w(traj.x.col(j), spec.data.u.col(j), traj.w.col(j));
    for (int r = 0; r < n; ++r) {
      mt.emplace_back(rows + r, x_off(j + 1) + r, 1.0);
      for (int c = 0; c < n; ++c) mt.emplace_back(rows + r, x_off(j) + c, -Fx(r, c));
      for (int c = 0; c < q; ++c) mt.emplace_back(rows + r, w_off(j) + c, -Fw(r, c));
    }
    cvals.segment(rows, n) =
        traj.x.col(j + 1) - model.f(traj.x.col(j), spec.data.u.col(j), traj.w.col(j));
    rows += n;
  }
  if (spec.pin_initial) {
    for (int r = 0; r < n; ++r) mt.emplace_back(rows + r, x_off(0) + r, 1.0);
    cvals.segment(rows, n) = traj.x.col(0) - *spec.pin_initial;
    rows += n;
  }
  if (spec.pin_terminal) {
    for (int r = 0; r < n; ++r) mt.emplace_back(rows + r, x_off(N) + r, 1.0);
    cvals.segment(rows, n) = traj.x.col(N) - *spec.pin_terminal;
    rows += n;
  }
  const int eq_rows = rows;

  // Near-active inequality gradients (columns enter with a negative sign so
  // reconstructed multipliers should come out nonnegative).
  const std::vector<SlackItem> items = enumerate_slacks(spec);
  std::vector<double> act_slack;
  double worst_violation = 0.0;
  for (const auto& item : items) {
    const double s = slack_of(item, traj, spec);
    worst_violation = std::max(worst_violation, -s);
    const double act_tol = 1e-2 * (1.0 + std::abs(item.bound));
    if (s > act_tol) continue;
    const double sign =
        (item.kind == SlackItem::Kind::var_lo || item.kind == SlackItem::Kind::res_lo) ? 1.0
                                                                                       : -1.0;
    const int row = rows + static_cast<int>(act_slack.size());
    switch (item.kind) {
      case SlackItem::Kind::var_lo:
      case SlackItem::Kind::var_hi: {
        const int col = item.on_w ? w_off(item.j) + item.coord : x_off(item.j) + item.coord;
        mt.emplace_back(row, col, -sign);
        break;
      }
      case SlackItem::Kind::res_lo:
      case SlackItem::Kind::res_hi: {
        const Eigen::MatrixXd Hx = model.h_x(traj.x.col(item.j), spec.data.u.col(item.j));
        for (int c = 0; c < n; ++c) mt.emplace_back(row, x_off(item.j) + c, sign * Hx(item.coord, c));
        break;
      }
    }
    act_slack.push_back(s);
  }
  const int k = eq_rows + static_cast<int>(act_slack.size());

  double stationarity;
  Eigen::VectorXd m;
  if (k == 0) {
    stationarity = grad.cwiseAbs().maxCoeff();
  } else {
    SpMat Mt(k, dim);  // each row is one multiplier column transposed
    Mt.setFromTriplets(mt.begin(), mt.end());
    const SpMat M = Mt.transpose();
    SpMat MtM = (Mt * M).pruned();
    for (int i = 0; i < k; ++i) MtM.coeffRef(i, i) += 1e-14;
    Eigen::SimplicialLDLT<SpMat> ldlt(MtM);
    if (ldlt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    m = ldlt.solve(-(Mt * grad));
    m += ldlt.solve(-(Mt * grad) - MtM * m);
    stationarity = (grad + M * m).cwiseAbs().maxCoeff();
  }

  double sign_violation = 0.0;
  double complementarity = 0.0;
  for (std::size_t i = 0; i < act_slack.size(); ++i) {
    const double nu = m[eq_rows + static_cast<int>(i)];
    sign_violation = std::max(sign_violation, -nu);
    complementarity = std::max(complementarity, std::abs(nu * act_slack[i]));
  }
  const double eq_violation = eq_rows > 0 ? cvals.head(eq_rows).cwiseAbs().maxCoeff() : 0.0;

  return std::max({stationarity, eq_violation, worst_violation, sign_violation, complementarity});
}

}  // namespace mhe
