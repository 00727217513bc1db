#include "mhe/turnpike_analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mhe {
namespace {

constexpr double kRhoGridStep = 1e-3;
constexpr double kFormFloor = 1e-300;  // guards rho^j underflow in ratios

double form_value(SideForm side, double rho, int j, int N) {
  const double left = std::pow(rho, j);
  const double right = std::pow(rho, N - j);
  switch (side) {
    case SideForm::left:
      return std::max(left, kFormFloor);
    case SideForm::right:
      return std::max(right, kFormFloor);
    case SideForm::two_sided:
      return std::max(left + right, kFormFloor);
  }
  return kFormFloor;
}

SideForm resolve_side(const GapProfile& profile, SideSelector selector) {
  switch (selector) {
    case SideSelector::left:
      return SideForm::left;
    case SideSelector::right:
      return SideForm::right;
    case SideSelector::two_sided:
      return SideForm::two_sided;
    case SideSelector::auto_by_tau:
      return profile.side;
  }
  return SideForm::two_sided;
}

}  // namespace

GapProfile gap_profile(const WindowSolution& window, const SolveReport& reference) {
  const int N = window.N;
  const int T = reference.trajectory.horizon();
  if (window.tau < 0 || window.tau + N > T)
    throw std::out_of_range("gap_profile: window outside the reference range");
  GapProfile profile;
  profile.tau = window.tau;
  profile.N = N;
  profile.gaps.resize(N + 1);
  for (int j = 0; j <= N; ++j)
    profile.gaps[j] =
        (window.report.trajectory.z(j) - reference.trajectory.z(window.tau + j)).norm();
  profile.side = window.tau == 0 ? SideForm::right
                 : window.tau == T - N ? SideForm::left
                                       : SideForm::two_sided;
  if (N == T) profile.side = SideForm::two_sided;  // single full window
  return profile;
}

EnvelopeFit fit_envelope(const std::vector<GapProfile>& profiles, SideSelector selector) {
  if (profiles.size() < 2) throw std::invalid_argument("fit_envelope: need at least 2 profiles");
  for (const auto& p : profiles)
    if (p.N < 4) throw std::invalid_argument("fit_envelope: profiles must have N >= 4");

  double max_gap = 0.0;
  for (const auto& p : profiles) max_gap = std::max(max_gap, p.gaps.maxCoeff());
  EnvelopeFit fit;
  fit.side = selector == SideSelector::auto_by_tau ? SideForm::two_sided
                                                   : resolve_side(profiles[0], selector);
  if (max_gap <= 0.0) return fit;  // degenerate: c = 0, rho = 0.5

  double best_mass = std::numeric_limits<double>::infinity();
  double best_c = 0.0, best_rho = 0.5;
  for (int step = 1; step <= 999; ++step) {
    const double rho = step * kRhoGridStep;
    double c = 0.0;
    for (const auto& p : profiles) {
      const SideForm side = resolve_side(p, selector);
      for (int j = 0; j <= p.N; ++j)
        c = std::max(c, p.gaps[j] / form_value(side, rho, j, p.N));
    }
    double mass = 0.0;
    for (const auto& p : profiles) {
      const SideForm side = resolve_side(p, selector);
      for (int j = 0; j <= p.N; ++j) mass += c * form_value(side, rho, j, p.N);
    }
    if (mass < best_mass) {
      best_mass = mass;
      best_c = c;
      best_rho = rho;
    }
  }
  fit.c = best_c;
  fit.rho = best_rho;
  fit.residual = 0.0;
  return fit;
}

TwoTermFit fit_envelope_two_term(const GapProfile& profile) {
  const int N = profile.N;
  if (N < 1) throw std::invalid_argument("fit_envelope_two_term: degenerate profile");
  if (profile.gaps.maxCoeff() <= 0.0) return {0.0, 0.0, 0.5};

  auto min_cr_given_cl = [&](double rho, double cl) {
    double cr = 0.0;
    for (int j = 0; j <= N; ++j) {
      const double rest = profile.gaps[j] - cl * std::pow(rho, j);
      if (rest > 0.0) cr = std::max(cr, rest / std::max(std::pow(rho, N - j), kFormFloor));
    }
    return cr;
  };

  TwoTermFit best;
  double best_mass = std::numeric_limits<double>::infinity();
  for (int step = 1; step <= 999; ++step) {
    const double rho = step * kRhoGridStep;
    // c_left + c_right is convex piecewise linear in c_left; ternary search.
    double lo = 0.0;
    double hi = 0.0;
    for (int j = 0; j <= N; ++j)
      hi = std::max(hi, profile.gaps[j] / std::max(std::pow(rho, j), kFormFloor));
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      (m1 + min_cr_given_cl(rho, m1) <= m2 + min_cr_given_cl(rho, m2)) ? hi = m2 : lo = m1;
    }
    const double cl = 0.5 * (lo + hi);
    const double cr = min_cr_given_cl(rho, cl);
    // Snap to the pure one-sided fit when it is at least as good.
    const double cr_only = min_cr_given_cl(rho, 0.0);
    double use_cl = cl, use_cr = cr;
    if (cr_only <= cl + cr) {
      use_cl = 0.0;
      use_cr = cr_only;
    }
    double mass = 0.0;
    for (int j = 0; j <= N; ++j)
      mass += use_cl * std::pow(rho, j) + use_cr * std::pow(rho, N - j);
    if (mass < best_mass) {
      best_mass = mass;
      best = {use_cl, use_cr, rho};
    }
  }
  return best;
}

int excursion_count(const GapProfile& profile, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("excursion_count: epsilon must be positive");
  int count = 0;
  for (int j = 0; j < profile.N; ++j)
    if (profile.gaps[j] > epsilon) ++count;
  return count;
}

SensitivityProbe sensitivity_probe(const DataBatch& data_slice, int N,
                                   const Eigen::VectorXd& pin_initial_1,
                                   const Eigen::VectorXd& pin_terminal_1,
                                   const Eigen::VectorXd& pin_initial_2,
                                   const Eigen::VectorXd& pin_terminal_2,
                                   const ProblemSetup& setup, const ToleranceConfig& tol) {
  if (data_slice.horizon() != N) throw std::invalid_argument("sensitivity_probe: slice length");

  auto pinned_solve = [&](const Eigen::VectorXd& xi, const Eigen::VectorXd& xt) {
    ProblemSpec spec{data_slice, setup.model, setup.sets, setup.weights, xi, xt, 0};
    SolveReport rep = solve(spec, tol);
    if (rep.status == SolveStatus::infeasible)
      throw std::runtime_error("sensitivity_probe: pinned problem infeasible, probe aborted");
    return rep;
  };
  const SolveReport rep1 = pinned_solve(pin_initial_1, pin_terminal_1);
  const SolveReport rep2 = pinned_solve(pin_initial_2, pin_terminal_2);

  SensitivityProbe probe;
  probe.pin_initial_1 = pin_initial_1;
  probe.pin_terminal_1 = pin_terminal_1;
  probe.pin_initial_2 = pin_initial_2;
  probe.pin_terminal_2 = pin_terminal_2;
  probe.differences.resize(N + 1);
  for (int j = 0; j <= N; ++j)
    probe.differences[j] = (rep1.trajectory.z(j) - rep2.trajectory.z(j)).norm();

  // Fit d_j <= c (di rho^j + dt rho^{N-j}) with the pin distances as weights.
  const double di = (pin_initial_1 - pin_initial_2).norm();
  const double dt = (pin_terminal_1 - pin_terminal_2).norm();
  probe.fit.side = SideForm::two_sided;
  if (probe.differences.maxCoeff() <= 0.0 || (di <= 0.0 && dt <= 0.0)) {
    probe.fit.c = 0.0;
    probe.fit.rho = 0.5;
    return probe;
  }
  double best_mass = std::numeric_limits<double>::infinity();
  for (int step = 1; step <= 999; ++step) {
    const double rho = step * kRhoGridStep;
    double c = 0.0;
    for (int j = 0; j <= N; ++j) {
      const double form =
          std::max(di * std::pow(rho, j) + dt * std::pow(rho, N - j), kFormFloor);
      c = std::max(c, probe.differences[j] / form);
    }
    double mass = 0.0;
    for (int j = 0; j <= N; ++j)
      mass += c * (di * std::pow(rho, j) + dt * std::pow(rho, N - j));
    if (mass < best_mass) {
      best_mass = mass;
      probe.fit.c = c;
      probe.fit.rho = rho;
    }
  }
  return probe;
}

}  // namespace mhe
