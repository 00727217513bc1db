#pragma once

#include <vector>

#include "mhe/estimators.hpp"

namespace mhe {

/// Which arcs of the decay bound apply to a profile: windows starting at the
/// data origin need only the right (leaving) arc, windows ending at the data
/// end only the left (approaching) arc, interior windows both.
enum class SideForm { left, right, two_sided };

/// Per-offset distances g_j = |z_hat_{tau+j} - z*_{tau+j}|, j in [0, N],
/// between a window solution and the full-information reference, on the
/// stacked (x, w) point with the terminal convention w = 0.
struct GapProfile {
  int tau = 0;
  int N = 0;
  Eigen::VectorXd gaps;  // length N+1
  SideForm side = SideForm::two_sided;

  double midpoint_gap() const { return gaps[N / 2]; }
};

GapProfile gap_profile(const WindowSolution& window, const SolveReport& reference);

/// Exponential upper envelope c * rho^s dominating every fitted gap point in
/// its side-form. For each rho on a fixed grid over (0,1) the smallest
/// dominating c is computed; the returned (c, rho) minimizes the total
/// envelope mass over the fitted points (ties break toward smaller rho), so
/// the fit tracks the observed decay instead of degenerating toward rho = 1.
struct EnvelopeFit {
  double c = 0.0;
  double rho = 0.5;
  double residual = 0.0;  // max (observed - envelope) clipped at 0; 0 by construction
  SideForm side = SideForm::two_sided;

  /// Envelope value beta(C, s); the compact-set constant is absorbed in c.
  double beta(double s) const { return c * std::pow(rho, s); }
};

enum class SideSelector { auto_by_tau, left, right, two_sided };

EnvelopeFit fit_envelope(const std::vector<GapProfile>& profiles,
                         SideSelector side = SideSelector::auto_by_tau);

/// Two independent arc coefficients g_j <= c_left rho^j + c_right rho^{N-j},
/// minimizing c_left + c_right per rho. A profile with no approaching arc
/// fits with c_left ~ 0 (and symmetrically), which is the boundary-window
/// diagnostic.
struct TwoTermFit {
  double c_left = 0.0;
  double c_right = 0.0;
  double rho = 0.5;
};

TwoTermFit fit_envelope_two_term(const GapProfile& profile);

/// Number of offsets j in [0, N-1] with g_j > epsilon.
int excursion_count(const GapProfile& profile, double epsilon);

/// Decaying-sensitivity experiment: the same pinned-endpoint problem solved
/// for two endpoint pairs; differences per offset plus an envelope in the
/// two-term form weighted by the pin distances.
struct SensitivityProbe {
  Eigen::VectorXd pin_initial_1, pin_terminal_1;
  Eigen::VectorXd pin_initial_2, pin_terminal_2;
  Eigen::VectorXd differences;  // length N+1, z-convention
  EnvelopeFit fit;              // d_j <= c (|di| rho^j + |dt| rho^{N-j})
};

SensitivityProbe sensitivity_probe(const DataBatch& data_slice, int N,
                                   const Eigen::VectorXd& pin_initial_1,
                                   const Eigen::VectorXd& pin_terminal_1,
                                   const Eigen::VectorXd& pin_initial_2,
                                   const Eigen::VectorXd& pin_terminal_2,
                                   const ProblemSetup& setup, const ToleranceConfig& tol);

}  // namespace mhe
