#pragma once

#include <Eigen/Core>

#include <limits>
#include <stdexcept>

namespace mhe {

/// Axis-aligned box with optionally unbounded sides (encoded as +-infinity).
/// Membership uses closed (inclusive) bounds.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw std::invalid_argument("Box: bound dimensions differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (lower[i] > upper[i]) throw std::invalid_argument("Box: lower bound exceeds upper bound");
  }

  /// Unconstrained box in d dimensions.
  static Box all(int d) {
    const double inf = std::numeric_limits<double>::infinity();
    return Box(Eigen::VectorXd::Constant(d, -inf), Eigen::VectorXd::Constant(d, inf));
  }

  /// Symmetric box |v_i| <= half_width in d dimensions.
  static Box symmetric(int d, double half_width) {
    return Box(Eigen::VectorXd::Constant(d, -half_width), Eigen::VectorXd::Constant(d, half_width));
  }

  /// Degenerate box containing exactly one point.
  static Box point(const Eigen::VectorXd& v) { return Box(v, v); }

  int dim() const { return static_cast<int>(lower.size()); }

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    if (v.size() != lower.size()) throw std::invalid_argument("Box::contains: dimension mismatch");
    return (v.array() >= lower.array()).all() && (v.array() <= upper.array()).all();
  }

  /// True when every side is finite.
  bool is_bounded() const { return lower.allFinite() && upper.allFinite(); }

  bool is_unconstrained() const {
    return !lower.array().isFinite().any() && !upper.array().isFinite().any();
  }
};

/// The constraint sets C = X x U x W x V of the estimation problem.
struct ConstraintSets {
  Box X;  // states
  Box U;  // inputs
  Box W;  // disturbances
  Box V;  // measurement noise / fitting error
};

inline bool membership(const ConstraintSets& sets, const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& u,
                       const Eigen::Ref<const Eigen::VectorXd>& w,
                       const Eigen::Ref<const Eigen::VectorXd>& v) {
  return sets.X.contains(x) && sets.U.contains(u) && sets.W.contains(w) && sets.V.contains(v);
}

}  // namespace mhe
