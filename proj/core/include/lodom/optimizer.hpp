#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <lodom/geometry.hpp>

namespace lodom {

/// Normal equations of a pose problem linearized at the current estimate.
/// The update convention is right-multiplicative: T <- T * exp(delta).
struct LinearSystem {
  Mat6 H = Mat6::Zero();
  Vec6 b = Vec6::Zero();  // gradient of the cost
  double cost = 0.0;
  std::size_t num_factors = 0;
};

struct SolverSettings {
  int max_iterations = 64;
  double transform_epsilon = 1e-6;
  /// Condition number above which Levenberg damping is switched on.
  double ill_conditioned = 1e8;
  /// Damping trials per iteration before the step is abandoned.
  int max_damping_trials = 12;
  /// Indefinite Hessians (Newton mode) are shifted to be positive definite.
  bool regularize_hessian = false;
};

struct SolverOutcome {
  Pose pose;
  int iterations = 0;
  bool converged = false;
  bool damped = false;
  std::vector<double> cost_history;
  double condition_number = std::numeric_limits<double>::infinity();
  double last_update_norm = std::numeric_limits<double>::infinity();
};

/// Ratio of largest to smallest eigenvalue of a symmetric matrix; +inf when the smallest is <= 0.
double condition_number(const Mat6& H);

/// Solves (H + lambda * I) x = -b. Returns false when the system cannot be solved.
bool solve_damped(const Mat6& H, const Vec6& b, double lambda, Vec6& x);

/// Adds a diagonal shift making H positive definite. Returns the applied shift.
double make_positive_definite(Mat6& H);

/// Iterative pose refinement shared by the Gaussian aligners and feature odometry.
///
/// `Problem` provides:
///   LinearSystem linearize(const Pose& T)   // re-associates and linearizes at T
///   double evaluate(const Pose& T) const    // cost with the associations of the last linearize
///
/// Each iteration takes a Gauss-Newton (or Newton) step, damped whenever the normal matrix is
/// ill-conditioned or the undamped step fails to lower the cost on the current associations.
template <typename Problem>
SolverOutcome solve_pose(Problem& problem, const Pose& init, const SolverSettings& settings) {
  SolverOutcome out;
  out.pose = init;

  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    LinearSystem sys = problem.linearize(out.pose);
    out.cost_history.push_back(sys.cost);
    out.iterations = iter + 1;
    out.condition_number = condition_number(sys.H);

    Mat6 H = sys.H;
    if (settings.regularize_hessian) {
      make_positive_definite(H);
    }

    const double scale = std::max(H.diagonal().cwiseAbs().maxCoeff(), 1e-12);
    double lambda = out.condition_number > settings.ill_conditioned ? 1e-6 * scale : 0.0;
    if (lambda > 0.0) {
      out.damped = true;
    }

    bool accepted = false;
    Vec6 delta = Vec6::Zero();
    for (int trial = 0; trial < settings.max_damping_trials; ++trial) {
      if (solve_damped(H, sys.b, lambda, delta) && delta.allFinite()) {
        const Pose candidate = out.pose * se3_exp(Twist(delta));
        const double cost = problem.evaluate(candidate);
        if (std::isfinite(cost) && cost <= sys.cost) {
          out.pose = candidate;
          accepted = true;
          break;
        }
      }
      lambda = lambda > 0.0 ? lambda * 10.0 : 1e-4 * scale;
      out.damped = true;
    }

    if (!accepted) {
      // No descent direction on the current associations: stationary point.
      out.last_update_norm = 0.0;
      out.converged = true;
      break;
    }

    out.last_update_norm = delta.norm();
    if (out.last_update_norm < settings.transform_epsilon) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace lodom
