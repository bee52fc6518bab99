#pragma once

#include "pebo/system_model.hpp"
#include "pebo/types.hpp"

#include <vector>

namespace pebo {

/// Fixed-step classical fourth-order scheme. No adaptivity: the horizons here
/// are short and a fixed grid lets quadrature nodes coincide with flow samples
/// so the transform integrals need no interpolation.
struct IntegratorConfig {
    double step = 1e-4;
};

/// X(x,t;s): the solution at time s of the plant initialized at (x,t).
/// s < t is allowed; the backward leg is integrated as forward time via the
/// substitution tau = t - s with the negated, time-reflected vector field.
/// The returned trajectory runs from t to s in integration order.
/// Throws NonFiniteError if any component leaves the finite range.
Trajectory integrate_flow(const SystemModel& model, const Eigen::VectorXd& x,
                          double t, double s, const IntegratorConfig& cfg);

/// Y(x,t;s) = h(X(x,t;s)) sampled over the window [w_lo, w_hi] (increasing s).
SampledSignal output_along_flow(const SystemModel& model, const Eigen::VectorXd& x,
                                double t, double w_lo, double w_hi,
                                const IntegratorConfig& cfg);

/// Flow Jacobians dX/dx(x,t;s) along the base trajectory; jac[k] corresponds
/// to the k-th row of base.signal, with jac[0] = I at s = t.
struct VariationalFlow {
    Trajectory base;
    std::vector<Eigen::MatrixXd> jac;
};

/// Integrates the augmented (n + n*n)-dimensional system: the base flow plus
/// dJ/ds = df/dx(X(s),s) J, J(t) = I, columnwise.
VariationalFlow variational_flow(const SystemModel& model, const Eigen::VectorXd& x,
                                 double t, double s, const IntegratorConfig& cfg);

/// Re-integration check: every consecutive sample pair of the trajectory is
/// reproduced by one integrator step to within tol (catches hand-edited or
/// mismatched-grid trajectories).
bool trajectory_consistent(const SystemModel& model, const Trajectory& traj,
                           double tol = 1e-9);

namespace detail {

/// Number of fixed steps covering [t, s]; requires the step to divide the
/// interval to within 1e-9 absolute (grid-alignment contract).
long step_count(double t, double s, double step);

}  // namespace detail

}  // namespace pebo
