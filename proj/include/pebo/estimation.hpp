#pragma once

#include "pebo/nelder_mead.hpp"
#include "pebo/transform.hpp"
#include "pebo/types.hpp"

#include <vector>

namespace pebo {

/// Time-stamped (t_k, y_k, zeta_k) samples defining the nonlinear regression
/// y = h(phi^L(zeta + theta, t)). All three sequences share the grid.
struct RegressionDataset {
    Eigen::VectorXd times;   ///< grid on [t_c, t]
    Eigen::MatrixXd y;       ///< one row per time, p columns
    Eigen::MatrixXd zeta;    ///< one row per time, n_z columns
    const TransformEvaluator* evaluator = nullptr;
    const SystemModel* model = nullptr;  ///< output map h
    DomainBox box;

    long size() const { return times.size(); }
    /// Prefix dataset over times[0..count-1] (shares storage views by copy).
    RegressionDataset prefix(long count) const;
};

struct EstimatorConfig {
    Eigen::VectorXd theta0;     ///< initial guess; default zero vector
    bool constrained = false;   ///< project onto feasibility via left-inverse success
    long max_evals = 4000;
    double diam_tol = 1e-10;
    double fspread_tol = 1e-12;
    int max_cost_nodes = 200;   ///< cost quadrature subsample cap
    LeftInverseConfig inverse;  ///< used only when no closed-form inverse exists
};

struct TraceEntry {
    double t = 0.0;
    Eigen::VectorXd theta_hat;
    double cost = 0.0;
};

struct EstimationResult {
    Eigen::VectorXd theta_hat;
    double cost = 0.0;
    long evals = 0;
    bool hit_max_evals = false;
    std::vector<TraceEntry> trace;  ///< per-update history for expanding runs
};

/// Node indices used by the cost quadrature: every K-th sample with K chosen
/// so at most max_nodes nodes remain, final sample always included.
std::vector<long> cost_node_indices(long n_samples, int max_nodes);

/// J(theta) = int |y - h(phi^L(zeta + theta, tau))|^2 dtau, discretized by the
/// trapezoid rule on the (subsampled) dataset grid; a single-sample dataset
/// degenerates to the squared residual at that instant.
///
/// Samples whose left inverse fails (NoSolution / Singular) contribute the
/// large finite penalty 1e6 (1 + |z|^2) instead of aborting, which keeps the
/// simplex search well defined outside the image of the box.
double cost_J(const RegressionDataset& ds, const Eigen::VectorXd& theta_hat,
              const EstimatorConfig& cfg = {});

/// Derivative-free minimization of an arbitrary cost (the solver behind the
/// estimators, exposed for direct use).
EstimationResult nelder_mead_estimate(const CostFn& cost, const Eigen::VectorXd& theta0,
                                      const EstimatorConfig& cfg);

/// One simplex run on cost_J over the full window, solved once at the final
/// time of the dataset.
EstimationResult batch_estimate(const RegressionDataset& ds, const EstimatorConfig& cfg);

/// Re-solves over the growing windows [t0, t0 + k*update_period], each warm
/// started from the previous estimate; the trace records theta_hat(t).
EstimationResult expanding_horizon_estimate(const RegressionDataset& full,
                                            double update_period,
                                            const EstimatorConfig& cfg);

/// x_hat = phi^L(zeta + theta_hat, t).
InverseResult reconstruct_state(const TransformEvaluator& ev, const Eigen::VectorXd& zeta,
                                const Eigen::VectorXd& theta_hat, double t,
                                const DomainBox& box, const LeftInverseConfig& cfg);

}  // namespace pebo
