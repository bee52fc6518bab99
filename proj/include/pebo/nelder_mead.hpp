#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>

namespace pebo {

/// Downhill simplex with the classic reflection/expansion/contraction/shrink
/// coefficients 1, 2, 0.5, 0.5. Termination follows the fminsearch convention:
/// both the simplex diameter and the cost spread must fall below their
/// tolerances (set fspread_tol to +inf for a diameter-only stop), else the
/// evaluation budget ends the run. Exact cost ties are broken toward the
/// lexicographically smallest vertex so runs are deterministic.
struct NmOptions {
    long max_evals = 2000;
    double diam_tol = 1e-10;
    double fspread_tol = 1e-12;
    /// Initial simplex: vertex i perturbs coordinate i by init_rel * |x_i|,
    /// or by init_abs when that coordinate is zero. The 5% / 0.00025 defaults
    /// are the fminsearch convention; polish solvers pass much smaller scales
    /// so the first vertices stay inside narrow valleys (expansion recovers
    /// scale upward, shrinking down costs far more evaluations).
    double init_rel = 0.05;
    double init_abs = 0.00025;
    /// Early exit once the best cost reaches this floor (descending past the
    /// caller's resolution only burns evaluations).
    double stop_below = -std::numeric_limits<double>::infinity();
};

struct NmResult {
    Eigen::VectorXd x;
    double fmin = std::numeric_limits<double>::infinity();
    long evals = 0;
    bool hit_max_evals = false;
};

using CostFn = std::function<double(const Eigen::VectorXd&)>;

NmResult nelder_mead(const CostFn& cost, const Eigen::VectorXd& x0, const NmOptions& opts);

Eigen::MatrixXd initial_simplex(const Eigen::VectorXd& x0, double init_rel = 0.05,
                                double init_abs = 0.00025);

}  // namespace pebo
