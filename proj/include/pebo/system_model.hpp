#pragma once

#include "pebo/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pebo {

/// The plant: dx/dt = f(x,t), y = h(x), with optional analytic Jacobians.
/// Control systems dx/dt = f(x,u(t)) are covered by folding u into f, so the
/// toolkit only ever sees a time-varying vector field.
///
/// Evaluators are in-place (odeint style) and must be pure: all operations in
/// this library assume they can be called from concurrent workers.
struct SystemModel {
    int n = 0;  ///< state dimension
    int p = 0;  ///< output dimension

    std::function<void(const Eigen::VectorXd& x, double t, Eigen::VectorXd& dx)> f;
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& y)> h;

    /// Optional analytic Jacobians; finite differences are used when absent.
    std::function<void(const Eigen::VectorXd& x, double t, Eigen::MatrixXd& J)> df_dx;
    std::function<void(const Eigen::VectorXd& x, Eigen::MatrixXd& J)> dh_dx;

    Eigen::VectorXd eval_f(const Eigen::VectorXd& x, double t) const;
    Eigen::VectorXd eval_h(const Eigen::VectorXd& x) const;

    /// df/dx, analytic when supplied, else central differences with per-axis
    /// step 1e-6 * (1 + |x_i|).
    Eigen::MatrixXd jac_f(const Eigen::VectorXd& x, double t) const;
    Eigen::MatrixXd jac_h(const Eigen::VectorXd& x) const;

    bool has_analytic_df() const { return static_cast<bool>(df_dx); }
    bool has_analytic_dh() const { return static_cast<bool>(dh_dx); }
};

/// A polynomial vector-field component: sum of coeff * prod_k x_k^{expo_k}.
struct PolynomialTerm {
    double coeff = 0.0;
    std::vector<int> exponents;
};
using PolynomialComponent = std::vector<PolynomialTerm>;

/// Builds a SystemModel from per-component monomial lists for f and h.
/// Analytic Jacobians are derived term-by-term.
SystemModel make_polynomial_model(int n, int p,
                                  const std::vector<PolynomialComponent>& f_components,
                                  const std::vector<PolynomialComponent>& h_components);

struct ModelReport {
    bool ok = true;
    long points_checked = 0;
    long nonfinite_f = 0;
    long nonfinite_h = 0;
    double worst_df_mismatch = 0.0;  ///< relative, against central differences
    double worst_dh_mismatch = 0.0;
    std::vector<std::string> failures;

    std::string summary() const;
};

struct ValidateOptions {
    int grid_per_axis = 20;
    int time_samples = 10;
    int jacobian_samples = 32;
    double jacobian_rel_tol = 1e-4;
    unsigned long long seed = 1234;
};

/// Report-only audit: evaluates f and h over a sampled grid of the box and
/// horizon, flags NaN/Inf, and cross-checks supplied Jacobians against
/// central finite differences at randomly sampled domain points.
ModelReport validate_model(const SystemModel& model, const DomainBox& box,
                           double t_lo, double t_hi,
                           const ValidateOptions& opts = {});

}  // namespace pebo
