#pragma once

#include "pebo/estimation.hpp"
#include "pebo/extension.hpp"
#include "pebo/system_model.hpp"
#include "pebo/transform.hpp"

#include <vector>

namespace pebo::sec6 {

/// dx1/dt = -x1, dx2/dt = -x2 + x1^2, y = x2 + x1^3, with analytic Jacobians.
SystemModel model();

/// Default state domain [-2,2]^2 (the source system never bounds it; this is
/// the documented toolkit choice).
DomainBox box();

/// Closed-form flow X(x,t;s).
Eigen::Vector2d flow(const Eigen::Vector2d& x, double t, double s);

/// The 3x3 coefficient matrix P(t) of the closed-form transform
/// phi(x,t) = P(t) (x2, x1^2, x1^3)^T. P(0) = 0; full rank for t > 0.
Eigen::Matrix3d P(double t);

/// The design behind the example: A = diag(-1,-2,-3), B = 1_3, H = identity,
/// rho = 0.
ObserverDesign design();

/// Closed-form evaluator: exact phi, exact Jacobian, analytic left inverse
/// x = ( (e3' P^-1 z)/(e2' P^-1 z), e1' P^-1 z ).
class ClosedFormTransform final : public TransformEvaluator {
  public:
    int state_dim() const override { return 2; }
    int z_dim() const override { return 3; }

    Eigen::VectorXd phi(const Eigen::VectorXd& x, double t) const override;
    Eigen::MatrixXd phi_jacobian(const Eigen::VectorXd& x, double t) const override;

    /// nullopt when the denominator e2' P^-1 z is below the singularity
    /// threshold (|x1| -> 0) so callers fall back to the numeric inverse.
    std::optional<Eigen::VectorXd> fast_left_inverse(const Eigen::VectorXd& z,
                                                     double t) const override;

    /// Unguarded analytic continuation for residual evaluation; nullopt only
    /// at t <= 0 or when the solve itself is non-finite.
    std::optional<Eigen::VectorXd> regression_state(const Eigen::VectorXd& z,
                                                    double t) const override;

    /// Throwing variant: SingularError at t = 0 or when the denominator
    /// magnitude is below denominator_floor.
    Eigen::VectorXd analytic_left_inverse(const Eigen::VectorXd& z, double t) const;

    static constexpr double denominator_floor = 1e-6;
};

/// The reproduction protocol: plant and extension integrated from t0 = 0.1 s
/// to tf = 1 s, output sampled every 0.1 ms.
struct Scenario {
    Eigen::Vector2d x0{1.0, -0.5};   ///< documented default (source values unstated)
    Eigen::Vector3d zeta0{0.0, 0.0, 0.0};
    double t0 = 0.1;
    double tf = 1.0;
    double sample_dt = 1e-4;
    double noise_std = 0.0;
    unsigned long long seed = 12345;
};

struct SimulatedRun {
    SampledSignal x;      ///< plant trajectory on the grid
    SampledSignal y;      ///< measured output (noise applied when configured)
    SampledSignal zeta;   ///< extension trace
    Eigen::Vector3d theta_true;  ///< phi(x(t0), t0) - zeta0
};

SimulatedRun simulate(const Scenario& scn);

RegressionDataset make_dataset(const SimulatedRun& run, const TransformEvaluator& ev,
                               const SystemModel& mdl);

// ---------------------------------------------------------------------------
// Experiment protocols
// ---------------------------------------------------------------------------

/// Single- or pooled-instant cost surface over a (theta1, theta2) grid with
/// theta3 pinned. The zero set is a thin curve, so zero-floor basins are
/// found by refining every grid-local minimum with the simplex solver and
/// clustering the refined minimizers that reach the floor.
struct LandscapeResult {
    Eigen::VectorXd theta1_grid;
    Eigen::VectorXd theta2_grid;
    Eigen::MatrixXd J;                       ///< J(i,j) at (theta1[i], theta2[j])
    std::vector<Eigen::Vector2d> zero_reps;  ///< one representative per basin
    int basins = 0;
};

struct LandscapeConfig {
    std::vector<double> instants{0.2};
    std::optional<double> theta3;  ///< pinned third component; default true value
    int grid_n = 101;
    double span_factor = 5.0;   ///< half-width = span * |theta*|_inf around theta*
    double floor_abs = 1e-10;   ///< refined-cost acceptance (scaled by 1 + |y|^2)
    int refine_max = 40;        ///< local minima refined, best first
};

LandscapeResult run_landscape(const SimulatedRun& run, const LandscapeConfig& cfg);

struct BatchResult {
    EstimationResult estimate;
    Eigen::Vector3d theta_true;
    Eigen::Vector3d theta_tilde;
    SampledSignal x_true;
    SampledSignal x_hat;   ///< reconstructed on the full grid
};

/// Full pipeline: simulate, extend, batch-estimate at tf, reconstruct.
BatchResult run_batch(const Scenario& scn, const EstimatorConfig& cfg = {});

struct ExpandingResult {
    EstimationResult estimate;   ///< trace carries the per-update history
    Eigen::Vector3d theta_true;
    SampledSignal x_true;
    SampledSignal x_hat;         ///< reconstructed with the latest update's estimate
    double update_period = 0.1;
};

ExpandingResult run_expanding(const Scenario& scn, double update_period = 0.1,
                              const EstimatorConfig& cfg = {});

}  // namespace pebo::sec6
