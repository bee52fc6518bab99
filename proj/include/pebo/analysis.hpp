#pragma once

#include "pebo/flows.hpp"
#include "pebo/transform.hpp"
#include "pebo/types.hpp"

#include <utility>
#include <vector>

namespace pebo {

struct AnalysisConfig {
    IntegratorConfig integrator{1e-3};
    double rank_rel_tol = 1e-8;   ///< sigma_min/sigma_max below this = deficient
    double probe_delta = 1e-4;    ///< stencil spacing for flow time-derivatives
    int stencil_substeps = 8;     ///< integrator substeps per stencil interval
};

/// Stacked output derivatives O_k(x,t) = [h; D_f h; ...; D_f^k h] and the
/// state Jacobian of the stack with its singular values.
///
/// Values use central differences of s -> h(X(x,t;s)) on a symmetric stencil.
/// The Jacobian rows are the matching s-derivatives of
/// dh/dx(X(s)) dX/dx(x,t;s) from the variational flow: one differencing level
/// on near-machine-accurate values, which keeps the rank test meaningful at
/// the deficiency threshold (differencing the stacked values in x a second
/// time drowns sigma_min in noise).
struct ObsMatrixResult {
    Eigen::VectorXd x;
    double t = 0.0;
    int k = 0;
    Eigen::VectorXd stacked;        ///< (k+1)p values
    Eigen::MatrixXd jacobian;       ///< (k+1)p x n
    Eigen::VectorXd singular_values;
    int rank = 0;
    bool ill_conditioned = false;   ///< differencing noise estimate exceeded signal
};

/// k is capped at 3: the stencil differences amplify noise as delta^{-k}.
ObsMatrixResult observability_matrix(const SystemModel& model, const Eigen::VectorXd& x,
                                     double t, int k, const AnalysisConfig& cfg = {});

/// Sweep of observability_matrix over states; includes sign-change root
/// refinement of det(jacobian) along the first axis when the stack is square.
struct ObsSweepRow {
    Eigen::VectorXd x;
    int rank = 0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double det = 0.0;  ///< square stacks only, else 0
};
struct ObsSweepReport {
    std::vector<ObsSweepRow> rows;
    std::vector<double> det_roots;  ///< refined zero crossings along the sweep axis
};
ObsSweepReport observability_sweep(const SystemModel& model,
                                   const std::vector<Eigen::VectorXd>& states, double t,
                                   int k, const AnalysisConfig& cfg = {});

/// Pairwise sup-norm gaps of backward output histories over [t - t_star, t];
/// a gap below threshold for distinct states flags a distinguishability
/// violation candidate.
struct DistinguishabilityProbe {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
    std::vector<double> gaps;
    double threshold = 1e-8;
    std::vector<int> violations;  ///< indices with gap < threshold
};
DistinguishabilityProbe distinguishability_probe(
    const SystemModel& model,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs, double t,
    double t_star, const AnalysisConfig& cfg = {});

/// Identifiability Gramian along the trajectory through x:
/// W = int_{t_lo}^{T} psi^{+T} (dh/dx)^T (dh/dx) psi^{+} dtau with
/// psi(x,tau) the transform Jacobian at (X(x,0;tau), tau) and (.)^{+} the
/// SVD pseudo-inverse. W is n_z x n_z. Doubles as the Fisher information
/// matrix of the regression under unit noise covariance.
///
/// The nonsingular verdict requires both the eigenvalue ratio test and full
/// column rank of psi over the window: the pseudo-inverse silently discards
/// collapsed state directions, so the eigenvalue test alone cannot see them.
struct GramianReport {
    Eigen::VectorXd x;
    double t_lower = 0.0;
    double horizon = 0.0;
    Eigen::MatrixXd W;
    Eigen::VectorXd eigenvalues;      ///< ascending
    bool nonsingular = false;
    bool rank_deficient_psi = false;  ///< psi below rank n on >10% of nodes
    std::vector<double> deficient_taus;
};

struct GramianConfig {
    AnalysisConfig analysis;
    double t_lower = 0.0;   ///< start of the outer integral (use t_star when known)
    int outer_nodes = 91;
    double deficient_fraction = 0.10;
};

GramianReport gramian_W_phi(const SystemModel& model, const ObserverDesign& design,
                            const Eigen::VectorXd& x, double T,
                            const GramianConfig& cfg = {});

/// Round-trip failure rate of left_inverse(phi(x,t), t) over a state grid,
/// per time; the empirical injectivity onset is the smallest grid time with
/// zero failures.
struct InjectivitySweep {
    std::vector<double> t_grid;
    std::vector<double> failure_rate;
    double t_star_estimate = -1.0;  ///< -1 when no grid time is failure-free
};

InjectivitySweep injectivity_sweep(const TransformEvaluator& ev, const DomainBox& box,
                                   const std::vector<double>& t_grid, int grid_per_axis,
                                   const LeftInverseConfig& cfg, double roundtrip_tol = 1e-5);

}  // namespace pebo
