#pragma once

#include "pebo/transform.hpp"
#include "pebo/types.hpp"

#include <functional>
#include <vector>

namespace pebo {

/// One run of the measurable dynamic extension d(zeta)/dt = beta(y,t).
/// zeta tracks z = phi(x(t),t) up to the constant offset theta = z - zeta.
struct ExtensionRun {
    SampledSignal zeta;       ///< on the measurement grid
    Eigen::VectorXd zeta0;
};

/// Integrates the extension on the uniform measurement grid of y with the
/// same fixed-step fourth-order scheme. Between grid nodes y is interpolated
/// linearly; the sample-and-hold variant accumulates O(step) error, which is
/// above the offset-constancy budget at the default rate.
ExtensionRun run_extension(const ObserverDesign& design, const SampledSignal& y,
                           const Eigen::VectorXd& zeta0);

/// The state-affine extension pair: d(zeta)/dt = A(u,y,t) zeta + beta(u,y,t)
/// and the transition matrix d(Omega)/dt = A(u,y,t) Omega, Omega(0) = I.
/// Downstream reconstruction contract: z(t) = zeta(t) + Omega(t) (z(0) - zeta(0)).
struct GpeboRun {
    SampledSignal zeta;
    std::vector<Eigen::MatrixXd> Omega;  ///< one per grid node, Omega[0] = I
    double worst_condition = 1.0;        ///< max over the horizon (invertibility diagnostic)
};

using GpeboMatrixFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& u, const Eigen::VectorXd& y, double t)>;
using GpeboVectorFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& u, const Eigen::VectorXd& y, double t)>;

/// Joint integration of (zeta, Omega) driven by the measured signals; u may
/// be empty (dimension-0 signal) for unforced systems.
GpeboRun run_gpebo_extension(const GpeboMatrixFn& Afun, const GpeboVectorFn& betafun,
                             const SampledSignal& y, const SampledSignal& u,
                             const Eigen::VectorXd& zeta0);

}  // namespace pebo
