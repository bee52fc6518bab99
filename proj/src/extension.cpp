#include "pebo/extension.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace pebo {

namespace {

void check_measurement_grid(const SampledSignal& y) {
    if (y.size() < 2) throw ConfigError("extension: need at least two samples");
    if (!y.strictly_increasing() || !y.uniform(1e-9))
        throw ConfigError("extension: measurement grid must be uniform and increasing");
}

}  // namespace

ExtensionRun run_extension(const ObserverDesign& design, const SampledSignal& y,
                           const Eigen::VectorXd& zeta0) {
    check_measurement_grid(y);
    const long N = y.size();
    const double h = y.step();

    ExtensionRun run;
    run.zeta0 = zeta0;
    run.zeta.times = y.times;
    run.zeta.values.resize(N, design.n_z);

    Eigen::VectorXd z = zeta0;
    run.zeta.values.row(0) = z;
    Eigen::VectorXd ymid(y.dim());
    for (long k = 0; k + 1 < N; ++k) {
        const double tk = y.times(k);
        const Eigen::VectorXd y0 = y.values.row(k);
        const Eigen::VectorXd y1 = y.values.row(k + 1);
        // The right-hand side depends only on (y, t): RK4 collapses to a
        // Simpson step of beta.  Midpoint y interpolates linearly; holding
        // the sample would leave an O(h) error above the offset budget.
        ymid = 0.5 * (y0 + y1);
        const Eigen::VectorXd k1 = design.beta(y0, tk);
        const Eigen::VectorXd k2 = design.beta(ymid, tk + 0.5 * h);
        const Eigen::VectorXd k4 = design.beta(y1, tk + h);
        z += (h / 6.0) * (k1 + 4.0 * k2 + k4);
        if (!z.allFinite())
            throw NonFiniteError("extension overflow: rho too small for this horizon");
        run.zeta.values.row(k + 1) = z;
    }
    return run;
}

GpeboRun run_gpebo_extension(const GpeboMatrixFn& Afun, const GpeboVectorFn& betafun,
                             const SampledSignal& y, const SampledSignal& u,
                             const Eigen::VectorXd& zeta0) {
    check_measurement_grid(y);
    const long N = y.size();
    const double h = y.step();
    const int nz = static_cast<int>(zeta0.size());
    const bool has_u = u.size() > 0;
    if (has_u && u.size() != N)
        throw ConfigError("gpebo: u and y must share the measurement grid");

    GpeboRun run;
    run.zeta.times = y.times;
    run.zeta.values.resize(N, nz);
    run.Omega.reserve(N);

    Eigen::VectorXd zeta = zeta0;
    Eigen::MatrixXd Om = Eigen::MatrixXd::Identity(nz, nz);
    run.zeta.values.row(0) = zeta;
    run.Omega.push_back(Om);

    const Eigen::VectorXd u_empty(0);
    auto u_at = [&](long k) -> Eigen::VectorXd {
        return has_u ? Eigen::VectorXd(u.values.row(k)) : u_empty;
    };

    for (long k = 0; k + 1 < N; ++k) {
        const double tk = y.times(k);
        const Eigen::VectorXd y0 = y.values.row(k), y1 = y.values.row(k + 1);
        const Eigen::VectorXd ym = 0.5 * (y0 + y1);
        const Eigen::VectorXd u0 = u_at(k), u1 = u_at(k + 1);
        const Eigen::VectorXd um = has_u ? Eigen::VectorXd(0.5 * (u0 + u1)) : u_empty;

        const Eigen::MatrixXd A0 = Afun(u0, y0, tk);
        const Eigen::MatrixXd Am = Afun(um, ym, tk + 0.5 * h);
        const Eigen::MatrixXd A1 = Afun(u1, y1, tk + h);
        const Eigen::VectorXd b0 = betafun(u0, y0, tk);
        const Eigen::VectorXd bm = betafun(um, ym, tk + 0.5 * h);
        const Eigen::VectorXd b1 = betafun(u1, y1, tk + h);

        // zeta' = A zeta + beta
        {
            const Eigen::VectorXd k1 = A0 * zeta + b0;
            const Eigen::VectorXd k2 = Am * (zeta + 0.5 * h * k1) + bm;
            const Eigen::VectorXd k3 = Am * (zeta + 0.5 * h * k2) + bm;
            const Eigen::VectorXd k4 = A1 * (zeta + h * k3) + b1;
            zeta += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        // Omega' = A Omega
        {
            const Eigen::MatrixXd K1 = A0 * Om;
            const Eigen::MatrixXd K2 = Am * (Om + 0.5 * h * K1);
            const Eigen::MatrixXd K3 = Am * (Om + 0.5 * h * K2);
            const Eigen::MatrixXd K4 = A1 * (Om + h * K3);
            Om += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        }
        if (!zeta.allFinite() || !Om.allFinite())
            throw NonFiniteError("gpebo extension produced NaN/Inf");
        run.zeta.values.row(k + 1) = zeta;
        run.Omega.push_back(Om);

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Om);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        run.worst_condition =
            std::max(run.worst_condition, smin > 0 ? smax / smin
                                                   : std::numeric_limits<double>::infinity());
    }
    return run;
}

}  // namespace pebo
