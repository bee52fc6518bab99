#include "pebo/flows.hpp"

#include <cmath>
#include <sstream>

namespace pebo {

namespace detail {

long step_count(double t, double s, double step) {
    if (step <= 0.0) throw ConfigError("integrator step must be positive");
    const double span = std::abs(s - t);
    const long n = std::lround(span / step);
    if (std::abs(n * step - span) > 1e-9) {
        std::ostringstream os;
        os << "step " << step << " does not divide interval [" << t << ", " << s << "]";
        throw ConfigError(os.str());
    }
    return n;
}

}  // namespace detail

namespace {

// One classical RK4 pass over nsteps of size h, collecting every state.
// deriv(x, t, out) evaluates the (possibly reflected) vector field.
template <typename Deriv>
Eigen::MatrixXd rk4_collect(const Deriv& deriv, const Eigen::VectorXd& x0, double tau0,
                            double h, long nsteps) {
    const int dim = static_cast<int>(x0.size());
    Eigen::MatrixXd out(nsteps + 1, dim);
    Eigen::VectorXd x = x0, k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    out.row(0) = x;
    for (long i = 0; i < nsteps; ++i) {
        const double tau = tau0 + i * h;
        deriv(x, tau, k1);
        tmp = x + 0.5 * h * k1;
        deriv(tmp, tau + 0.5 * h, k2);
        tmp = x + 0.5 * h * k2;
        deriv(tmp, tau + 0.5 * h, k3);
        tmp = x + h * k3;
        deriv(tmp, tau + h, k4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) throw NonFiniteError("flow integration produced NaN/Inf");
        out.row(i + 1) = x;
    }
    return out;
}

}  // namespace

Trajectory integrate_flow(const SystemModel& model, const Eigen::VectorXd& x, double t,
                          double s, const IntegratorConfig& cfg) {
    const long n = detail::step_count(t, s, cfg.step);
    Trajectory traj;
    traj.t0 = t;
    traj.x0 = x;
    traj.signal.times.resize(n + 1);

    if (s >= t) {
        traj.signal.values = rk4_collect(
            [&](const Eigen::VectorXd& xx, double tt, Eigen::VectorXd& out) {
                model.f(xx, tt, out);
            },
            x, t, cfg.step, n);
        for (long i = 0; i <= n; ++i) traj.signal.times(i) = t + i * cfg.step;
    } else {
        // tau = t - s: forward integration of the reflected field -f(x, t - tau)
        traj.signal.values = rk4_collect(
            [&](const Eigen::VectorXd& xx, double tau, Eigen::VectorXd& out) {
                model.f(xx, t - tau, out);
                out = -out;
            },
            x, 0.0, cfg.step, n);
        for (long i = 0; i <= n; ++i) traj.signal.times(i) = t - i * cfg.step;
    }
    return traj;
}

SampledSignal output_along_flow(const SystemModel& model, const Eigen::VectorXd& x,
                                double t, double w_lo, double w_hi,
                                const IntegratorConfig& cfg) {
    if (w_hi < w_lo) throw ConfigError("output window must have w_lo <= w_hi");
    // Reach the window start, then sweep it forward.
    Eigen::VectorXd x_at_lo = x;
    if (w_lo != t) x_at_lo = integrate_flow(model, x, t, w_lo, cfg).endpoint();
    const Trajectory sweep = integrate_flow(model, x_at_lo, w_lo, w_hi, cfg);

    SampledSignal out;
    out.times = sweep.signal.times;
    out.values.resize(sweep.signal.size(), model.p);
    Eigen::VectorXd y(model.p);
    for (long i = 0; i < sweep.signal.size(); ++i) {
        model.h(sweep.signal.values.row(i).transpose(), y);
        out.values.row(i) = y;
    }
    if (!out.values.allFinite()) throw NonFiniteError("output along flow is NaN/Inf");
    return out;
}

bool trajectory_consistent(const SystemModel& model, const Trajectory& traj, double tol) {
    const long N = traj.signal.size();
    if (N == 0 || traj.signal.values.row(0).transpose() != traj.x0) return false;
    Eigen::VectorXd k1(model.n), k2(model.n), k3(model.n), k4(model.n), tmp(model.n);
    for (long i = 0; i + 1 < N; ++i) {
        const double h = traj.signal.times(i + 1) - traj.signal.times(i);
        const double t = traj.signal.times(i);
        const Eigen::VectorXd x = traj.signal.values.row(i);
        model.f(x, t, k1);
        tmp = x + 0.5 * h * k1;
        model.f(tmp, t + 0.5 * h, k2);
        tmp = x + 0.5 * h * k2;
        model.f(tmp, t + 0.5 * h, k3);
        tmp = x + h * k3;
        model.f(tmp, t + h, k4);
        const Eigen::VectorXd next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if ((next - traj.signal.values.row(i + 1).transpose()).cwiseAbs().maxCoeff() > tol)
            return false;
    }
    return true;
}

VariationalFlow variational_flow(const SystemModel& model, const Eigen::VectorXd& x,
                                 double t, double s, const IntegratorConfig& cfg) {
    const int n = model.n;
    const long nsteps = detail::step_count(t, s, cfg.step);
    const bool backward = s < t;

    // augmented state [x ; vec(J)], dJ/ds = df/dx(X,s) J
    Eigen::VectorXd v0(n + n * n);
    v0.head(n) = x;
    Eigen::Map<Eigen::MatrixXd>(v0.data() + n, n, n) = Eigen::MatrixXd::Identity(n, n);

    Eigen::MatrixXd dfbuf(n, n);
    auto aug = [&](const Eigen::VectorXd& v, double time, Eigen::VectorXd& out) {
        const Eigen::VectorXd xx = v.head(n);
        Eigen::VectorXd fx(n);
        model.f(xx, time, fx);
        dfbuf = model.jac_f(xx, time);
        out.head(n) = fx;
        Eigen::Map<const Eigen::MatrixXd> J(v.data() + n, n, n);
        Eigen::Map<Eigen::MatrixXd>(out.data() + n, n, n).noalias() = dfbuf * J;
    };

    Eigen::MatrixXd rows;
    if (!backward) {
        rows = rk4_collect(aug, v0, t, cfg.step, nsteps);
    } else {
        rows = rk4_collect(
            [&](const Eigen::VectorXd& v, double tau, Eigen::VectorXd& out) {
                aug(v, t - tau, out);
                out = -out;
            },
            v0, 0.0, cfg.step, nsteps);
    }

    VariationalFlow vf;
    vf.base.t0 = t;
    vf.base.x0 = x;
    vf.base.signal.times.resize(nsteps + 1);
    vf.base.signal.values = rows.leftCols(n);
    vf.jac.reserve(nsteps + 1);
    for (long i = 0; i <= nsteps; ++i) {
        vf.base.signal.times(i) = backward ? t - i * cfg.step : t + i * cfg.step;
        Eigen::MatrixXd J(n, n);
        for (int c = 0; c < n; ++c) J.col(c) = rows.row(i).segment(n + c * n, n);
        vf.jac.push_back(std::move(J));
    }
    return vf;
}

}  // namespace pebo
