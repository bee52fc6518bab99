#include "pebo/example_sec6.hpp"

#include "pebo/flows.hpp"
#include "pebo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pebo::sec6 {

SystemModel model() {
    SystemModel m;
    m.n = 2;
    m.p = 1;
    m.f = [](const Eigen::VectorXd& x, double, Eigen::VectorXd& dx) {
        dx(0) = -x(0);
        dx(1) = -x(1) + x(0) * x(0);
    };
    m.h = [](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        y(0) = x(1) + x(0) * x(0) * x(0);
    };
    m.df_dx = [](const Eigen::VectorXd& x, double, Eigen::MatrixXd& J) {
        J(0, 0) = -1.0;
        J(0, 1) = 0.0;
        J(1, 0) = 2.0 * x(0);
        J(1, 1) = -1.0;
    };
    m.dh_dx = [](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        J(0, 0) = 3.0 * x(0) * x(0);
        J(0, 1) = 1.0;
    };
    return m;
}

DomainBox box() { return DomainBox::cube(2, -2.0, 2.0); }

Eigen::Vector2d flow(const Eigen::Vector2d& x, double t, double s) {
    const double e1 = std::exp(-(s - t));
    const double e2 = std::exp(-2.0 * (s - t));
    return {e1 * x(0), e1 * x(1) + x(0) * x(0) * (e1 - e2)};
}

Eigen::Matrix3d P(double t) {
    const double e1 = std::exp(t), e2 = std::exp(2.0 * t), e3 = std::exp(3.0 * t);
    Eigen::Matrix3d P;
    P << t * e1, e1 + t * e1 - e2, 0.5 * (e3 - e1),                    //
        e2 - e1, e2 - e1 - t * e2, e3 - e2,                            //
        0.5 * (e3 - e1), 0.5 * (e3 - e1) - e3 + e2, t * e3;
    return P;
}

ObserverDesign design() {
    Eigen::VectorXd lambdas(3);
    lambdas << -1.0, -2.0, -3.0;
    return make_design(2, 1, lambdas, 0.0, OutputMap::identity(1));
}

namespace {

inline Eigen::Vector3d monomials(const Eigen::VectorXd& x) {
    return {x(1), x(0) * x(0), x(0) * x(0) * x(0)};
}

}  // namespace

Eigen::VectorXd ClosedFormTransform::phi(const Eigen::VectorXd& x, double t) const {
    return P(t) * monomials(x);
}

Eigen::MatrixXd ClosedFormTransform::phi_jacobian(const Eigen::VectorXd& x, double t) const {
    Eigen::Matrix<double, 3, 2> dm;
    dm << 0.0, 1.0,                    //
        2.0 * x(0), 0.0,               //
        3.0 * x(0) * x(0), 0.0;
    return P(t) * dm;
}

std::optional<Eigen::VectorXd> ClosedFormTransform::fast_left_inverse(
    const Eigen::VectorXd& z, double t) const {
    if (t <= 0.0) return std::nullopt;
    const Eigen::Vector3d v = P(t).partialPivLu().solve(Eigen::Vector3d(z));
    if (std::abs(v(1)) < denominator_floor) return std::nullopt;
    Eigen::VectorXd x(2);
    x << v(2) / v(1), v(0);
    return x;
}

std::optional<Eigen::VectorXd> ClosedFormTransform::regression_state(
    const Eigen::VectorXd& z, double t) const {
    if (t <= 0.0) return std::nullopt;
    const Eigen::Vector3d v = P(t).partialPivLu().solve(Eigen::Vector3d(z));
    Eigen::VectorXd x(2);
    x << v(2) / v(1), v(0);
    if (!x.allFinite()) return std::nullopt;
    return x;
}

Eigen::VectorXd ClosedFormTransform::analytic_left_inverse(const Eigen::VectorXd& z,
                                                           double t) const {
    if (t <= 0.0) throw SingularError("analytic left inverse: P(0) is the zero matrix");
    const Eigen::Vector3d v = P(t).partialPivLu().solve(Eigen::Vector3d(z));
    if (std::abs(v(1)) < denominator_floor)
        throw SingularError("analytic left inverse: denominator e2' P^-1 z below floor");
    Eigen::VectorXd x(2);
    x << v(2) / v(1), v(0);
    return x;
}

SimulatedRun simulate(const Scenario& scn) {
    const SystemModel mdl = model();
    const ObserverDesign dsn = design();
    const IntegratorConfig cfg{scn.sample_dt};

    const Trajectory plant = integrate_flow(mdl, scn.x0, scn.t0, scn.tf, cfg);
    const long N = plant.signal.size();

    SimulatedRun run;
    run.x = plant.signal;
    run.y.times = plant.signal.times;
    run.y.values.resize(N, 1);
    Eigen::VectorXd y(1);
    for (long k = 0; k < N; ++k) {
        mdl.h(plant.signal.values.row(k).transpose(), y);
        run.y.values(k, 0) = y(0);
    }
    if (scn.noise_std > 0.0) {
        std::mt19937_64 rng(scn.seed);
        std::normal_distribution<double> gauss(0.0, scn.noise_std);
        for (long k = 0; k < N; ++k) run.y.values(k, 0) += gauss(rng);
    }

    const ExtensionRun ext = run_extension(dsn, run.y, scn.zeta0);
    run.zeta = ext.zeta;

    const ClosedFormTransform cf;
    run.theta_true = cf.phi(scn.x0, scn.t0) - scn.zeta0;
    return run;
}

RegressionDataset make_dataset(const SimulatedRun& run, const TransformEvaluator& ev,
                               const SystemModel& mdl) {
    RegressionDataset ds;
    ds.times = run.y.times;
    ds.y = run.y.values;
    ds.zeta = run.zeta.values;
    ds.evaluator = &ev;
    ds.model = &mdl;
    ds.box = box();
    return ds;
}

// ---------------------------------------------------------------------------
// Landscape
// ---------------------------------------------------------------------------

namespace {

// Single- or pooled-instant cost with theta3 pinned.
struct InstantCost {
    std::vector<double> ts;
    std::vector<double> ys;
    std::vector<Eigen::Vector3d> zetas;
    double theta3 = 0.0;
    const SystemModel* mdl = nullptr;
    const ClosedFormTransform* cf = nullptr;
    DomainBox bx = box();

    double operator()(double th1, double th2) const {
        double total = 0.0;
        Eigen::VectorXd theta(3);
        theta << th1, th2, theta3;
        for (size_t i = 0; i < ts.size(); ++i) {
            const Eigen::VectorXd z = zetas[i] + theta;
            double r2;
            if (auto x = cf->regression_state(z, ts[i])) {
                const double r = ys[i] - mdl->eval_h(bx.saturate(*x))(0);
                r2 = r * r;
            } else {
                r2 = std::numeric_limits<double>::infinity();
            }
            if (!std::isfinite(r2)) r2 = 1e6 * (1.0 + z.squaredNorm());
            total += r2;
        }
        return total;
    }
};

}  // namespace

LandscapeResult run_landscape(const SimulatedRun& run, const LandscapeConfig& cfg) {
    const SystemModel mdl = model();
    static const ClosedFormTransform cf;

    InstantCost cost;
    cost.mdl = &mdl;
    cost.cf = &cf;
    cost.theta3 = cfg.theta3.value_or(run.theta_true(2));
    double yscale = 0.0;
    for (const double tq : cfg.instants) {
        const long k = run.y.index_of(tq);
        cost.ts.push_back(run.y.times(k));
        cost.ys.push_back(run.y.values(k, 0));
        cost.zetas.push_back(run.zeta.values.row(k).transpose());
        yscale = std::max(yscale, std::abs(run.y.values(k, 0)));
    }

    LandscapeResult res;
    const int g = cfg.grid_n;
    const double rad = cfg.span_factor * run.theta_true.cwiseAbs().maxCoeff();
    res.theta1_grid.setLinSpaced(g, run.theta_true(0) - rad, run.theta_true(0) + rad);
    res.theta2_grid.setLinSpaced(g, run.theta_true(1) - rad, run.theta_true(1) + rad);
    res.J.resize(g, g);
    parallel_for(g, [&](long i) {
        for (int j = 0; j < g; ++j)
            res.J(i, j) = cost(res.theta1_grid(i), res.theta2_grid(j));
    });

    // The zero set is a thin curve: threshold scans miss it, so refine every
    // grid-local minimum and cluster the refined minimizers at the floor.
    struct Cell {
        double J;
        int i, j;
    };
    std::vector<Cell> minima;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    const int a = i + di, b = j + dj;
                    if (a < 0 || b < 0 || a >= g || b >= g || (di == 0 && dj == 0)) continue;
                    if (res.J(a, b) < res.J(i, j)) {
                        is_min = false;
                        break;
                    }
                }
            if (is_min) minima.push_back({res.J(i, j), i, j});
        }
    std::sort(minima.begin(), minima.end(),
              [](const Cell& a, const Cell& b) { return a.J < b.J; });
    if (static_cast<int>(minima.size()) > cfg.refine_max) minima.resize(cfg.refine_max);

    const double floor = cfg.floor_abs * (1.0 + yscale * yscale);
    const double cell = res.theta1_grid(1) - res.theta1_grid(0);
    std::vector<Eigen::Vector2d> zeros(minima.size(),
                                       Eigen::Vector2d::Constant(std::nan("")));
    parallel_for(static_cast<long>(minima.size()), [&](long m) {
        Eigen::VectorXd p0(2);
        p0 << res.theta1_grid(minima[m].i), res.theta2_grid(minima[m].j);
        NmOptions nm;
        nm.max_evals = 800;
        nm.diam_tol = 1e-12;
        nm.fspread_tol = std::numeric_limits<double>::infinity();
        const NmResult r = nelder_mead(
            [&](const Eigen::VectorXd& p) { return cost(p(0), p(1)); }, p0, nm);
        if (r.fmin < floor) zeros[m] = r.x;
    });

    for (const auto& zp : zeros) {
        if (std::isnan(zp(0))) continue;
        bool placed = false;
        for (const auto& rep : res.zero_reps)
            if ((zp - rep).cwiseAbs().maxCoeff() < cell) {
                placed = true;
                break;
            }
        if (!placed) res.zero_reps.push_back(zp);
    }
    res.basins = static_cast<int>(res.zero_reps.size());
    return res;
}

// ---------------------------------------------------------------------------
// Batch and expanding protocols
// ---------------------------------------------------------------------------

namespace {

SampledSignal reconstruct_table(const SimulatedRun& run, const ClosedFormTransform& cf,
                                const std::function<Eigen::Vector3d(double)>& theta_at) {
    const SystemModel mdl = model();
    const DomainBox bx = box();
    SampledSignal xhat;
    xhat.times = run.x.times;
    xhat.values.resize(run.x.size(), 2);
    LeftInverseConfig li;
    for (long k = 0; k < run.x.size(); ++k) {
        const double t = run.x.times(k);
        const Eigen::VectorXd z = run.zeta.values.row(k).transpose() + theta_at(t);
        if (auto x = cf.fast_left_inverse(z, t)) {
            xhat.values.row(k) = *x;
        } else {
            const InverseResult inv = left_inverse(cf, z, t, bx, li);
            if (inv.status == InverseStatus::Ok || inv.status == InverseStatus::NonInjective)
                xhat.values.row(k) = inv.x;
            else
                xhat.values.row(k).setConstant(std::nan(""));
        }
    }
    return xhat;
}

}  // namespace

BatchResult run_batch(const Scenario& scn, const EstimatorConfig& cfg) {
    const SystemModel mdl = model();
    static const ClosedFormTransform cf;
    const SimulatedRun run = simulate(scn);
    const RegressionDataset ds = make_dataset(run, cf, mdl);

    BatchResult out;
    out.estimate = batch_estimate(ds, cfg);
    out.theta_true = run.theta_true;
    out.theta_tilde = Eigen::Vector3d(out.estimate.theta_hat) - run.theta_true;
    out.x_true = run.x;
    const Eigen::Vector3d th = out.estimate.theta_hat;
    out.x_hat = reconstruct_table(run, cf, [&](double) { return th; });
    return out;
}

ExpandingResult run_expanding(const Scenario& scn, double update_period,
                              const EstimatorConfig& cfg) {
    const SystemModel mdl = model();
    static const ClosedFormTransform cf;
    const SimulatedRun run = simulate(scn);
    const RegressionDataset ds = make_dataset(run, cf, mdl);

    ExpandingResult out;
    out.update_period = update_period;
    out.estimate = expanding_horizon_estimate(ds, update_period, cfg);
    out.theta_true = run.theta_true;
    out.x_true = run.x;

    // Reconstruct with the newest completed update at each time; the first
    // window's estimate also covers the samples before its update instant.
    const auto& trace = out.estimate.trace;
    out.x_hat = reconstruct_table(run, cf, [&](double t) -> Eigen::Vector3d {
        Eigen::Vector3d th = trace.front().theta_hat;
        for (const auto& e : trace) {
            if (e.t <= t + 1e-12) th = e.theta_hat;
            else break;
        }
        return th;
    });
    return out;
}

}  // namespace pebo::sec6
