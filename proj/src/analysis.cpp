#include "pebo/analysis.hpp"

#include "pebo/linalg.hpp"
#include "pebo/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace pebo {

namespace {

// Flow stencil: X(x,t; t + j*delta) for j in [-half, half], integrated with
// `substeps` RK4 steps per delta interval.
std::vector<Eigen::VectorXd> flow_stencil(const SystemModel& model, const Eigen::VectorXd& x,
                                          double t, double delta, int half, int substeps) {
    std::vector<Eigen::VectorXd> nodes(2 * half + 1);
    nodes[half] = x;
    IntegratorConfig fine{delta / substeps};
    Eigen::VectorXd cur = x;
    for (int j = 1; j <= half; ++j) {
        cur = integrate_flow(model, cur, t + (j - 1) * delta, t + j * delta, fine).endpoint();
        nodes[half + j] = cur;
    }
    cur = x;
    for (int j = 1; j <= half; ++j) {
        cur = integrate_flow(model, cur, t - (j - 1) * delta, t - j * delta, fine).endpoint();
        nodes[half - j] = cur;
    }
    return nodes;
}

// Variational stencil: (X, dX/dx) at the same nodes, dX/dx(x,t;t) = I.
std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> variational_stencil(
    const SystemModel& model, const Eigen::VectorXd& x, double t, double delta, int half,
    int substeps) {
    const int n = model.n;
    std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> nodes(2 * half + 1);
    nodes[half] = {x, Eigen::MatrixXd::Identity(n, n)};
    IntegratorConfig fine{delta / substeps};
    for (int dir : {+1, -1}) {
        Eigen::VectorXd xc = x;
        Eigen::MatrixXd Jc = Eigen::MatrixXd::Identity(n, n);
        for (int j = 1; j <= half; ++j) {
            const double t0 = t + dir * (j - 1) * delta;
            const double t1 = t + dir * j * delta;
            const VariationalFlow vf = variational_flow(model, xc, t0, t1, fine);
            xc = vf.base.endpoint();
            Jc = vf.jac.back() * Jc;  // chain through the previous leg
            nodes[half + dir * j] = {xc, Jc};
        }
    }
    return nodes;
}

// Central difference weights on the +-3 stencil (spacing delta), O(delta^4).
// Row j-1 holds the weights for the j-th derivative.
constexpr double kW1[7] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
constexpr double kW2[7] = {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90};
constexpr double kW3[7] = {1.0 / 8, -1.0, 13.0 / 8, 0.0, -13.0 / 8, 1.0, -1.0 / 8};

Eigen::VectorXd stencil_derivative(const std::vector<Eigen::VectorXd>& nodes, int order,
                                   double delta) {
    const double* w = order == 1 ? kW1 : order == 2 ? kW2 : kW3;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(nodes[0].size());
    for (int i = 0; i < 7; ++i)
        if (w[i] != 0.0) acc += w[i] * nodes[i];
    return acc / std::pow(delta, order);
}

}  // namespace

ObsMatrixResult observability_matrix(const SystemModel& model, const Eigen::VectorXd& x,
                                     double t, int k, const AnalysisConfig& cfg) {
    if (k < 0 || k > 3)
        throw ConfigError("observability_matrix: derivative depth k must be in [0,3]");
    const int n = model.n, p = model.p;

    ObsMatrixResult res;
    res.x = x;
    res.t = t;
    res.k = k;
    res.stacked.resize((k + 1) * p);
    res.jacobian.resize((k + 1) * p, n);
    res.stacked.head(p) = model.eval_h(x);
    res.jacobian.topRows(p) = model.jac_h(x);

    if (k > 0) {
        const int half = 3;
        // Values: j-th s-derivative of h(X(x,t;s)) at s = t.
        const auto xs = flow_stencil(model, x, t, cfg.probe_delta, half, cfg.stencil_substeps);
        std::vector<Eigen::VectorXd> ys(xs.size());
        for (size_t i = 0; i < xs.size(); ++i) ys[i] = model.eval_h(xs[i]);
        // Jacobian rows: same derivatives of dh(X(s)) dX/dx(x,t;s); one
        // differencing level on variational values instead of differencing
        // the stack in x, which would bury sigma_min in noise.
        const auto vs =
            variational_stencil(model, x, t, cfg.probe_delta, half, cfg.stencil_substeps);
        std::vector<Eigen::VectorXd> ms(vs.size());
        for (size_t i = 0; i < vs.size(); ++i) {
            const Eigen::MatrixXd M = model.jac_h(vs[i].first) * vs[i].second;  // p x n
            ms[i] = Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
        }
        for (int j = 1; j <= k; ++j) {
            res.stacked.segment(j * p, p) = stencil_derivative(ys, j, cfg.probe_delta);
            const Eigen::VectorXd mj = stencil_derivative(ms, j, cfg.probe_delta);
            res.jacobian.middleRows(j * p, p) =
                Eigen::Map<const Eigen::MatrixXd>(mj.data(), p, n);
        }
        // differencing noise estimate: machine-level values over delta^k
        const double noise =
            1e-13 / std::pow(cfg.probe_delta, k) * (1.0 + res.stacked.cwiseAbs().maxCoeff());
        res.ill_conditioned = noise > 0.1 * (1.0 + res.jacobian.cwiseAbs().maxCoeff());
    }

    res.singular_values = singular_values(res.jacobian);
    res.rank = svd_rank(res.jacobian, cfg.rank_rel_tol);
    return res;
}

ObsSweepReport observability_sweep(const SystemModel& model,
                                   const std::vector<Eigen::VectorXd>& states, double t,
                                   int k, const AnalysisConfig& cfg) {
    ObsSweepReport rep;
    rep.rows.resize(states.size());
    parallel_for(static_cast<long>(states.size()), [&](long i) {
        const ObsMatrixResult r = observability_matrix(model, states[i], t, k, cfg);
        ObsSweepRow row;
        row.x = states[i];
        row.rank = r.rank;
        row.sigma_min = r.singular_values(r.singular_values.size() - 1);
        row.sigma_max = r.singular_values(0);
        row.det = r.jacobian.rows() == r.jacobian.cols() ? r.jacobian.determinant() : 0.0;
        rep.rows[i] = std::move(row);
    });

    // Refine det sign changes by bisection; applies to square stacks swept
    // along the first state axis only.
    bool sweep_axis0 = (k + 1) * model.p == model.n && rep.rows.size() > 1;
    for (size_t i = 1; sweep_axis0 && i < rep.rows.size(); ++i)
        if ((rep.rows[i].x.tail(model.n - 1) - rep.rows[0].x.tail(model.n - 1)).norm() > 0)
            sweep_axis0 = false;
    if (sweep_axis0) {
        auto det_at = [&](double x1) {
            Eigen::VectorXd x = rep.rows.front().x;
            x(0) = x1;
            const ObsMatrixResult r = observability_matrix(model, x, t, k, cfg);
            return r.jacobian.rows() == r.jacobian.cols() ? r.jacobian.determinant() : 0.0;
        };
        for (size_t i = 1; i < rep.rows.size(); ++i) {
            double a = rep.rows[i - 1].x(0), b = rep.rows[i].x(0);
            double fa = rep.rows[i - 1].det, fb = rep.rows[i].det;
            if (fa == 0.0) rep.det_roots.push_back(a);
            if (fa * fb < 0.0) {
                for (int it = 0; it < 60 && b - a > 1e-9; ++it) {
                    const double m = 0.5 * (a + b);
                    const double fm = det_at(m);
                    if (fm == 0.0) {
                        a = b = m;
                        break;
                    }
                    if (fa * fm < 0.0) {
                        b = m;
                        fb = fm;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                rep.det_roots.push_back(0.5 * (a + b));
            }
        }
        if (!rep.rows.empty() && rep.rows.back().det == 0.0)
            rep.det_roots.push_back(rep.rows.back().x(0));
    }
    return rep;
}

DistinguishabilityProbe distinguishability_probe(
    const SystemModel& model,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs, double t,
    double t_star, const AnalysisConfig& cfg) {
    DistinguishabilityProbe probe;
    probe.pairs = pairs;
    probe.gaps.resize(pairs.size());
    parallel_for(static_cast<long>(pairs.size()), [&](long i) {
        const SampledSignal ya =
            output_along_flow(model, pairs[i].first, t, t - t_star, t, cfg.integrator);
        const SampledSignal yb =
            output_along_flow(model, pairs[i].second, t, t - t_star, t, cfg.integrator);
        probe.gaps[i] = (ya.values - yb.values).cwiseAbs().maxCoeff();
    });
    for (size_t i = 0; i < pairs.size(); ++i) {
        const bool distinct =
            (pairs[i].first - pairs[i].second).cwiseAbs().maxCoeff() > 0.0;
        if (distinct && probe.gaps[i] < probe.threshold)
            probe.violations.push_back(static_cast<int>(i));
    }
    return probe;
}

GramianReport gramian_W_phi(const SystemModel& model, const ObserverDesign& design,
                            const Eigen::VectorXd& x, double T, const GramianConfig& cfg) {
    GramianReport rep;
    rep.x = x;
    rep.t_lower = cfg.t_lower;
    rep.horizon = T;
    const int n = model.n;
    const int nz = design.n_z;

    const int nodes = std::max(2, cfg.outer_nodes);
    std::vector<Eigen::MatrixXd> integrand(nodes);
    std::vector<int> psi_rank(nodes);
    std::vector<double> taus(nodes);
    const double h = cfg.analysis.integrator.step;
    for (int i = 0; i < nodes; ++i) {
        const double tau = cfg.t_lower + (T - cfg.t_lower) * i / (nodes - 1);
        taus[i] = std::round(tau / h) * h;  // snap onto the flow grid
    }

    parallel_for(nodes, [&](long i) {
        const double tau = taus[i];
        Eigen::VectorXd xt = x;
        if (tau > 0.0)
            xt = integrate_flow(model, x, 0.0, tau, cfg.analysis.integrator).endpoint();
        const Eigen::MatrixXd psi =
            eval_phi_jacobian(model, design, xt, tau, cfg.analysis.integrator);
        psi_rank[i] = svd_rank(psi, cfg.analysis.rank_rel_tol);
        const Eigen::MatrixXd G = model.jac_h(xt) * pinv(psi, cfg.analysis.rank_rel_tol);
        integrand[i] = G.transpose() * G;  // n_z x n_z
    });

    rep.W = Eigen::MatrixXd::Zero(nz, nz);
    for (int i = 1; i < nodes; ++i)
        rep.W += 0.5 * (taus[i] - taus[i - 1]) * (integrand[i] + integrand[i - 1]);
    rep.W = 0.5 * (rep.W + rep.W.transpose()).eval();

    int deficient = 0;
    for (int i = 0; i < nodes; ++i)
        if (psi_rank[i] < n) {
            ++deficient;
            rep.deficient_taus.push_back(taus[i]);
        }
    rep.rank_deficient_psi = deficient > cfg.deficient_fraction * nodes;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rep.W);
    rep.eigenvalues = eig.eigenvalues();
    const double emax = rep.eigenvalues.maxCoeff();
    const double emin = rep.eigenvalues.minCoeff();
    // The pseudo-inverse silently drops collapsed state directions, so the
    // eigenvalue test alone cannot flag them; require psi full rank too.
    rep.nonsingular =
        !rep.rank_deficient_psi && emax > 0.0 && emin > cfg.analysis.rank_rel_tol * emax;
    return rep;
}

InjectivitySweep injectivity_sweep(const TransformEvaluator& ev, const DomainBox& box,
                                   const std::vector<double>& t_grid, int grid_per_axis,
                                   const LeftInverseConfig& cfg, double roundtrip_tol) {
    InjectivitySweep sweep;
    sweep.t_grid = t_grid;
    sweep.failure_rate.resize(t_grid.size(), 0.0);

    const int n = ev.state_dim();
    std::vector<Eigen::VectorXd> states;
    std::vector<int> idx(n, 0);
    const long total = static_cast<long>(std::pow(grid_per_axis, n));
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        for (int d = 0; d < n; ++d) {
            idx[d] = static_cast<int>(rem % grid_per_axis);
            rem /= grid_per_axis;
        }
        states.push_back(box.cell_center(idx, grid_per_axis));
    }

    for (size_t ti = 0; ti < t_grid.size(); ++ti) {
        const double t = t_grid[ti];
        std::vector<int> fail(states.size(), 0);
        parallel_for(static_cast<long>(states.size()), [&](long i) {
            const Eigen::VectorXd z = ev.phi(states[i], t);
            const InverseResult inv = left_inverse(ev, z, t, box, cfg);
            const bool ok = inv.status == InverseStatus::Ok &&
                            (inv.x - states[i]).cwiseAbs().maxCoeff() <= roundtrip_tol;
            fail[i] = ok ? 0 : 1;
        });
        long nf = 0;
        for (const int f : fail) nf += f;
        sweep.failure_rate[ti] = static_cast<double>(nf) / states.size();
    }
    for (size_t ti = 0; ti < t_grid.size(); ++ti)
        if (sweep.failure_rate[ti] == 0.0) {
            sweep.t_star_estimate = t_grid[ti];
            break;
        }
    return sweep;
}

}  // namespace pebo
