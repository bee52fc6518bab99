#include "pebo/estimation.hpp"

#include <algorithm>
#include <cmath>

namespace pebo {

RegressionDataset RegressionDataset::prefix(long count) const {
    RegressionDataset out = *this;
    out.times = times.head(count);
    out.y = y.topRows(count);
    out.zeta = zeta.topRows(count);
    return out;
}

std::vector<long> cost_node_indices(long n_samples, int max_nodes) {
    std::vector<long> idx;
    if (n_samples <= 0) return idx;
    max_nodes = std::max(2, max_nodes);
    const long stride = std::max(1L, (n_samples - 1 + (max_nodes - 2)) / (max_nodes - 1));
    for (long i = 0; i < n_samples; i += stride) idx.push_back(i);
    if (idx.back() != n_samples - 1) idx.push_back(n_samples - 1);
    return idx;
}

namespace {

// Residual y_k - h(x(zeta_k + theta, t_k)); failed inversions contribute the
// large finite penalty instead of aborting. The previous node's solution
// seeds the numeric inverse (state continuity along the window).
double node_squared_residual(const RegressionDataset& ds, long k,
                             const Eigen::VectorXd& theta, const EstimatorConfig& cfg,
                             std::optional<Eigen::VectorXd>& carry) {
    const Eigen::VectorXd z = ds.zeta.row(k).transpose() + theta;
    const double t = ds.times(k);
    const double penalty = 1e6 * (1.0 + z.squaredNorm());

    Eigen::VectorXd xhat;
    if (auto state = ds.evaluator->regression_state(z, t)) {
        if (cfg.constrained && !ds.box.contains(*state, 1e-12)) return penalty;
        // the left inverse is an argmin over cl(X); samples whose analytic
        // preimage escapes the box are scored near the boundary, which keeps
        // the off-valley walls bounded and crossable
        xhat = ds.box.saturate(*state);
    } else {
        LeftInverseConfig li = cfg.inverse;
        li.hint = carry;
        li.hint_only = carry.has_value();
        const InverseResult inv = left_inverse(*ds.evaluator, z, t, ds.box, li);
        if (inv.status == InverseStatus::NoSolution ||
            inv.status == InverseStatus::Singular)
            return penalty;
        xhat = inv.x;
    }
    carry = xhat;
    const Eigen::VectorXd r = ds.y.row(k).transpose() - ds.model->eval_h(xhat);
    const double r2 = r.squaredNorm();
    return std::isfinite(r2) ? r2 : penalty;  // overflow past the singular set
}

}  // namespace

double cost_J(const RegressionDataset& ds, const Eigen::VectorXd& theta_hat,
              const EstimatorConfig& cfg) {
    if (ds.size() == 0) throw ConfigError("cost_J: empty dataset");
    std::optional<Eigen::VectorXd> carry;
    if (ds.size() == 1) return node_squared_residual(ds, 0, theta_hat, cfg, carry);

    const std::vector<long> nodes = cost_node_indices(ds.size(), cfg.max_cost_nodes);
    double J = 0.0;
    double prev_t = 0.0, prev_v = 0.0;
    bool first = true;
    for (const long k : nodes) {
        const double v = node_squared_residual(ds, k, theta_hat, cfg, carry);
        const double t = ds.times(k);
        if (!first) J += 0.5 * (t - prev_t) * (v + prev_v);
        prev_t = t;
        prev_v = v;
        first = false;
    }
    return J;
}

EstimationResult nelder_mead_estimate(const CostFn& cost, const Eigen::VectorXd& theta0,
                                      const EstimatorConfig& cfg) {
    if (cfg.max_evals < theta0.size() + 1)
        throw ConfigError("estimator: max_evals must cover the initial simplex");
    NmOptions opts;
    opts.max_evals = cfg.max_evals;
    opts.diam_tol = cfg.diam_tol;
    opts.fspread_tol = cfg.fspread_tol;
    // polish-scale start: warm/seeded guesses sit inside valleys that are far
    // narrower than the fminsearch 5% simplex; expansion recovers scale when
    // the guess is crude
    opts.init_rel = 1e-4;
    opts.init_abs = 1e-6;
    const NmResult r = nelder_mead(cost, theta0, opts);

    EstimationResult out;
    out.theta_hat = r.x;
    out.cost = r.fmin;
    out.evals = r.evals;
    out.hit_max_evals = r.hit_max_evals;
    return out;
}

namespace {

// Default seed when no initial guess is supplied. The offset lies in the
// feasible set { phi(x_c, t_c) - zeta(t_c) : x_c in X }. Searching that set
// in its x_c chart sidesteps the needle geometry of theta space: at t_c the
// reconstruction returns x_c itself, so chart residuals are plain
// output-matching terms without the amplification of the transform inverse.
// The chart cost is nonconvex (symmetric preimages of the output map), so a
// grid scan picks the few best separated cells and a short simplex run
// refines each; the winner seeds the theta solve.
Eigen::VectorXd seed_theta(const RegressionDataset& ds, const EstimatorConfig& cfg) {
    const int n = ds.evaluator->state_dim();
    const double t_c = ds.times(0);
    const Eigen::VectorXd zeta_c = ds.zeta.row(0).transpose();

    auto theta_of = [&](const Eigen::VectorXd& xc) {
        return (ds.evaluator->phi(ds.box.clamp(xc), t_c) - zeta_c).eval();
    };
    auto chart_cost = [&](const Eigen::VectorXd& xc) {
        return cost_J(ds, theta_of(xc), cfg) +
               1e3 * (xc - ds.box.clamp(xc)).squaredNorm();
    };

    struct Cell {
        double cost;
        std::vector<int> idx;
        Eigen::VectorXd xc;
    };
    std::vector<Cell> cells;
    const int per_axis = n <= 2 ? 21 : 7;
    std::vector<int> idx(n, 0);
    const long total = static_cast<long>(std::pow(per_axis, n));
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        for (int d = 0; d < n; ++d) {
            idx[d] = static_cast<int>(rem % per_axis);
            rem /= per_axis;
        }
        const Eigen::VectorXd xc = ds.box.cell_center(idx, per_axis);
        cells.push_back({chart_cost(xc), idx, xc});
    }

    // deep-but-narrow basins scan high, so rank candidates by being a grid
    // local minimum rather than by raw cost
    std::vector<Cell> starts;
    for (long flat = 0; flat < total; ++flat) {
        bool is_min = true;
        for (int d = 0; d < n && is_min; ++d)
            for (int delta : {-1, +1}) {
                const int ni = cells[flat].idx[d] + delta;
                if (ni < 0 || ni >= per_axis) continue;
                long nflat = flat + delta * static_cast<long>(std::pow(per_axis, d));
                if (cells[nflat].cost < cells[flat].cost) {
                    is_min = false;
                    break;
                }
            }
        if (is_min) starts.push_back(cells[flat]);
    }
    std::sort(starts.begin(), starts.end(),
              [](const Cell& a, const Cell& b) { return a.cost < b.cost; });
    if (starts.size() > 12) starts.resize(12);

    NmOptions nm;
    nm.max_evals = 600L * n;
    nm.diam_tol = 1e-10;
    nm.fspread_tol = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta = Eigen::VectorXd::Zero(ds.zeta.cols());
    double best_cost = cost_J(ds, best_theta, cfg);
    for (const auto& s : starts) {
        const NmResult r = nelder_mead(chart_cost, s.xc, nm);
        const Eigen::VectorXd th = theta_of(r.x);
        const double c = cost_J(ds, th, cfg);
        if (c < best_cost) {
            best_cost = c;
            best_theta = th;
        }
    }
    return best_theta;
}

}  // namespace

EstimationResult batch_estimate(const RegressionDataset& ds, const EstimatorConfig& cfg) {
    Eigen::VectorXd theta0 = cfg.theta0;
    if (theta0.size() == 0) theta0 = seed_theta(ds, cfg);
    EstimationResult r = nelder_mead_estimate(
        [&](const Eigen::VectorXd& th) { return cost_J(ds, th, cfg); }, theta0, cfg);
    r.trace.push_back({ds.times(ds.size() - 1), r.theta_hat, r.cost});
    return r;
}

EstimationResult expanding_horizon_estimate(const RegressionDataset& full,
                                            double update_period,
                                            const EstimatorConfig& cfg) {
    if (full.size() < 2) throw ConfigError("expanding horizon: dataset too small");
    const double grid_dt = full.times(1) - full.times(0);
    const long per_update = std::lround(update_period / grid_dt);
    if (per_update < 1 || std::abs(per_update * grid_dt - update_period) > 1e-9)
        throw ConfigError("expanding horizon: update period must divide the grid");

    EstimationResult agg;
    // the first window follows the same default policy as a fresh batch
    // solve (seed when no guess is given); later windows warm start
    Eigen::VectorXd warm = cfg.theta0;

    for (long end = per_update; ; end += per_update) {
        const long count = std::min(end + 1, full.size());
        const RegressionDataset window = full.prefix(count);
        EstimatorConfig step_cfg = cfg;
        step_cfg.theta0 = warm;
        EstimationResult r = batch_estimate(window, step_cfg);
        agg.evals += r.evals;
        agg.hit_max_evals = agg.hit_max_evals || r.hit_max_evals;
        agg.theta_hat = r.theta_hat;
        agg.cost = r.cost;
        agg.trace.push_back({window.times(count - 1), r.theta_hat, r.cost});
        warm = r.theta_hat;
        if (count == full.size()) break;
    }
    return agg;
}

InverseResult reconstruct_state(const TransformEvaluator& ev, const Eigen::VectorXd& zeta,
                                const Eigen::VectorXd& theta_hat, double t,
                                const DomainBox& box, const LeftInverseConfig& cfg) {
    const Eigen::VectorXd z = zeta + theta_hat;
    if (auto fast = ev.fast_left_inverse(z, t)) {
        InverseResult r;
        r.status = InverseStatus::Ok;
        r.x = *fast;
        r.cost = (z - ev.phi(*fast, t)).squaredNorm();
        r.clusters = 1;
        return r;
    }
    return left_inverse(ev, z, t, box, cfg);
}

}  // namespace pebo
