#include "pebo/transform.hpp"

#include "pebo/linalg.hpp"
#include "pebo/nelder_mead.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

namespace pebo {

OutputMap OutputMap::identity(int p) {
    OutputMap m;
    m.name = "identity";
    m.fn = [](const Eigen::VectorXd& y, double, Eigen::VectorXd& out) { out = y; };
    m.jac_y = [p](const Eigen::VectorXd&, double, Eigen::MatrixXd& J) {
        J = Eigen::MatrixXd::Identity(p, p);
    };
    m.inverse = [](const Eigen::VectorXd& w, double, Eigen::VectorXd& y) { y = w; };
    return m;
}

OutputMap OutputMap::exp_decay(int p, double rho) {
    OutputMap m;
    m.name = "exp_decay";
    m.fn = [rho](const Eigen::VectorXd& y, double t, Eigen::VectorXd& out) {
        out = std::exp(-rho * t) * y;
    };
    m.jac_y = [p, rho](const Eigen::VectorXd&, double t, Eigen::MatrixXd& J) {
        J = std::exp(-rho * t) * Eigen::MatrixXd::Identity(p, p);
    };
    m.inverse = [rho](const Eigen::VectorXd& w, double t, Eigen::VectorXd& y) {
        y = std::exp(rho * t) * w;
    };
    return m;
}

Eigen::VectorXd OutputMap::eval(const Eigen::VectorXd& y, double t) const {
    Eigen::VectorXd out(y.size());
    fn(y, t, out);
    return out;
}

Eigen::MatrixXd OutputMap::jacobian(const Eigen::VectorXd& y, double t) const {
    Eigen::MatrixXd J(y.size(), y.size());
    if (jac_y) {
        jac_y(y, t, J);
        return J;
    }
    Eigen::VectorXd yp = y, ym = y, fp(y.size()), fm(y.size());
    for (int i = 0; i < y.size(); ++i) {
        const double step = 1e-6 * (1.0 + std::abs(y(i)));
        yp(i) += step;
        ym(i) -= step;
        fn(yp, t, fp);
        fn(ym, t, fm);
        J.col(i) = (fp - fm) / (2.0 * step);
        yp(i) = y(i);
        ym(i) = y(i);
    }
    return J;
}

Eigen::VectorXd ObserverDesign::beta(const Eigen::VectorXd& y, double t) const {
    const Eigen::VectorXd bh = B * H.eval(y, t);
    if (diagonal_A) return exp_minus_At_diagonal(t).cwiseProduct(bh);
    return expm(-A * t) * bh;
}

Eigen::MatrixXd ObserverDesign::exp_minus_At(double t) const {
    if (diagonal_A) return exp_minus_At_diagonal(t).asDiagonal();
    return expm(-A * t);
}

Eigen::VectorXd ObserverDesign::exp_minus_At_diagonal(double t) const {
    Eigen::VectorXd d(n_z);
    for (int i = 0; i < n_z; ++i) d(i) = std::exp(-A(i, i) * t);
    return d;
}

namespace {

// Round-trip spot check of H's bijectivity when an inverse is supplied.
void check_output_map(const OutputMap& H, int p) {
    if (!H.inverse) return;
    Eigen::VectorXd y(p), w(p), back(p);
    for (const double t : {0.0, 0.4, 1.3}) {
        for (int i = 0; i < p; ++i) y(i) = 0.3 + 0.7 * i - 0.2 * t;
        H.fn(y, t, w);
        H.inverse(w, t, back);
        if ((back - y).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + y.cwiseAbs().maxCoeff()))
            throw ConfigError("output map: inverse does not round-trip H at t=" +
                              std::to_string(t));
    }
}

}  // namespace

ObserverDesign make_design(int n, int p, const Eigen::VectorXd& lambdas, double rho,
                           OutputMap H) {
    check_output_map(H, p);
    if (lambdas.size() != n + 1) {
        std::ostringstream os;
        os << "make_design: need n+1 = " << n + 1 << " eigenvalues, got " << lambdas.size();
        throw BadEigenvalue(os.str());
    }
    for (int i = 0; i < lambdas.size(); ++i)
        if (!(lambdas(i) < 0.0)) {
            std::ostringstream os;
            os << "make_design: lambda_" << i + 1 << " = " << lambdas(i)
               << " is not in the open left half-plane";
            throw BadEigenvalue(os.str());
        }

    ObserverDesign d;
    d.n = n;
    d.p = p;
    d.n_z = p * (n + 1);
    d.lambdas = lambdas;
    d.rho = rho;
    d.H = std::move(H);
    d.A = Eigen::MatrixXd::Zero(d.n_z, d.n_z);
    d.B = Eigen::MatrixXd::Zero(d.n_z, p);
    for (int blk = 0; blk < p; ++blk) {
        for (int i = 0; i <= n; ++i) {
            const int r = blk * (n + 1) + i;
            d.A(r, r) = lambdas(i);
            d.B(r, blk) = 1.0;
        }
    }
    d.diagonal_A = true;
    return d;
}

Eigen::VectorXd jitter_lambdas(const Eigen::VectorXd& lambdas, double amount,
                               unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amount, amount);
    Eigen::VectorXd out = lambdas;
    for (int i = 0; i < out.size(); ++i) out(i) *= 1.0 + u(rng);
    return out;
}

const char* to_string(InverseStatus s) {
    switch (s) {
        case InverseStatus::Ok: return "Ok";
        case InverseStatus::NonInjective: return "NonInjective";
        case InverseStatus::NoSolution: return "NoSolution";
        case InverseStatus::Singular: return "Singular";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Quadrature construction
// ---------------------------------------------------------------------------

namespace {

std::atomic<bool> growth_warned{false};

void warn_growth(const ObserverDesign& design, double t) {
    if (design.rho != 0.0) return;
    const double worst = design.lambdas.cwiseAbs().maxCoeff() * t;
    if (worst > 10.0 && !growth_warned.exchange(true))
        std::cerr << "pebo: warning: e^{-At} grows like e^" << worst
                  << " on this horizon; set rho > -min Re(lambda) to keep the "
                     "extension bounded\n";
}

// Walks the backward flow from (x,t) to 0 on the step grid, invoking
// node(s_k, x_k, w_k) with trapezoid weights. No allocation inside the loop.
template <typename Node>
void backward_pass(const SystemModel& model, const Eigen::VectorXd& x, double t,
                   double step, const Node& node) {
    const long nsteps = detail::step_count(t, 0.0, step);
    if (nsteps == 0) return;
    Eigen::VectorXd xc = x, k1(model.n), k2(model.n), k3(model.n), k4(model.n),
                    tmp(model.n);
    auto deriv = [&](const Eigen::VectorXd& xx, double tau, Eigen::VectorXd& out) {
        model.f(xx, t - tau, out);
        out = -out;
    };
    for (long i = 0;; ++i) {
        const double s = t - i * step;
        node(s, xc, (i == 0 || i == nsteps) ? 0.5 * step : step);
        if (i == nsteps) break;
        const double tau = i * step;
        deriv(xc, tau, k1);
        tmp = xc + 0.5 * step * k1;
        deriv(tmp, tau + 0.5 * step, k2);
        tmp = xc + 0.5 * step * k2;
        deriv(tmp, tau + 0.5 * step, k3);
        tmp = xc + step * k3;
        deriv(tmp, tau + step, k4);
        xc += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!xc.allFinite()) throw NonFiniteError("backward flow produced NaN/Inf");
    }
}

// Backward pass with the variational system attached: node(s, x, J, w) where
// J = dX/dx(x,t;s).
template <typename Node>
void backward_variational_pass(const SystemModel& model, const Eigen::VectorXd& x,
                               double t, double step, const Node& node) {
    const int n = model.n;
    const long nsteps = detail::step_count(t, 0.0, step);
    if (nsteps == 0) return;
    const int dim = n + n * n;
    Eigen::VectorXd v(dim), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    v.head(n) = x;
    Eigen::Map<Eigen::MatrixXd>(v.data() + n, n, n) = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd fx(n);
    auto deriv = [&](const Eigen::VectorXd& vv, double tau, Eigen::VectorXd& out) {
        const Eigen::VectorXd xx = vv.head(n);
        model.f(xx, t - tau, fx);
        out.head(n) = -fx;
        const Eigen::MatrixXd df = model.jac_f(xx, t - tau);
        Eigen::Map<const Eigen::MatrixXd> J(vv.data() + n, n, n);
        Eigen::Map<Eigen::MatrixXd>(out.data() + n, n, n).noalias() = -(df * J);
    };
    for (long i = 0;; ++i) {
        const double s = t - i * step;
        Eigen::Map<const Eigen::MatrixXd> J(v.data() + n, n, n);
        node(s, v.head(n), J, (i == 0 || i == nsteps) ? 0.5 * step : step);
        if (i == nsteps) break;
        const double tau = i * step;
        deriv(v, tau, k1);
        tmp = v + 0.5 * step * k1;
        deriv(tmp, tau + 0.5 * step, k2);
        tmp = v + 0.5 * step * k2;
        deriv(tmp, tau + 0.5 * step, k3);
        tmp = v + step * k3;
        deriv(tmp, tau + step, k4);
        v += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!v.allFinite()) throw NonFiniteError("variational backward flow produced NaN/Inf");
    }
}

}  // namespace

Eigen::VectorXd eval_phi(const SystemModel& model, const ObserverDesign& design,
                         const Eigen::VectorXd& x, double t, const IntegratorConfig& cfg) {
    warn_growth(design, t);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(design.n_z);
    Eigen::VectorXd y(model.p), Hy(model.p), bh(design.n_z);
    backward_pass(model, x, t, cfg.step,
                  [&](double s, const Eigen::VectorXd& xs, double w) {
                      model.h(xs, y);
                      design.H.fn(y, s, Hy);
                      bh.noalias() = design.B * Hy;
                      if (design.diagonal_A) {
                          for (int i = 0; i < design.n_z; ++i)
                              phi(i) += w * std::exp(-design.A(i, i) * s) * bh(i);
                      } else {
                          phi += w * (expm(-design.A * s) * bh);
                      }
                  });
    if (!phi.allFinite()) throw NonFiniteError("phi quadrature produced NaN/Inf");
    return phi;
}

Eigen::VectorXd eval_T(const SystemModel& model, const ObserverDesign& design,
                       const Eigen::VectorXd& x, double t, const IntegratorConfig& cfg) {
    // T = e^{At} phi; with commuting exponentials this equals the direct
    // integral of e^{A(t-s)} B H(y(s), s).
    const Eigen::VectorXd phi = eval_phi(model, design, x, t, cfg);
    if (design.diagonal_A) {
        Eigen::VectorXd T(design.n_z);
        for (int i = 0; i < design.n_z; ++i) T(i) = std::exp(design.A(i, i) * t) * phi(i);
        return T;
    }
    return expm(design.A * t) * phi;
}

Eigen::MatrixXd eval_phi_jacobian(const SystemModel& model, const ObserverDesign& design,
                                  const Eigen::VectorXd& x, double t,
                                  const IntegratorConfig& cfg) {
    warn_growth(design, t);
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(design.n_z, model.n);
    Eigen::VectorXd y(model.p);
    Eigen::MatrixXd dh(model.p, model.n), M(model.p, model.n), BM(design.n_z, model.n);
    backward_variational_pass(
        model, x, t, cfg.step,
        [&](double s, const Eigen::Ref<const Eigen::VectorXd>& xs,
            const Eigen::Map<const Eigen::MatrixXd>& J, double w) {
            model.h(xs, y);
            dh = model.jac_h(xs);
            M.noalias() = design.H.jacobian(y, s) * (dh * J);
            BM.noalias() = design.B * M;
            if (design.diagonal_A) {
                for (int i = 0; i < design.n_z; ++i)
                    psi.row(i) += (w * std::exp(-design.A(i, i) * s)) * BM.row(i);
            } else {
                psi += w * (expm(-design.A * s) * BM);
            }
        });
    if (!psi.allFinite()) throw NonFiniteError("phi jacobian quadrature produced NaN/Inf");
    return psi;
}

// ---------------------------------------------------------------------------
// Left inverse
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
    double cost;
    Eigen::VectorXd x;
};

// Clusters are co-minimal rivals of the best one only when their cost is
// within a fixed factor (argmin uniqueness is about equal minimal values);
// the quantum term absorbs costs indistinguishable from zero in doubles.
constexpr double kCoMinimalFactor = 64.0;

}  // namespace

InverseResult left_inverse(const TransformEvaluator& ev, const Eigen::VectorXd& z,
                           double t, const DomainBox& box, const LeftInverseConfig& cfg) {
    const int n = ev.state_dim();
    const double z2 = z.squaredNorm();
    const double floor = cfg.tol_cost * (1.0 + z2);
    const double penalty_scale = 1e6 * (1.0 + z2);

    auto cost = [&](const Eigen::VectorXd& xc) {
        const Eigen::VectorXd xb = box.clamp(xc);
        const double pen = (xc - xb).squaredNorm();
        return (z - ev.phi(xb, t)).squaredNorm() + penalty_scale * pen;
    };

    NmOptions nm;
    // 600n rather than the reference solver's 200n: near the injectivity
    // onset the cost valley is flat enough that starts need the extra budget
    // to reach the floor at all
    nm.max_evals = cfg.max_evals_per_start > 0 ? cfg.max_evals_per_start : 600L * n;
    nm.diam_tol = 1e-10;
    nm.fspread_tol = std::numeric_limits<double>::infinity();  // diameter-only stop
    nm.stop_below = 1e-22 * (1.0 + z2) * (1.0 + z2);  // resolution floor

    std::vector<Eigen::VectorXd> seeds;
    if (cfg.hint) seeds.push_back(*cfg.hint);
    if (!cfg.hint_only) {
        const int per_axis =
            std::max(1, static_cast<int>(std::ceil(std::pow(double(cfg.starts), 1.0 / n))));
        std::vector<int> idx(n, 0);
        const long total = static_cast<long>(std::pow(per_axis, n));
        for (long flat = 0; flat < total; ++flat) {
            long rem = flat;
            for (int d = 0; d < n; ++d) {
                idx[d] = static_cast<int>(rem % per_axis);
                rem /= per_axis;
            }
            seeds.push_back(box.cell_center(idx, per_axis));
        }
    }

    InverseResult result;
    std::vector<Candidate> candidates;
    for (const auto& seed : seeds) {
        NmResult r = nelder_mead(cost, seed, nm);
        if (cfg.polish && r.fmin > nm.stop_below) {
            NmOptions pol = nm;
            pol.max_evals = 200L * n;
            pol.diam_tol = 1e-12;
            NmResult r2 = nelder_mead(cost, r.x, pol);
            result.evals += r2.evals;
            if (r2.fmin < r.fmin) r = r2;
        }
        result.evals += r.evals;
        if (r.fmin <= floor) candidates.push_back({r.fmin, box.clamp(r.x)});
    }

    if (candidates.empty()) {
        result.status = InverseStatus::NoSolution;
        return result;
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return a.cost < b.cost;
    });
    const double best = candidates.front().cost;
    const double eps_z = std::numeric_limits<double>::epsilon() * (1.0 + z2);
    // anything that reached the early-exit floor is as deep as it was asked
    // to go and must count as a rival of an exactly-zero best
    const double co_minimal = std::max(
        {kCoMinimalFactor * best, 4.0 * nm.stop_below, 16.0 * eps_z * eps_z});

    std::vector<std::vector<Eigen::VectorXd>> clusters;
    for (const auto& c : candidates) {
        if (c.cost > co_minimal) continue;
        bool placed = false;
        for (auto& cl : clusters) {
            for (const auto& member : cl)
                if ((c.x - member).cwiseAbs().maxCoeff() < cfg.cluster_radius) {
                    placed = true;
                    break;
                }
            if (placed) {
                cl.push_back(c.x);
                break;
            }
        }
        if (!placed) clusters.push_back({c.x});
    }

    result.x = candidates.front().x;
    result.cost = best;
    result.clusters = static_cast<int>(clusters.size());
    result.status =
        clusters.size() > 1 ? InverseStatus::NonInjective : InverseStatus::Ok;
    return result;
}

Eigen::VectorXd pde_residual(const TransformEvaluator& ev, const SystemModel& model,
                             const ObserverDesign& design, const Eigen::VectorXd& x,
                             double t, double dt_diff) {
    if (t - dt_diff < 0.0) throw ConfigError("pde_residual: need t - dt_diff >= 0");
    const Eigen::VectorXd dphi_dt =
        (ev.phi(x, t + dt_diff) - ev.phi(x, t - dt_diff)) / (2.0 * dt_diff);
    const Eigen::VectorXd fx = model.eval_f(x, t);
    const Eigen::VectorXd conv = ev.phi_jacobian(x, t) * fx;
    const Eigen::VectorXd b = design.beta(model.eval_h(x), t);
    return dphi_dt + conv - b;
}

// ---------------------------------------------------------------------------
// QuadratureTransform
// ---------------------------------------------------------------------------

QuadratureTransform::QuadratureTransform(SystemModel model, ObserverDesign design,
                                         IntegratorConfig cfg)
    : model_(std::move(model)), design_(std::move(design)), cfg_(cfg) {}

std::shared_ptr<const Eigen::MatrixXd> QuadratureTransform::exp_factors(double t) const {
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = exp_cache_.find(t);
        if (it != exp_cache_.end()) return it->second;
    }
    const long nsteps = detail::step_count(t, 0.0, cfg_.step);
    auto F = std::make_shared<Eigen::MatrixXd>(design_.n_z, nsteps + 1);
    for (long k = 0; k <= nsteps; ++k)
        F->col(k) = design_.exp_minus_At_diagonal(t - k * cfg_.step);
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (exp_cache_.size() > 32) exp_cache_.clear();
    exp_cache_[t] = F;
    return F;
}

Eigen::VectorXd QuadratureTransform::phi(const Eigen::VectorXd& x, double t) const {
    const CacheKey key = make_key(x, t);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end() && it->second.phi) return *it->second.phi;
    }
    Eigen::VectorXd value;
    if (design_.diagonal_A) {
        const auto F = exp_factors(t);
        warn_growth(design_, t);
        value = Eigen::VectorXd::Zero(design_.n_z);
        Eigen::VectorXd y(model_.p), Hy(model_.p), bh(design_.n_z);
        backward_pass(model_, x, t, cfg_.step,
                      [&](double s, const Eigen::VectorXd& xs, double w) {
                          model_.h(xs, y);
                          design_.H.fn(y, s, Hy);
                          bh.noalias() = design_.B * Hy;
                          const long k = std::lround((t - s) / cfg_.step);
                          value.noalias() += w * F->col(k).cwiseProduct(bh);
                      });
        if (!value.allFinite()) throw NonFiniteError("phi quadrature produced NaN/Inf");
    } else {
        value = eval_phi(model_, design_, x, t, cfg_);
    }
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_.size() > kCacheCap) cache_.clear();
    cache_[key].phi = value;
    return value;
}

Eigen::MatrixXd QuadratureTransform::phi_jacobian(const Eigen::VectorXd& x, double t) const {
    const CacheKey key = make_key(x, t);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end() && it->second.psi) return *it->second.psi;
    }
    Eigen::MatrixXd value = eval_phi_jacobian(model_, design_, x, t, cfg_);
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_.size() > kCacheCap) cache_.clear();
    cache_[key].psi = value;
    return value;
}

Eigen::VectorXd QuadratureTransform::T(const Eigen::VectorXd& x, double t) const {
    const Eigen::VectorXd ph = phi(x, t);
    if (design_.diagonal_A) {
        Eigen::VectorXd T(design_.n_z);
        for (int i = 0; i < design_.n_z; ++i) T(i) = std::exp(design_.A(i, i) * t) * ph(i);
        return T;
    }
    return expm(design_.A * t) * ph;
}

QuadratureTransform::CacheKey QuadratureTransform::make_key(const Eigen::VectorXd& x,
                                                            double t) const {
    CacheKey key;
    key.reserve(x.size() + 2);
    key.push_back(t);
    key.push_back(cfg_.step);
    for (int i = 0; i < x.size(); ++i) key.push_back(x(i));
    return key;
}

}  // namespace pebo
