#include "pebo/system_model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace pebo {

DomainBox::DomainBox(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() == 0)
        throw ConfigError("domain box: lower/upper dimension mismatch");
    for (int i = 0; i < lower.size(); ++i)
        if (!(lower(i) < upper(i)))
            throw ConfigError("domain box: lower must be strictly below upper componentwise");
}

DomainBox DomainBox::cube(int n, double lo, double hi) {
    return DomainBox(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi));
}

bool DomainBox::contains(const Eigen::VectorXd& x, double tol) const {
    for (int i = 0; i < lower.size(); ++i)
        if (x(i) < lower(i) - tol || x(i) > upper(i) + tol) return false;
    return true;
}

Eigen::VectorXd DomainBox::clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
}

Eigen::VectorXd DomainBox::saturate(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out = x;
    for (int i = 0; i < x.size(); ++i) {
        const double w = 0.25 * (upper(i) - lower(i));
        if (x(i) > upper(i)) {
            const double e = x(i) - upper(i);
            out(i) = upper(i) + w * e / (w + e);
        } else if (x(i) < lower(i)) {
            const double e = lower(i) - x(i);
            out(i) = lower(i) - w * e / (w + e);
        }
    }
    return out;
}

Eigen::VectorXd DomainBox::cell_center(const std::vector<int>& idx, int m) const {
    Eigen::VectorXd c(dim());
    for (int i = 0; i < dim(); ++i)
        c(i) = lower(i) + (upper(i) - lower(i)) * (idx[i] + 0.5) / m;
    return c;
}

bool SampledSignal::strictly_increasing() const {
    for (long i = 1; i < size(); ++i)
        if (!(times(i) > times(i - 1))) return false;
    return true;
}

bool SampledSignal::strictly_monotonic() const {
    if (size() < 2) return true;
    const bool inc = times(1) > times(0);
    for (long i = 1; i < size(); ++i) {
        if (inc && !(times(i) > times(i - 1))) return false;
        if (!inc && !(times(i) < times(i - 1))) return false;
    }
    return true;
}

bool SampledSignal::uniform(double tol) const {
    if (size() < 2) return true;
    const double h = times(1) - times(0);
    for (long i = 1; i < size(); ++i)
        if (std::abs(times(i) - times(i - 1) - h) > tol) return false;
    return true;
}

double SampledSignal::step() const { return times(1) - times(0); }

Eigen::VectorXd SampledSignal::at(double t) const {
    if (size() == 1 || t <= times(0)) return values.row(0);
    if (t >= times(size() - 1)) return values.row(size() - 1);
    long lo = 0, hi = size() - 1;
    while (hi - lo > 1) {
        const long mid = (lo + hi) / 2;
        (times(mid) <= t ? lo : hi) = mid;
    }
    const double w = (t - times(lo)) / (times(hi) - times(lo));
    return (1.0 - w) * values.row(lo) + w * values.row(hi);
}

long SampledSignal::index_of(double t) const {
    const long i = std::lround((t - times(0)) / step());
    return std::max(0L, std::min(size() - 1, i));
}

Eigen::VectorXd SystemModel::eval_f(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd out(n);
    f(x, t, out);
    return out;
}

Eigen::VectorXd SystemModel::eval_h(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(p);
    h(x, out);
    return out;
}

namespace {

// Central differences with relative step 1e-6 scaled by 1 + |x_i|.
template <typename Eval>
Eigen::MatrixXd fd_jacobian(const Eval& eval, const Eigen::VectorXd& x, int rows) {
    Eigen::MatrixXd J(rows, x.size());
    Eigen::VectorXd xp = x, xm = x;
    for (int i = 0; i < x.size(); ++i) {
        const double step = 1e-6 * (1.0 + std::abs(x(i)));
        xp(i) = x(i) + step;
        xm(i) = x(i) - step;
        J.col(i) = (eval(xp) - eval(xm)) / (2.0 * step);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return J;
}

}  // namespace

Eigen::MatrixXd SystemModel::jac_f(const Eigen::VectorXd& x, double t) const {
    if (df_dx) {
        Eigen::MatrixXd J(n, n);
        df_dx(x, t, J);
        return J;
    }
    return fd_jacobian([&](const Eigen::VectorXd& xx) { return eval_f(xx, t); }, x, n);
}

Eigen::MatrixXd SystemModel::jac_h(const Eigen::VectorXd& x) const {
    if (dh_dx) {
        Eigen::MatrixXd J(p, n);
        dh_dx(x, J);
        return J;
    }
    return fd_jacobian([&](const Eigen::VectorXd& xx) { return eval_h(xx); }, x, p);
}

namespace {

double eval_component(const PolynomialComponent& comp, const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (const auto& term : comp) {
        double v = term.coeff;
        for (size_t k = 0; k < term.exponents.size(); ++k)
            for (int e = 0; e < term.exponents[k]; ++e) v *= x(static_cast<int>(k));
        acc += v;
    }
    return acc;
}

double eval_component_deriv(const PolynomialComponent& comp, const Eigen::VectorXd& x, int wrt) {
    double acc = 0.0;
    for (const auto& term : comp) {
        const int e = term.exponents[wrt];
        if (e == 0) continue;
        double v = term.coeff * e;
        for (size_t k = 0; k < term.exponents.size(); ++k) {
            const int ek = term.exponents[k] - (static_cast<int>(k) == wrt ? 1 : 0);
            for (int j = 0; j < ek; ++j) v *= x(static_cast<int>(k));
        }
        acc += v;
    }
    return acc;
}

}  // namespace

SystemModel make_polynomial_model(int n, int p,
                                  const std::vector<PolynomialComponent>& f_components,
                                  const std::vector<PolynomialComponent>& h_components) {
    if (static_cast<int>(f_components.size()) != n)
        throw ConfigError("polynomial model: need one f component per state");
    if (static_cast<int>(h_components.size()) != p)
        throw ConfigError("polynomial model: need one h component per output");
    for (const auto& comp : f_components)
        for (const auto& term : comp)
            if (static_cast<int>(term.exponents.size()) != n)
                throw ConfigError("polynomial model: exponent tuple length must equal n");
    for (const auto& comp : h_components)
        for (const auto& term : comp)
            if (static_cast<int>(term.exponents.size()) != n)
                throw ConfigError("polynomial model: exponent tuple length must equal n");

    SystemModel m;
    m.n = n;
    m.p = p;
    m.f = [f_components](const Eigen::VectorXd& x, double, Eigen::VectorXd& out) {
        for (size_t i = 0; i < f_components.size(); ++i)
            out(static_cast<int>(i)) = eval_component(f_components[i], x);
    };
    m.h = [h_components](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        for (size_t i = 0; i < h_components.size(); ++i)
            out(static_cast<int>(i)) = eval_component(h_components[i], x);
    };
    m.df_dx = [f_components, n](const Eigen::VectorXd& x, double, Eigen::MatrixXd& J) {
        for (size_t i = 0; i < f_components.size(); ++i)
            for (int j = 0; j < n; ++j)
                J(static_cast<int>(i), j) = eval_component_deriv(f_components[i], x, j);
    };
    m.dh_dx = [h_components, n](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        for (size_t i = 0; i < h_components.size(); ++i)
            for (int j = 0; j < n; ++j)
                J(static_cast<int>(i), j) = eval_component_deriv(h_components[i], x, j);
    };
    return m;
}

std::string ModelReport::summary() const {
    std::ostringstream os;
    os << (ok ? "ok" : "FAILED") << ": " << points_checked << " points, nonfinite f/h "
       << nonfinite_f << "/" << nonfinite_h << ", worst jacobian mismatch df "
       << worst_df_mismatch << " dh " << worst_dh_mismatch;
    for (const auto& s : failures) os << "\n  " << s;
    return os.str();
}

ModelReport validate_model(const SystemModel& model, const DomainBox& box, double t_lo,
                           double t_hi, const ValidateOptions& opts) {
    ModelReport rep;
    const int g = opts.grid_per_axis;

    // grid scan for NaN/Inf
    std::vector<int> idx(box.dim(), 0);
    const long total = static_cast<long>(std::pow(g, box.dim()));
    for (long flat = 0; flat < total; ++flat) {
        long rem = flat;
        for (int d = 0; d < box.dim(); ++d) {
            idx[d] = static_cast<int>(rem % g);
            rem /= g;
        }
        const Eigen::VectorXd x = box.cell_center(idx, g);
        for (int ti = 0; ti < opts.time_samples; ++ti) {
            const double t =
                t_lo + (t_hi - t_lo) * ti / std::max(1, opts.time_samples - 1);
            ++rep.points_checked;
            if (!all_finite(model.eval_f(x, t))) {
                ++rep.nonfinite_f;
                if (rep.failures.size() < 8) {
                    std::ostringstream os;
                    os << "f nonfinite at x=[" << x.transpose() << "], t=" << t;
                    rep.failures.push_back(os.str());
                }
            }
        }
        if (!all_finite(model.eval_h(x))) {
            ++rep.nonfinite_h;
            if (rep.failures.size() < 8) {
                std::ostringstream os;
                os << "h nonfinite at x=[" << x.transpose() << "]";
                rep.failures.push_back(os.str());
            }
        }
    }

    // Jacobian self-consistency at random domain points
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto rand_point = [&] {
        Eigen::VectorXd x(box.dim());
        for (int i = 0; i < box.dim(); ++i)
            x(i) = box.lower(i) + (box.upper(i) - box.lower(i)) * unit(rng);
        return x;
    };
    auto rel_err = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return (a - b).norm() / (1.0 + b.norm());
    };
    for (int k = 0; k < opts.jacobian_samples; ++k) {
        const Eigen::VectorXd x = rand_point();
        const double t = t_lo + (t_hi - t_lo) * unit(rng);
        if (model.has_analytic_df()) {
            SystemModel fd_only = model;
            fd_only.df_dx = nullptr;
            rep.worst_df_mismatch =
                std::max(rep.worst_df_mismatch, rel_err(model.jac_f(x, t), fd_only.jac_f(x, t)));
        }
        if (model.has_analytic_dh()) {
            SystemModel fd_only = model;
            fd_only.dh_dx = nullptr;
            rep.worst_dh_mismatch =
                std::max(rep.worst_dh_mismatch, rel_err(model.jac_h(x), fd_only.jac_h(x)));
        }
    }
    if (rep.worst_df_mismatch > opts.jacobian_rel_tol)
        rep.failures.push_back("df_dx disagrees with central differences");
    if (rep.worst_dh_mismatch > opts.jacobian_rel_tol)
        rep.failures.push_back("dh_dx disagrees with central differences");

    rep.ok = rep.nonfinite_f == 0 && rep.nonfinite_h == 0 &&
             rep.worst_df_mismatch <= opts.jacobian_rel_tol &&
             rep.worst_dh_mismatch <= opts.jacobian_rel_tol;
    return rep;
}

}  // namespace pebo
