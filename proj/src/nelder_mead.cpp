#include "pebo/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pebo {

Eigen::MatrixXd initial_simplex(const Eigen::VectorXd& x0, double init_rel,
                                double init_abs) {
    const int n = static_cast<int>(x0.size());
    Eigen::MatrixXd S(n + 1, n);
    S.row(0) = x0;
    for (int i = 0; i < n; ++i) {
        S.row(i + 1) = x0;
        S(i + 1, i) = x0(i) != 0.0 ? (1.0 + init_rel) * x0(i) : init_abs;
    }
    return S;
}

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
    }
    return false;
}

}  // namespace

NmResult nelder_mead(const CostFn& cost, const Eigen::VectorXd& x0, const NmOptions& opts) {
    const int n = static_cast<int>(x0.size());
    Eigen::MatrixXd S = initial_simplex(x0, opts.init_rel, opts.init_abs);
    std::vector<Eigen::VectorXd> pts(n + 1);
    std::vector<double> fs(n + 1);
    for (int i = 0; i <= n; ++i) {
        pts[i] = S.row(i);
        fs[i] = cost(pts[i]);
    }
    long evals = n + 1;

    std::vector<int> order(n + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (fs[a] != fs[b]) return fs[a] < fs[b];
            return lex_less(pts[a], pts[b]);  // deterministic tie-break
        });
        std::vector<Eigen::VectorXd> p2(n + 1);
        std::vector<double> f2(n + 1);
        for (int i = 0; i <= n; ++i) {
            p2[i] = pts[order[i]];
            f2[i] = fs[order[i]];
        }
        pts.swap(p2);
        fs.swap(f2);
    };

    bool hit_max = false;
    while (true) {
        sort_simplex();
        if (fs[0] <= opts.stop_below) break;
        double diam = 0.0;
        for (int i = 1; i <= n; ++i)
            diam = std::max(diam, (pts[i] - pts[0]).cwiseAbs().maxCoeff());
        const double spread = std::abs(fs[n] - fs[0]);
        if (diam < opts.diam_tol && spread < opts.fspread_tol) break;
        if (evals >= opts.max_evals) {
            hit_max = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) centroid += pts[i];
        centroid /= n;

        const Eigen::VectorXd xr = centroid + 1.0 * (centroid - pts[n]);
        const double fr = cost(xr);
        ++evals;

        if (fr < fs[0]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[n]);
            const double fe = cost(xe);
            ++evals;
            if (fe < fr) {
                pts[n] = xe;
                fs[n] = fe;
            } else {
                pts[n] = xr;
                fs[n] = fr;
            }
        } else if (fr < fs[n - 1]) {
            pts[n] = xr;
            fs[n] = fr;
        } else {
            Eigen::VectorXd xc;
            if (fr < fs[n])
                xc = centroid + 0.5 * (xr - centroid);  // outside contraction
            else
                xc = centroid + 0.5 * (pts[n] - centroid);  // inside contraction
            const double fc = cost(xc);
            ++evals;
            if (fc < std::min(fr, fs[n])) {
                pts[n] = xc;
                fs[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
                    fs[i] = cost(pts[i]);
                }
                evals += n;
            }
        }
    }

    sort_simplex();
    NmResult r;
    r.x = pts[0];
    r.fmin = fs[0];
    r.evals = evals;
    r.hit_max_evals = hit_max;
    return r;
}

}  // namespace pebo
