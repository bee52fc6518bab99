#include "pebo/nelder_mead.hpp"

#include <doctest.h>

#include <cmath>

using namespace pebo;

TEST_CASE("convex quadratic from the origin") {
    const Eigen::Vector3d target(0.3, -0.7, 0.2);
    NmOptions opts;
    opts.max_evals = 2000;
    const NmResult r = nelder_mead(
        [&](const Eigen::VectorXd& x) { return (x - target).squaredNorm(); },
        Eigen::Vector3d::Zero(), opts);
    CHECK((r.x - target).cwiseAbs().maxCoeff() < 1e-8);
    CHECK_FALSE(r.hit_max_evals);
}

TEST_CASE("rosenbrock valley from the classic start") {
    NmOptions opts;
    opts.max_evals = 2000;
    const NmResult r = nelder_mead(
        [](const Eigen::VectorXd& x) {
            return 100.0 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1.0 - x(0), 2);
        },
        Eigen::Vector2d(-1.2, 1.0), opts);
    CHECK((r.x - Eigen::Vector2d(1.0, 1.0)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("flat landscape stays put and reports the budget") {
    NmOptions opts;
    opts.max_evals = 100;
    opts.fspread_tol = std::numeric_limits<double>::infinity();
    const NmResult r =
        nelder_mead([](const Eigen::VectorXd&) { return 1.0; }, Eigen::Vector2d(2.0, 3.0), opts);
    // every vertex ties at cost 1; the lexicographically smallest survives
    CHECK(r.fmin == 1.0);
    CHECK(r.x(0) <= 2.0 + 1e-12);
}

TEST_CASE("initial simplex uses the 5 percent / 0.00025 rule") {
    const Eigen::MatrixXd S = initial_simplex(Eigen::Vector2d(2.0, 0.0));
    CHECK(S(1, 0) == doctest::Approx(2.1));
    CHECK(S(2, 1) == doctest::Approx(0.00025));
}

TEST_CASE("identical runs are bitwise identical") {
    auto run = [] {
        NmOptions opts;
        opts.max_evals = 500;
        return nelder_mead(
            [](const Eigen::VectorXd& x) {
                return std::abs(x(0) - 1.0) + 0.5 * std::abs(x(1) + 2.0);
            },
            Eigen::Vector2d(0.0, 0.0), opts);
    };
    const NmResult a = run(), b = run();
    CHECK(a.x == b.x);
    CHECK(a.fmin == b.fmin);
    CHECK(a.evals == b.evals);
}
