#include "pebo/example_sec6.hpp"
#include "pebo/extension.hpp"
#include "pebo/linalg.hpp"

#include <doctest.h>

#include <cmath>

using namespace pebo;

namespace {

SampledSignal constant_signal(double value, double t0, double t1, double dt, int dim = 1) {
    SampledSignal s;
    const long n = std::lround((t1 - t0) / dt);
    s.times.setLinSpaced(n + 1, t0, t1);
    s.values = Eigen::MatrixXd::Constant(n + 1, dim, value);
    return s;
}

}  // namespace

TEST_CASE("zero output freezes the extension") {
    const ObserverDesign dsn = sec6::design();
    const SampledSignal y = constant_signal(0.0, 0.0, 1.0, 1e-3);
    Eigen::VectorXd z0(3);
    z0 << 0.4, -0.2, 1.0;
    const ExtensionRun run = run_extension(dsn, y, z0);
    CHECK((run.zeta.values.rowwise() - z0.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar sanity: unit output integrates e^t") {
    // n_z = 1: A = (-1), B = (1), H = id, y = 1 -> zeta(t) = e^t - 1
    Eigen::VectorXd lam(1);
    lam << -1.0;
    const ObserverDesign d = make_design(0, 1, lam, 0.0, OutputMap::identity(1));
    const SampledSignal y = constant_signal(1.0, 0.0, 1.0, 1e-3);
    const ExtensionRun run = run_extension(d, y, Eigen::VectorXd::Zero(1));
    for (long k = 0; k < y.size(); k += 200) {
        const double t = y.times(k);
        CHECK(run.zeta.values(k, 0) == doctest::Approx(std::exp(t) - 1.0).epsilon(1e-10));
    }
}

TEST_CASE("offset constancy along the simulated closed loop") {
    sec6::Scenario scn;
    const sec6::SimulatedRun run = sec6::simulate(scn);
    const sec6::ClosedFormTransform cf;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (long k = 0; k < run.x.size(); k += 50) {
        const Eigen::Vector3d th =
            cf.phi(run.x.values.row(k).transpose(), run.x.times(k)) -
            Eigen::Vector3d(run.zeta.values.row(k));
        lo = lo.cwiseMin(th);
        hi = hi.cwiseMax(th);
    }
    CHECK((hi - lo).maxCoeff() < 1e-5);
    CHECK((0.5 * (hi + lo) - run.theta_true).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("runs are linear in the initial condition") {
    const ObserverDesign dsn = sec6::design();
    sec6::Scenario scn;
    scn.sample_dt = 1e-3;
    const sec6::SimulatedRun run = sec6::simulate(scn);
    Eigen::VectorXd a(3), b(3);
    a << 0.0, 0.0, 0.0;
    b << 1.0, -2.0, 0.5;
    const ExtensionRun ra = run_extension(dsn, run.y, a);
    const ExtensionRun rb = run_extension(dsn, run.y, b);
    const Eigen::MatrixXd diff = ra.zeta.values - rb.zeta.values;
    for (int c = 0; c < 3; ++c) {
        const double span = diff.col(c).maxCoeff() - diff.col(c).minCoeff();
        CHECK(span < 1e-12);
        CHECK(diff(0, c) == a(c) - b(c));
    }
}

TEST_CASE("extension overflow surfaces as NonFinite") {
    Eigen::VectorXd lam(1);
    lam << -1.0;
    const ObserverDesign d = make_design(0, 1, lam, 0.0, OutputMap::identity(1));
    // e^t with t up to 800 overflows a double around t = 710
    const SampledSignal y = constant_signal(1.0, 0.0, 800.0, 0.1);
    CHECK_THROWS_AS(run_extension(d, y, Eigen::VectorXd::Zero(1)), NonFiniteError);
}

TEST_CASE("gpebo extension pair") {
    const SampledSignal empty_u;

    SUBCASE("constant A, zero beta: Omega is the matrix exponential") {
        Eigen::MatrixXd A(2, 2);
        A << -0.5, 1.0, -1.0, -0.5;
        const SampledSignal y = constant_signal(0.0, 0.0, 1.0, 1e-3);
        const GpeboRun run = run_gpebo_extension(
            [&](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return A; },
            [&](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
                return Eigen::VectorXd::Zero(2);
            },
            y, empty_u, Eigen::VectorXd::Zero(2));
        CHECK(run.zeta.values.cwiseAbs().maxCoeff() == 0.0);
        CHECK((run.Omega.front() - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
        CHECK((run.Omega.back() - expm(A)).norm() < 1e-10);
    }

    SUBCASE("scalar hand integral") {
        // A = -1, beta = 1: zeta(t) = 1 - e^{-t}, Omega(t) = e^{-t}
        const SampledSignal y = constant_signal(0.0, 0.0, 1.0, 1e-3);
        const GpeboRun run = run_gpebo_extension(
            [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
                return Eigen::MatrixXd::Constant(1, 1, -1.0);
            },
            [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) {
                return Eigen::VectorXd::Constant(1, 1.0);
            },
            y, empty_u, Eigen::VectorXd::Zero(1));
        for (long k = 0; k < y.size(); k += 250) {
            const double t = y.times(k);
            CHECK(run.zeta.values(k, 0) ==
                  doctest::Approx(1.0 - std::exp(-t)).epsilon(1e-10));
            CHECK(run.Omega[k](0, 0) == doctest::Approx(std::exp(-t)).epsilon(1e-10));
        }
    }

    SUBCASE("reconstruction contract against an independently integrated plant") {
        // z' = A(t) z + beta(t) integrated directly vs zeta + Omega theta
        auto Afun = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double t) {
            Eigen::MatrixXd A(3, 3);
            A << -1.0, 0.3 * std::sin(t), 0.0,               //
                -0.3 * std::sin(t), -1.5, 0.3 * std::cos(t),  //
                0.0, -0.3 * std::cos(t), -2.0;
            return A;
        };
        auto bfun = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double t) {
            return Eigen::Vector3d(std::sin(2.0 * t), std::cos(t), 0.5).eval();
        };
        const double dt = 1e-3;
        const SampledSignal y = constant_signal(0.0, 0.0, 1.0, dt);

        Eigen::VectorXd zeta0(3), z0(3);
        zeta0 << 0.1, -0.4, 0.2;
        z0 << 1.0, 0.5, -0.8;
        const GpeboRun run = run_gpebo_extension(Afun, bfun, y, empty_u, zeta0);

        // direct RK4 of the plant (the oracle path)
        Eigen::VectorXd z = z0;
        const Eigen::VectorXd u0(0), yv(1);
        const Eigen::VectorXd theta = z0 - zeta0;
        double worst = 0.0;
        for (long k = 0; k + 1 < y.size(); ++k) {
            const double t = y.times(k);
            auto rhs = [&](const Eigen::VectorXd& zz, double tt) {
                return (Afun(u0, yv, tt) * zz + bfun(u0, yv, tt)).eval();
            };
            const Eigen::VectorXd k1 = rhs(z, t);
            const Eigen::VectorXd k2 = rhs(z + 0.5 * dt * k1, t + 0.5 * dt);
            const Eigen::VectorXd k3 = rhs(z + 0.5 * dt * k2, t + 0.5 * dt);
            const Eigen::VectorXd k4 = rhs(z + dt * k3, t + dt);
            z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const Eigen::VectorXd recon =
                run.zeta.values.row(k + 1).transpose() + run.Omega[k + 1] * theta;
            worst = std::max(worst, (z - recon).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-6);
        CHECK(run.worst_condition < 50.0);
    }
}
