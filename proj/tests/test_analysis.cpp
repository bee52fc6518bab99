#include "pebo/analysis.hpp"
#include "pebo/example_sec6.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace pebo;

namespace {

Eigen::Matrix2d exact_obs_jacobian(double x1) {
    // rows: grad h, grad L_f h for the built-in example
    Eigen::Matrix2d J;
    J << 3.0 * x1 * x1, 1.0, -9.0 * x1 * x1 + 2.0 * x1, -1.0;
    return J;
}

}  // namespace

TEST_CASE("observability matrix for the built-in example, k = 1") {
    const SystemModel mdl = sec6::model();
    AnalysisConfig cfg;

    SUBCASE("matches the hand Jacobian away from the singular lines") {
        for (double x1 : {-1.0, 0.7, 1.0}) {
            const ObsMatrixResult r =
                observability_matrix(mdl, Eigen::Vector2d(x1, 0.7), 0.3, 1, cfg);
            CHECK((r.jacobian - exact_obs_jacobian(x1)).cwiseAbs().maxCoeff() < 1e-7);
            CHECK(r.rank == 2);
        }
    }

    SUBCASE("rank drops exactly on x1 = 0 and x1 = 1/3") {
        for (double x1 : {0.0, 1.0 / 3.0}) {
            const ObsMatrixResult r =
                observability_matrix(mdl, Eigen::Vector2d(x1, -0.4), 0.3, 1, cfg);
            CHECK(r.rank == 1);
        }
    }
}

TEST_CASE("observability of a linear plant against matrix powers") {
    // x' = Fx, y = Cx: the k-th stack Jacobian is (C; CF; CF^2)
    Eigen::Matrix2d F;
    F << 0.0, 1.0, -2.0, -3.0;
    SystemModel mdl;
    mdl.n = 2;
    mdl.p = 1;
    mdl.f = [F](const Eigen::VectorXd& x, double, Eigen::VectorXd& dx) { dx = F * x; };
    mdl.h = [](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y(0) = x(0); };
    mdl.df_dx = [F](const Eigen::VectorXd&, double, Eigen::MatrixXd& J) { J = F; };
    mdl.dh_dx = [](const Eigen::VectorXd&, Eigen::MatrixXd& J) { J << 1.0, 0.0; };

    const Eigen::Vector2d x(0.4, -1.2);
    const ObsMatrixResult r = observability_matrix(mdl, x, 0.5, 2, {});
    Eigen::MatrixXd expect(3, 2);
    Eigen::RowVector2d C(1.0, 0.0);
    expect.row(0) = C;
    expect.row(1) = C * F;
    expect.row(2) = C * F * F;
    CHECK((r.jacobian - expect).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((r.stacked - expect * x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("k = 0 reduces to the output Jacobian") {
    const SystemModel mdl = sec6::model();
    const Eigen::Vector2d x(1.4, 0.2);
    const ObsMatrixResult r = observability_matrix(mdl, x, 0.2, 0, {});
    CHECK(r.stacked == mdl.eval_h(x));
    CHECK(r.jacobian == mdl.jac_h(x));
    CHECK(r.rank == 1);
    CHECK_THROWS_AS(observability_matrix(mdl, x, 0.2, 4, {}), ConfigError);
}

TEST_CASE("rank verdict is invariant under output rescaling") {
    const SystemModel base = sec6::model();
    SystemModel scaled = base;
    scaled.h = [](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        y(0) = 7.3 * (x(1) + x(0) * x(0) * x(0));
    };
    scaled.dh_dx = [](const Eigen::VectorXd& x, Eigen::MatrixXd& J) {
        J(0, 0) = 7.3 * 3.0 * x(0) * x(0);
        J(0, 1) = 7.3;
    };
    for (double x1 : {0.0, 1.0 / 3.0, -1.3, 0.9}) {
        const ObsMatrixResult a =
            observability_matrix(base, Eigen::Vector2d(x1, 0.5), 0.3, 1, {});
        const ObsMatrixResult b =
            observability_matrix(scaled, Eigen::Vector2d(x1, 0.5), 0.3, 1, {});
        CHECK(a.rank == b.rank);
    }
}

TEST_CASE("determinant roots of the k = 1 sweep factor as 2 x1 (3 x1 - 1)") {
    const SystemModel mdl = sec6::model();
    std::vector<Eigen::VectorXd> states;
    for (int i = 0; i < 101; ++i)
        states.push_back(Eigen::Vector2d(-2.0 + 4.0 * i / 100.0, 0.5));
    const ObsSweepReport rep = observability_sweep(mdl, states, 0.3, 1, {});
    REQUIRE(rep.det_roots.size() >= 2);
    double best0 = 1e9, best13 = 1e9;
    for (const double r : rep.det_roots) {
        best0 = std::min(best0, std::abs(r));
        best13 = std::min(best13, std::abs(r - 1.0 / 3.0));
    }
    CHECK(best0 < 1e-6);
    CHECK(best13 < 1e-6);
}

TEST_CASE("distinguishability probe") {
    const SystemModel mdl = sec6::model();
    AnalysisConfig cfg;
    const double t = 1.0, t_star = 0.3;

    SUBCASE("identical states have zero gap") {
        const Eigen::Vector2d x(0.6, -0.3);
        const DistinguishabilityProbe p =
            distinguishability_probe(mdl, {{x, x}}, t, t_star, cfg);
        CHECK(p.gaps[0] == 0.0);
        CHECK(p.violations.empty());
    }

    SUBCASE("x1 = 0 slice pair separates by the exponential gap") {
        const DistinguishabilityProbe p = distinguishability_probe(
            mdl, {{Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.0, 2.0)}}, t, t_star, cfg);
        // outputs e^{-(s-t)} and 2 e^{-(s-t)}: sup gap = e^{t_star}
        CHECK(p.gaps[0] == doctest::Approx(std::exp(t_star)).epsilon(1e-6));
        CHECK(p.violations.empty());
    }

    SUBCASE("random distinct pairs separate; gap is symmetric with a triangle bound") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1.8, 1.8);
        for (int rep = 0; rep < 4; ++rep) {
            const Eigen::Vector2d a(u(rng), u(rng)), b(u(rng), u(rng)), c(u(rng), u(rng));
            const DistinguishabilityProbe p = distinguishability_probe(
                mdl, {{a, b}, {b, a}, {a, c}, {b, c}}, t, t_star, cfg);
            CHECK(p.gaps[0] > 1e-8);
            CHECK(p.gaps[0] == p.gaps[1]);
            CHECK(p.gaps[2] <= p.gaps[0] + p.gaps[3] + 1e-12);
        }
    }
}

TEST_CASE("identifiability gramian") {
    const SystemModel mdl = sec6::model();
    const ObserverDesign dsn = sec6::design();
    GramianConfig gc;
    gc.t_lower = 0.1;
    gc.outer_nodes = 46;
    gc.analysis.integrator.step = 1e-3;

    SUBCASE("positive definite at a generic base point") {
        const GramianReport rep = gramian_W_phi(mdl, dsn, Eigen::Vector2d(0.5, 1.0), 1.0, gc);
        CHECK(rep.nonsingular);
        CHECK_FALSE(rep.rank_deficient_psi);
        CHECK(rep.eigenvalues.minCoeff() > 1e-8 * rep.eigenvalues.maxCoeff());
        CHECK((rep.W - rep.W.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(rep.eigenvalues.minCoeff() > -1e-10 * rep.eigenvalues.maxCoeff());
    }

    SUBCASE("x1 = 0 slice collapses psi's first column") {
        const GramianReport rep = gramian_W_phi(mdl, dsn, Eigen::Vector2d(0.0, 1.0), 1.0, gc);
        CHECK(rep.rank_deficient_psi);
        CHECK_FALSE(rep.nonsingular);
        CHECK(rep.deficient_taus.size() > 40);
    }

    SUBCASE("trivial plant against a hand quadrature") {
        // x' = 0, h = x, lambda = (-1,-2): psi(tau) = (e^tau - 1, (e^{2tau}-1)/2)
        SystemModel trivial;
        trivial.n = 1;
        trivial.p = 1;
        trivial.f = [](const Eigen::VectorXd&, double, Eigen::VectorXd& dx) { dx(0) = 0.0; };
        trivial.h = [](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y(0) = x(0); };
        trivial.dh_dx = [](const Eigen::VectorXd&, Eigen::MatrixXd& J) { J(0, 0) = 1.0; };
        Eigen::VectorXd lam(2);
        lam << -1.0, -2.0;
        const ObserverDesign d2 = make_design(1, 1, lam, 0.0, OutputMap::identity(1));
        GramianConfig g2;
        g2.t_lower = 0.2;
        g2.outer_nodes = 41;
        g2.analysis.integrator.step = 1e-4;
        const GramianReport rep =
            gramian_W_phi(trivial, d2, Eigen::VectorXd::Constant(1, 0.7), 1.0, g2);

        Eigen::Matrix2d Whand = Eigen::Matrix2d::Zero();
        Eigen::Matrix2d prev;
        for (int i = 0; i < g2.outer_nodes; ++i) {
            const double tau = 0.2 + 0.8 * i / (g2.outer_nodes - 1);
            Eigen::Vector2d v(std::exp(tau) - 1.0, 0.5 * (std::exp(2.0 * tau) - 1.0));
            const Eigen::Matrix2d integ = v * v.transpose() / std::pow(v.squaredNorm(), 2);
            if (i > 0) Whand += 0.5 * (0.8 / (g2.outer_nodes - 1.0)) * (integ + prev);
            prev = integ;
        }
        CHECK((rep.W - Whand).norm() / Whand.norm() < 1e-6);
        CHECK(rep.nonsingular);
    }
}

TEST_CASE("injectivity sweep") {
    const SystemModel mdl = sec6::model();
    const IntegratorConfig icfg{1e-3};
    LeftInverseConfig li;

    SUBCASE("t = 0 fails everywhere, onset found afterwards") {
        const ObserverDesign dsn = sec6::design();
        QuadratureTransform ev(mdl, dsn, icfg);
        const InjectivitySweep sw =
            injectivity_sweep(ev, sec6::box(), {0.0, 0.5}, 4, li);
        CHECK(sw.failure_rate[0] == 1.0);
        CHECK(sw.failure_rate[1] == 0.0);
        CHECK(sw.t_star_estimate == 0.5);
    }

    SUBCASE("duplicated eigenvalues lose injectivity on the fold strip") {
        // duplicated lambdas drop the transform to two informative
        // components, so a whole curve of states shares each image; the
        // audit resolves those collisions only once the quadrature noise
        // sits below the acceptance floor, hence the finer step here
        Eigen::VectorXd dup(3);
        dup << -1.0, -1.0, -2.0;
        const ObserverDesign bad = make_design(2, 1, dup, 0.0, OutputMap::identity(1));
        const ObserverDesign good = sec6::design();
        const DomainBox strip(Eigen::Vector2d(0.05, -2.0), Eigen::Vector2d(0.45, 2.0));
        const IntegratorConfig fine{1e-4};
        QuadratureTransform ev_bad(mdl, bad, fine);
        QuadratureTransform ev_good(mdl, good, fine);
        const double bad_rate =
            injectivity_sweep(ev_bad, strip, {0.5}, 4, li).failure_rate[0];
        const double good_rate =
            injectivity_sweep(ev_good, strip, {0.5}, 4, li).failure_rate[0];
        CHECK(good_rate == 0.0);
        CHECK(bad_rate > 0.3);
    }
}
