#include "pebo/example_sec6.hpp"

#include <doctest.h>

#include <cmath>

using namespace pebo;

TEST_CASE("P(t) transcription against frozen literals") {
    // entries evaluated from the printed formulas at three times
    const Eigen::Matrix3d P01 = sec6::P(0.1);
    const Eigen::Matrix3d P05 = sec6::P(0.5);
    const Eigen::Matrix3d P10 = sec6::P(1.0);

    Eigen::Matrix3d E01, E05, E10;
    E01 << 0.11051709180756478, -0.00571474827695728, 0.12234394475017774,  //
        0.11623184008452214, -0.00590843573149485, 0.12845604941583333,     //
        0.12234394475017774, -0.00611210466565559, 0.13498588075760032;
    E05 << 0.8243606353500641, -0.2451999224088528, 1.4164838998189682,  //
        1.069560557758917, -0.28958035647060565, 1.7634072418790194,     //
        1.4164838998189682, -0.34692334206005127, 2.2408445351690323;
    E10 << 2.718281828459045, -1.9524924420125602, 8.683627547364312,  //
        4.670774270471606, -2.7182818284590446, 12.696480824257018,    //
        8.683627547364312, -4.012853276892706, 20.085536923187668;

    CHECK((P01 - E01).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((P05 - E05).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((P10 - E10).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("P vanishes at zero and is invertible on the protocol times") {
    CHECK(sec6::P(0.0).cwiseAbs().maxCoeff() == 0.0);
    for (double t : {0.1, 0.5, 1.0}) CHECK(std::abs(sec6::P(t).determinant()) > 0.0);
}

TEST_CASE("analytic and numeric inverses agree off the singular line") {
    const sec6::ClosedFormTransform cf;
    const DomainBox box = sec6::box();
    LeftInverseConfig li;
    for (double x1 : {-1.3, 0.6, 1.8})
        for (double t : {0.5, 1.0}) {
            const Eigen::Vector2d x(x1, 0.9);
            const Eigen::VectorXd z = cf.phi(x, t);
            const Eigen::VectorXd xa = cf.analytic_left_inverse(z, t);
            const InverseResult num = left_inverse(cf, z, t, box, li);
            REQUIRE(num.status == InverseStatus::Ok);
            CHECK((num.x - xa).cwiseAbs().maxCoeff() < 1e-6);
        }
}

TEST_CASE("offset constancy and documented defaults") {
    sec6::Scenario scn;
    CHECK(scn.x0 == Eigen::Vector2d(1.0, -0.5));
    CHECK(scn.t0 == 0.1);
    CHECK(scn.sample_dt == 1e-4);

    const sec6::SimulatedRun run = sec6::simulate(scn);
    const sec6::ClosedFormTransform cf;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (long k = 0; k < run.x.size(); k += 25) {
        const Eigen::Vector3d th =
            cf.phi(run.x.values.row(k).transpose(), run.x.times(k)) -
            Eigen::Vector3d(run.zeta.values.row(k));
        lo = lo.cwiseMin(th);
        hi = hi.cwiseMax(th);
    }
    CHECK((hi - lo).maxCoeff() < 1e-6);
}

TEST_CASE("landscape basins: one instant is ambiguous, two are not") {
    sec6::Scenario scn;
    scn.sample_dt = 1e-3;  // landscape only needs the sampled instants
    const sec6::SimulatedRun run = sec6::simulate(scn);

    sec6::LandscapeConfig lc;
    lc.grid_n = 61;
    lc.instants = {0.2};
    const sec6::LandscapeResult single = sec6::run_landscape(run, lc);
    CHECK(single.basins >= 2);

    // the true offset cell reaches the floor
    bool found_true = false;
    for (const auto& rep : single.zero_reps)
        if ((rep - Eigen::Vector2d(run.theta_true.head(2))).cwiseAbs().maxCoeff() <
            2.0 * (single.theta1_grid(1) - single.theta1_grid(0)))
            found_true = true;
    CHECK(found_true);

    lc.instants = {0.2, 0.4};
    const sec6::LandscapeResult pooled = sec6::run_landscape(run, lc);
    CHECK(pooled.basins == 1);
    CHECK((pooled.zero_reps[0] - Eigen::Vector2d(run.theta_true.head(2)))
              .cwiseAbs()
              .maxCoeff() < 1e-5);
}

TEST_CASE("batch protocol on a coarser grid") {
    sec6::Scenario scn;
    scn.sample_dt = 1e-3;
    const sec6::BatchResult res = sec6::run_batch(scn);
    CHECK(res.theta_tilde.cwiseAbs().maxCoeff() < 1e-3);

    // reconstruction overlays the truth after the early transient
    double worst = 0.0;
    for (long k = 0; k < res.x_true.size(); ++k) {
        if (res.x_true.times(k) < 0.15) continue;
        worst = std::max(worst,
                         (res.x_hat.values.row(k) - res.x_true.values.row(k))
                             .cwiseAbs()
                             .maxCoeff());
    }
    CHECK(worst < 1e-2);
}

TEST_CASE("ground-truth offset isolates the transform error") {
    sec6::Scenario scn;  // full 0.1 ms rate: the bound tracks the zeta error
    const sec6::SimulatedRun run = sec6::simulate(scn);
    const sec6::ClosedFormTransform cf;
    double worst = 0.0;
    for (long k = 0; k < run.x.size(); k += 10) {
        const double t = run.x.times(k);
        const Eigen::VectorXd z =
            run.zeta.values.row(k).transpose() + run.theta_true;
        const auto x = cf.fast_left_inverse(z, t);
        REQUIRE(x.has_value());
        worst = std::max(
            worst, (*x - Eigen::Vector2d(run.x.values.row(k))).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("expanding protocol tracks the batch estimate") {
    sec6::Scenario scn;
    scn.sample_dt = 1e-3;
    const sec6::BatchResult batch = sec6::run_batch(scn);
    const sec6::ExpandingResult exp = sec6::run_expanding(scn);
    const double e_batch = batch.theta_tilde.cwiseAbs().maxCoeff();
    const double e_exp =
        (Eigen::Vector3d(exp.estimate.theta_hat) - exp.theta_true).cwiseAbs().maxCoeff();
    CHECK(e_exp <= std::max(2.0 * e_batch, 1e-6));
    CHECK(exp.estimate.trace.size() == 9);
    for (const auto& e : exp.estimate.trace) {
        CHECK(e.theta_hat.allFinite());
        CHECK(std::isfinite(e.cost));
    }
    CHECK(exp.x_hat.values.allFinite());
}
