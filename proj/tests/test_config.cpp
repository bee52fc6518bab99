#include "pebo/config.hpp"
#include "pebo/example_sec6.hpp"

#include <doctest.h>

using namespace pebo;

namespace {

const char* kExample = R"(
# built-in reproduction scenario
[model]
name = "example_sec6"
n = 2
p = 1
box_lower = "-2, -2"
box_upper = "2, 2"
horizon = "0.0, 1.0"

[design]
lambdas = "-1, -2, -3"
rho = 0.0
H = "identity"

[integrator]
step = 1e-4

[estimation]
mode = "batch"
t0 = 0.1
tf = 1.0
x0 = "1.0, -0.5"
zeta0 = "0, 0, 0"

[output]
dir = "out"
seed = 42
)";

}  // namespace

TEST_CASE("parses the reference scenario") {
    const ScenarioConfig cfg = parse_config_text(kExample, "test");
    CHECK(cfg.model_name == "example_sec6");
    CHECK(cfg.n == 2);
    CHECK(cfg.lambdas == Eigen::Vector3d(-1, -2, -3));
    CHECK(cfg.step == 1e-4);
    CHECK(cfg.x0 == Eigen::Vector2d(1.0, -0.5));
    CHECK(cfg.seed == 42);
    CHECK(build_model(cfg).n == 2);
    CHECK(build_box(cfg).upper == Eigen::Vector2d(2, 2));
}

TEST_CASE("render and reparse round trips every field") {
    ScenarioConfig cfg = parse_config_text(kExample, "test");
    cfg.mode = "expanding";
    cfg.noise_std = 1e-3;
    const ScenarioConfig back = parse_config_text(render_config(cfg), "echo");
    CHECK(back.mode == cfg.mode);
    CHECK(back.noise_std == cfg.noise_std);
    CHECK(back.lambdas == cfg.lambdas);
    CHECK(back.step == cfg.step);
    CHECK(back.x0 == cfg.x0);
    CHECK(back.out_dir == cfg.out_dir);
    CHECK(back.injectivity_t_grid == cfg.injectivity_t_grid);
}

TEST_CASE("errors name the offending field") {
    CHECK_THROWS_WITH_AS(parse_config_text("[design]\nlambdas = \"-1, -2\"\n", "t"),
                         doctest::Contains("lambdas"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("[design]\nwhatever = 1\n", "t"),
                         doctest::Contains("design.whatever"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("[integrator]\nstep = fast\n", "t"),
                         doctest::Contains("integrator.step"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[estimation]\nmode = \"off\"\n", "t"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("no_equals_sign\n", "t"), ConfigError);
}

TEST_CASE("polynomial model block") {
    const char* text = R"(
[model]
name = "polynomial"
n = 2
p = 1
f1 = "-1 [1 0]"
f2 = "-1 [0 1] ; 1 [2 0]"
h1 = "1 [0 1] ; 1 [3 0]"
)";
    const ScenarioConfig cfg = parse_config_text(text, "test");
    const SystemModel mdl = build_model(cfg);
    const SystemModel ref = sec6::model();
    const Eigen::Vector2d x(1.3, -0.4);
    CHECK((mdl.eval_f(x, 0.0) - ref.eval_f(x, 0.0)).norm() == 0.0);
    CHECK((mdl.eval_h(x) - ref.eval_h(x)).norm() == 0.0);

    // render emits the polynomial lines and they reparse
    const ScenarioConfig back = parse_config_text(render_config(cfg), "echo");
    CHECK((build_model(back).eval_f(x, 0.0) - ref.eval_f(x, 0.0)).norm() == 0.0);

    CHECK_THROWS_AS(parse_config_text("[model]\nname = \"polynomial\"\nn = 2\np = 1\n", "t"),
                    ConfigError);
    CHECK_THROWS_AS(parse_polynomial("3 [1]", 2), ConfigError);
    CHECK_THROWS_AS(parse_polynomial("nonsense", 2), ConfigError);
}
