#pragma once

#include "pebo/system_model.hpp"
#include "pebo/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pebo {

/// Parsed scenario file: TOML-style sections of key = value lines.
/// Unknown keys are rejected so typos surface as config errors.
struct ScenarioConfig {
    // [model]
    std::string model_name = "example_sec6";  ///< or "polynomial"
    int n = 2;
    int p = 1;
    Eigen::VectorXd box_lower;
    Eigen::VectorXd box_upper;
    double horizon_lo = 0.0;
    double horizon_hi = 1.0;
    std::vector<PolynomialComponent> f_poly;  ///< polynomial models only
    std::vector<PolynomialComponent> h_poly;

    // [design]
    Eigen::VectorXd lambdas;
    double rho = 0.0;
    std::string H_selector = "identity";  ///< "identity" | "exp_decay"
    bool jitter = false;
    double jitter_amount = 0.01;

    // [integrator]
    double step = 1e-4;

    // [estimation]
    std::string mode = "batch";  ///< batch | expanding | landscape
    double t0 = 0.1;
    double tf = 1.0;
    double update_period = 0.1;
    Eigen::VectorXd x0;
    Eigen::VectorXd zeta0;
    Eigen::VectorXd theta0;
    long max_evals = 4000;
    double landscape_t = 0.2;
    double landscape_t2 = 0.0;  ///< 0 = single instant
    int landscape_grid = 101;

    // [left_inverse]
    int li_starts = 16;
    double li_tol_cost = 1e-12;
    double li_cluster_radius = 1e-4;

    // [analysis]
    double t_star = 0.1;
    int obs_sweep_points = 101;
    int gramian_nodes = 91;
    Eigen::VectorXd gramian_base;  ///< base point; default (0.5, 1)
    std::vector<double> injectivity_t_grid;
    int injectivity_grid_per_axis = 5;

    // [output]
    std::string out_dir = "out";
    unsigned long long seed = 12345;
    double noise_std = 0.0;
};

/// Parses the file; throws ConfigError with the offending line/field name.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

/// Serializes the effective config (defaults resolved) in the same format;
/// re-running from the echo reproduces the run.
std::string render_config(const ScenarioConfig& cfg);

/// Builds the model declared by the config (built-in by name, or polynomial).
SystemModel build_model(const ScenarioConfig& cfg);
DomainBox build_box(const ScenarioConfig& cfg);

/// Polynomial component syntax: terms "coeff [e1 e2 ...]" joined by ';'.
PolynomialComponent parse_polynomial(const std::string& text, int n_vars);
std::string render_polynomial(const PolynomialComponent& comp);

}  // namespace pebo
