#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace pebo {

/// Raised when an integration or evaluation produces NaN/Inf. For backward
/// flows this usually signals finite-time blow-up or a too-coarse step.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised by make_design when an eigenvalue is not in the open left half-plane.
struct BadEigenvalue : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised by closed-form inverses at their singular configurations.
struct SingularError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised on malformed scenario/model configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Axis-aligned box describing cl(X), the closure of the state domain.
struct DomainBox {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    DomainBox() = default;
    DomainBox(Eigen::VectorXd lo, Eigen::VectorXd hi);

    static DomainBox cube(int n, double lo, double hi);

    int dim() const { return static_cast<int>(lower.size()); }

    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
    Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
    /// C1 saturation onto the box plus a 25% margin: identity inside,
    /// rational roll-off outside. Residual scoring uses this instead of a
    /// hard clamp, whose derivative creases collapse simplex searches.
    Eigen::VectorXd saturate(const Eigen::VectorXd& x) const;
    /// Center of grid cell (i0,...,i_{n-1}) when each axis is split into m cells.
    Eigen::VectorXd cell_center(const std::vector<int>& idx, int m) const;
};

/// Time-stamped samples of a vector signal, one row per time stamp.
/// Times must be strictly monotonic; measurement signals (extension inputs,
/// regression grids) are additionally required to be increasing and uniform.
struct SampledSignal {
    Eigen::VectorXd times;
    Eigen::MatrixXd values;

    long size() const { return times.size(); }
    int dim() const { return static_cast<int>(values.cols()); }

    bool strictly_increasing() const;
    bool strictly_monotonic() const;
    bool uniform(double tol = 1e-12) const;
    double step() const;  // requires size() >= 2

    /// Linear interpolation at time t (requires increasing times; clamps ends).
    Eigen::VectorXd at(double t) const;
    /// Index of the grid node closest to t (requires uniform grid).
    long index_of(double t) const;
};

/// One integrated orbit: samples plus the anchor (t0, x0) it started from.
/// Rows are in integration order, so times decrease for backward runs.
struct Trajectory {
    SampledSignal signal;
    double t0 = 0.0;
    Eigen::VectorXd x0;

    Eigen::VectorXd endpoint() const { return signal.values.row(signal.size() - 1); }
    double end_time() const { return signal.times(signal.size() - 1); }
};

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.allFinite();
}

}  // namespace pebo
