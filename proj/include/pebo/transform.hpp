#pragma once

#include "pebo/flows.hpp"
#include "pebo/system_model.hpp"
#include "pebo/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pebo {

/// Output reshaping H(y,t). Must be a bijection in y for each t; the built-in
/// choices are the identity and the damped map e^{-rho t} y that keeps the
/// dynamic extension bounded on long horizons.
struct OutputMap {
    std::string name = "identity";
    std::function<void(const Eigen::VectorXd& y, double t, Eigen::VectorXd& out)> fn;
    std::function<void(const Eigen::VectorXd& y, double t, Eigen::MatrixXd& J)> jac_y;
    std::function<void(const Eigen::VectorXd& w, double t, Eigen::VectorXd& y)> inverse;

    static OutputMap identity(int p);
    static OutputMap exp_decay(int p, double rho);

    Eigen::VectorXd eval(const Eigen::VectorXd& y, double t) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& y, double t) const;
};

/// The synthesis choices behind the coordinate change: per-output eigenvalue
/// block Lambda = diag(lambda_1..lambda_{n+1}), A = blockdiag(Lambda x p),
/// B = blockdiag(1_{n+1} x p), extended dimension n_z = p (n+1).
struct ObserverDesign {
    int n = 0;
    int p = 0;
    int n_z = 0;
    Eigen::VectorXd lambdas;  ///< n+1 values, all strictly negative
    Eigen::MatrixXd A;        ///< n_z x n_z
    Eigen::MatrixXd B;        ///< n_z x p
    double rho = 0.0;
    OutputMap H;
    bool diagonal_A = true;

    /// beta(y,t) = e^{-At} B H(y,t), the canonical-form right-hand side.
    Eigen::VectorXd beta(const Eigen::VectorXd& y, double t) const;

    /// e^{-At} (elementwise on the diagonal fast path).
    Eigen::MatrixXd exp_minus_At(double t) const;
    /// Diagonal of e^{-At}; valid only when diagonal_A.
    Eigen::VectorXd exp_minus_At_diagonal(double t) const;
};

/// Assembles the block design. Throws BadEigenvalue unless every lambda has
/// strictly negative real part (real-valued spectra only: the toolkit works
/// in real arithmetic end to end).
ObserverDesign make_design(int n, int p, const Eigen::VectorXd& lambdas, double rho,
                           OutputMap H);

/// Multiplies each eigenvalue by (1 + delta), delta uniform in [-amount, amount].
/// A cheap hedge against landing in the measure-zero bad eigenvalue sets;
/// injectivity is then re-verified a posteriori by round-trip tests.
Eigen::VectorXd jitter_lambdas(const Eigen::VectorXd& lambdas, double amount,
                               unsigned long long seed);

// ---------------------------------------------------------------------------
// Flow-integral construction of the transform
// ---------------------------------------------------------------------------

/// T(x,t) = int_0^t e^{A(t-s)} B H(h(X(x,t;s)), s) ds via one backward flow
/// from t to 0 and composite trapezoid quadrature on the shared step grid.
Eigen::VectorXd eval_T(const SystemModel& model, const ObserverDesign& design,
                       const Eigen::VectorXd& x, double t, const IntegratorConfig& cfg);

/// phi(x,t) = e^{-At} T(x,t), the canonical-form coordinate of Prop-style
/// construction; phi(x,0) = 0.
Eigen::VectorXd eval_phi(const SystemModel& model, const ObserverDesign& design,
                         const Eigen::VectorXd& x, double t, const IntegratorConfig& cfg);

/// dphi/dx(x,t) = int_0^t e^{-As} B dH/dy dh/dx(X(x,t;s)) dX/dx(x,t;s) ds,
/// quadrature over the same grid using the variational flow.
Eigen::MatrixXd eval_phi_jacobian(const SystemModel& model, const ObserverDesign& design,
                                  const Eigen::VectorXd& x, double t,
                                  const IntegratorConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluator interface
// ---------------------------------------------------------------------------

enum class InverseStatus { Ok, NonInjective, NoSolution, Singular };

const char* to_string(InverseStatus s);

struct InverseResult {
    InverseStatus status = InverseStatus::NoSolution;
    Eigen::VectorXd x;
    double cost = 0.0;
    int clusters = 0;
    long evals = 0;
};

/// Multi-start settings for the numeric left inverse.
struct LeftInverseConfig {
    int starts = 16;              ///< seeds on a uniform grid over the box
    double tol_cost = 1e-12;      ///< acceptance floor, relative: tol*(1+|z|^2)
    double cluster_radius = 1e-4; ///< chain-linkage distinctness radius
    long max_evals_per_start = 0; ///< 0 = 200*n
    bool polish = true;           ///< restart once from the best vertex
    std::optional<Eigen::VectorXd> hint;  ///< extra seed (state continuity)
    bool hint_only = false;       ///< trust the hint, skip the multistart audit
};

/// Evaluates phi, its state Jacobian, and (optionally) a closed-form left
/// inverse. Implementations must be deterministic and safe to call from
/// concurrent workers.
class TransformEvaluator {
  public:
    virtual ~TransformEvaluator() = default;

    virtual int state_dim() const = 0;
    virtual int z_dim() const = 0;

    virtual Eigen::VectorXd phi(const Eigen::VectorXd& x, double t) const = 0;
    virtual Eigen::MatrixXd phi_jacobian(const Eigen::VectorXd& x, double t) const = 0;

    /// Closed-form inverse when one exists. Returns nullopt where the formula
    /// is singular or when no formula is available; callers fall back to the
    /// numeric inverse.
    virtual std::optional<Eigen::VectorXd> fast_left_inverse(const Eigen::VectorXd& z,
                                                             double t) const {
        (void)z;
        (void)t;
        return std::nullopt;
    }

    /// State plugged into regression residuals h(x(z)). Closed forms may
    /// extrapolate across the guarded singular set here: the residual then
    /// grows smoothly instead of hitting a penalty cliff, which keeps simplex
    /// descent over the offset well behaved.
    virtual std::optional<Eigen::VectorXd> regression_state(const Eigen::VectorXd& z,
                                                            double t) const {
        return fast_left_inverse(z, t);
    }
};

/// phi^L(z,t): the minimizer of |z - phi(x,t)|^2 over cl(X), by multi-start
/// simplex search with box penalty.
///
/// All starts that reach the acceptance floor are clustered (chain linkage at
/// cluster_radius); clusters count as co-minimal rivals only when their cost
/// is within a fixed factor of the best cluster, since argmin uniqueness is a
/// statement about equal minimal values.  Status NonInjective when two or more
/// co-minimal clusters survive, NoSolution when no start reaches the floor.
InverseResult left_inverse(const TransformEvaluator& ev, const Eigen::VectorXd& z,
                           double t, const DomainBox& box, const LeftInverseConfig& cfg);

/// PDE residual dphi/dt + dphi/dx f - beta(h(x),t) at (x,t); the time
/// derivative is a central difference with stride dt_diff (grid-aligned when
/// the evaluator is quadrature-built).
Eigen::VectorXd pde_residual(const TransformEvaluator& ev, const SystemModel& model,
                             const ObserverDesign& design, const Eigen::VectorXd& x,
                             double t, double dt_diff);

/// The quadrature-built evaluator. A small keyed cache reuses the backward
/// pass shared by phi and phi_jacobian at identical (x,t); it is semantically
/// invisible and safe for concurrent insertion.
class QuadratureTransform final : public TransformEvaluator {
  public:
    QuadratureTransform(SystemModel model, ObserverDesign design, IntegratorConfig cfg);

    int state_dim() const override { return model_.n; }
    int z_dim() const override { return design_.n_z; }

    Eigen::VectorXd phi(const Eigen::VectorXd& x, double t) const override;
    Eigen::MatrixXd phi_jacobian(const Eigen::VectorXd& x, double t) const override;

    Eigen::VectorXd T(const Eigen::VectorXd& x, double t) const;

    const SystemModel& model() const { return model_; }
    const ObserverDesign& design() const { return design_; }
    const IntegratorConfig& integrator() const { return cfg_; }

  private:
    using CacheKey = std::vector<double>;  ///< (t, step, x...) bitwise
    struct CacheEntry {
        std::optional<Eigen::VectorXd> phi;
        std::optional<Eigen::MatrixXd> psi;
    };
    static constexpr size_t kCacheCap = 128;

    CacheKey make_key(const Eigen::VectorXd& x, double t) const;
    /// e^{-A s_k} diagonals over the s-grid of horizon t; shared across all
    /// states evaluated at the same time (the quadrature hot path).
    std::shared_ptr<const Eigen::MatrixXd> exp_factors(double t) const;

    SystemModel model_;
    ObserverDesign design_;
    IntegratorConfig cfg_;
    mutable std::mutex cache_mutex_;
    mutable std::map<CacheKey, CacheEntry> cache_;
    mutable std::map<double, std::shared_ptr<const Eigen::MatrixXd>> exp_cache_;
};

}  // namespace pebo
