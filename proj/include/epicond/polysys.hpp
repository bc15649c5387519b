#pragma once

#include "epicond/core.hpp"

#include <memory>

namespace epicond {

using VecXc = Eigen::VectorXcd;
using MatXc = Eigen::MatrixXcd;

/// Sparse multivariate polynomial over complex coefficients in n_vars
/// variables and n_params parameters (coefficients may depend polynomially on
/// the parameters).
class Poly {
  public:
    Poly() = default;
    Poly(int n_vars, int n_params) : nv_(n_vars), np_(n_params) {}

    static Poly constant(Complex c, int n_vars, int n_params = 0);
    static Poly variable(int i, int n_vars, int n_params = 0);
    static Poly parameter(int j, int n_vars, int n_params = 0);

    int n_vars() const { return nv_; }
    int n_params() const { return np_; }
    int n_terms() const { return int(coef_.size()); }
    int stride() const { return nv_ + np_; }

    /// Structural max total degree in the variables.
    int degree() const;
    /// Structural max total degree in the parameters.
    int param_degree() const;

    Poly& operator+=(const Poly& o);
    Poly& operator-=(const Poly& o);
    Poly operator+(const Poly& o) const;
    Poly operator-(const Poly& o) const;
    Poly operator*(const Poly& o) const;
    Poly operator*(Complex s) const;
    Poly operator-() const { return *this * Complex(-1.0); }

    Poly derivative(int var) const;

    Complex evaluate(const VecXc& z, const VecXc& params) const;

    /// Sort terms, merge duplicates, drop exact zeros.
    void normalize();

    void add_term(Complex c, const std::vector<uint8_t>& exponents);
    const std::vector<Complex>& coefficients() const { return coef_; }
    const std::vector<uint8_t>& exponents() const { return exp_; }

  private:
    int nv_ = 0, np_ = 0;
    std::vector<Complex> coef_;
    std::vector<uint8_t> exp_;  // n_terms * stride entries
};

struct PolySystem {
    int n_vars = 0;
    int n_params = 0;
    std::vector<Poly> equations;

    std::vector<int> degrees() const;
    long long total_degree() const;
    void validate() const;
};

/// Exact evaluation and analytic Jacobian (w.r.t. the variables).
std::pair<VecXc, MatXc> evaluate_and_jacobian(const PolySystem& sys, const VecXc& point,
                                              const VecXc& params = VecXc());

/// Random complex linear combinations reducing m > n equations to n.
/// Combinations are degree-graded: rows combining only the equations of
/// sub-maximal degree come first, so the squared system keeps the lower
/// degrees; every solution of `sys` solves the output, and consumers filter
/// spurious roots by residual on the original system.
PolySystem square_up(const PolySystem& sys, std::uint64_t rng_seed);

enum class PathStatus { converged, diverged, path_failure, singular_endpoint };

struct PathResult {
    VecXc end_point;
    PathStatus status = PathStatus::path_failure;
    double residual = std::numeric_limits<double>::infinity();
    int steps = 0;
    bool converged() const { return status == PathStatus::converged; }
};

struct TrackOptions {
    double initial_step = 0.1;
    double min_step = 1e-7;
    int newton_iters = 3;
    double track_tol = 1e-11;     // corrector target (scaled residual)
    double residual_tol = 1e-10;  // converged endpoint (scaled residual)
    double diverge_norm = 1e8;
    int grow_after = 5;
    int max_steps = 20000;
    int threads = 1;
};

/// Homotopy with exact value/Jacobian/ds-derivative, tracked s: 1 -> 0.
class HomotopyFn {
  public:
    virtual ~HomotopyFn() = default;
    virtual int dim() const = 0;
    virtual void eval(const VecXc& z, double s, VecXc* H, MatXc* Hz, VecXc* Hs) const = 0;
    /// Scaled residual of the endpoint system H(., 0).
    virtual double scaled_residual(const VecXc& z, const VecXc& H) const = 0;
};

/// RK4 predictor on the Davidenko ODE + Newton corrector, adaptive step.
PathResult track_path(const HomotopyFn& fn, const VecXc& start, const TrackOptions& opts);

/// Total-degree solve with the gamma trick; tracks exactly
/// prod(degrees) paths in a canonical deterministic order.
std::vector<PathResult> solve_total_degree(const PolySystem& sys, const VecXc& params,
                                           std::uint64_t rng_seed, const TrackOptions& opts = {});

/// Continues solutions valid at p0 along the linear parameter segment to p1.
/// Results are aligned with the input order.
std::vector<PathResult> track_parameter_path(const PolySystem& sys, const std::vector<VecXc>& solutions_at_p0,
                                             const VecXc& p0, const VecXc& p1, const TrackOptions& opts = {});

/// Converged endpoints with max |imag| < imag_tol, imaginary parts dropped,
/// then Gauss-Newton polished on the real restriction.
std::vector<Eigen::VectorXd> filter_real(const PolySystem& sys, const VecXc& params,
                                         const std::vector<PathResult>& results, double imag_tol);

/// Deduplicated converged endpoints (inf-norm tolerance), canonically sorted.
std::vector<VecXc> unique_solutions(const std::vector<PathResult>& results, double tol = 1e-8);

/// Scaled residual of the system at a (complex) point: coefficients
/// normalized per equation, magnitude divided by (1+|z|_inf)^deg.
double system_residual(const PolySystem& sys, const VecXc& point, const VecXc& params = VecXc());

/// A system specialized at fixed parameters, compiled once for repeated
/// evaluation (residual checks over many candidate roots).
class FixedSystem {
  public:
    FixedSystem(const PolySystem& sys, const VecXc& params);
    VecXc evaluate(const VecXc& z) const;
    double scaled_residual(const VecXc& z) const;

  private:
    friend class CompiledFamily;
    FixedSystem() = default;
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

/// Pre-grouped form of a parametric system for repeated cheap specialization
/// (large families evaluated at many parameter values, e.g. curve sweeps).
class CompiledFamily {
  public:
    explicit CompiledFamily(const PolySystem& sys);

    const PolySystem& system() const;
    FixedSystem at(const VecXc& params) const;

    std::vector<PathResult> solve_total_degree(const VecXc& params, std::uint64_t rng_seed,
                                               const TrackOptions& opts = {}) const;
    std::vector<PathResult> track_parameter_path(const std::vector<VecXc>& solutions_at_p0, const VecXc& p0,
                                                 const VecXc& p1, const TrackOptions& opts = {}) const;

  private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

} // namespace epicond
