#pragma once

#include "epicond/geometry.hpp"

namespace epicond {

/// Reduced linear-system certificate for scene degeneracy: the 5x5 (E) or
/// 7x7 (F) matrix whose determinant vanishes exactly on the ill-posed locus.
struct DegeneracyCertificate {
    Eigen::MatrixXd matrix;
    double det = 0.0;
    double scale = 1.0;  // product of row norms (Hadamard bound)
    std::optional<Eigen::VectorXd> kernel_vector;
    std::vector<Vec3> transformed_points;  // the rotated points the rows were built from (E only)

    double normalized_det() const { return std::abs(det) / scale; }
};

DegeneracyCertificate degeneracy_matrix(const WorldScene& scene);

struct IllPosedVerdict {
    bool ill_posed = false;
    double margin = 0.0;  // sigma_min / sigma_max of the forward Jacobian
};

/// Verdict from the singular values of the full forward Jacobian.
IllPosedVerdict is_ill_posed(const WorldScene& scene, double tol);

/// Quadric q1 (z1^2+z2^2) + q2 z2 z3 + q3 z1 z3 + q4 z2 + q5 z1 = 0:
/// contains the e3-axis and slices normal to it in circles.
Quadric rectangular_quadric(const Eigen::Matrix<double, 5, 1>& q);

/// True iff (lambda dir; 1)^T Q (lambda dir; 1) = 0 for all lambda (the three
/// coefficient polynomials vanish within 1e-10 of the quadric scale).
bool quadric_contains_baseline(const Quadric& Q, const Vec3& dir);

/// Random quadric through the line {lambda dir}: a draw from the 7-dim family.
Quadric quadric_through_line(const Vec3& dir, Rng& rng);

/// Real points of Q with bounded coordinates and |z3| bounded away from 0,
/// pairwise distinct.  Fixes two coordinates uniformly and solves for the
/// third; throws NumericalError after max attempts.
std::vector<Vec3> sample_on_quadric(const Quadric& Q, int count, std::uint64_t rng_seed);

/// Theorem-style constructive generator of an ill-posed scene.
WorldScene construct_ill_posed(ProblemKind kind, std::uint64_t rng_seed);

} // namespace epicond
