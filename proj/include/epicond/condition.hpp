#pragma once

#include "epicond/geometry.hpp"

namespace epicond {

/// Forward-map Jacobian DPhi factored through world points, stage2 * stage1.
/// Columns of stage1 are ordered (dX_1..dX_N | pose tangent directions) with
/// respect to orthonormal bases on the scene tangent space; rows of stage2
/// are image coordinates.
struct ForwardJacobian {
    ProblemKind kind = ProblemKind::essential;
    Eigen::MatrixXd stage1;   // 30x20 (E) or 42x28 (F)
    Eigen::MatrixXd stage2;   // 20x30 / 28x42
    Eigen::MatrixXd product;  // 20x20 / 28x28

    int point_columns() const { return kind == ProblemKind::essential ? 15 : 21; }
    std::vector<std::string> column_labels() const;
};

ForwardJacobian jacobian_forward(const WorldScene& scene);

struct ConditionReport {
    double cond = 0.0;  // +infinity sentinel when the scene is (numerically) ill-posed
    double sigma_min_forward = 0.0;
    double sigma_max_forward = 0.0;
    std::optional<Eigen::MatrixXd> amplification_matrix;  // 5x20 / 7x28, absent at sentinel
    bool finite() const { return std::isfinite(cond); }
};

/// Condition number of the solution map at the scene (largest singular value
/// of G_y^{1/2} times the last pose rows of product^{-1}); the pose rows are
/// obtained by linear solves, never by forming the inverse.
ConditionReport condition_number(const WorldScene& scene);

/// Monte-Carlo worst-case amplification oracle: perturb the image data by
/// ||dx|| = delta in random directions, re-solve the minimal problem, and take
/// the max geodesic-over-Euclidean ratio against the scene's model.
double empirical_condition(const WorldScene& scene, double delta, int trials,
                           std::uint64_t rng_seed, int threads = 1);

} // namespace epicond
