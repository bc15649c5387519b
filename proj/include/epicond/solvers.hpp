#pragma once

#include "epicond/geometry.hpp"

#include <span>

namespace epicond {

using PairXY = std::pair<Vec2, Vec2>;

struct SolverOutput {
    std::vector<EpipolarModel> models;
    double residual_max = 0.0;  // worst epipolar residual over all models and pairs
    int real_count = 0;
    bool near_degenerate = false;  // merged roots / |disc| below tolerance
};

/// All real roots of sum_k coeffs[k] t^k (ascending order), companion-matrix
/// eigenvalues with one Newton polish, multiplicity-collapsed.
std::vector<double> real_roots(const std::vector<double>& coeffs);

/// Orthonormal nullspace basis of a k x 9 epipolar coefficient matrix,
/// reshaped row-major to 3x3, deterministic sign.  Throws NumericalError if
/// rank(M) != 9 - expected_dim within tolerance.
std::vector<Mat3> nullspace_basis(const Eigen::MatrixXd& M, int expected_dim);

/// Row of the epipolar coefficient matrix for pair (x, y): vec such that
/// vec . flatten(F) = y_h^T F x_h (F row-major).
Eigen::Matrix<double, 9, 1> epipolar_row(const Vec2& x, const Vec2& y);

SolverOutput solve_seven_point(std::span<const PairXY> pairs);
SolverOutput solve_five_point(std::span<const PairXY> pairs);

/// Ascending coefficients of the degree-10 univariate eliminant of the
/// five-point problem (the polynomial whose real roots seed the models).
std::vector<double> five_point_polynomial(std::span<const PairXY> pairs);

struct RelativePose {
    Rotation R = Rotation::identity();
    UnitTranslation t = UnitTranslation::from_vector(Vec3(0, 0, 1));
};

/// Cheirality-selected decomposition of an essential model; throws
/// NumericalError when every candidate fails the positive-depth test.
RelativePose decompose_essential(const EpipolarModel& E, std::span<const PairXY> pairs);

/// First-order (Sampson) squared geometric residual; falls back to the
/// squared algebraic residual when the epipolar-line gradient vanishes.
double sampson_distance(const EpipolarModel& model, const PairXY& pair);

} // namespace epicond
