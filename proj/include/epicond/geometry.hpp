#pragma once

#include "epicond/core.hpp"

#include <optional>
#include <utility>
#include <variant>

namespace epicond {

Mat3 skew(const Vec3& v);

/// Element of SO(3); orthogonality and det(+1) enforced at construction.
class Rotation {
  public:
    static Rotation identity() { return Rotation(Mat3::Identity(), unchecked_tag{}); }
    static Rotation from_matrix(const Mat3& m);
    /// QR-based uniform-ish random rotation (sign-fixed, det +1).
    static Rotation random(Rng& rng);

    const Mat3& matrix() const { return m_; }
    Rotation transposed() const { return Rotation(m_.transpose(), unchecked_tag{}); }

  private:
    struct unchecked_tag {};
    Rotation(const Mat3& m, unchecked_tag) : m_(m) {}
    Mat3 m_;
};

/// Unit translation plus a deterministic orthonormal completion of its
/// tangent plane; {t, perp1, perp2} is a right-handed orthonormal triple.
class UnitTranslation {
  public:
    static UnitTranslation from_vector(const Vec3& t);
    /// Custom completion (must be orthonormal and right-handed).
    static UnitTranslation with_completion(const Vec3& t, const Vec3& p1, const Vec3& p2);

    const Vec3& vector() const { return t_; }
    const Vec3& perp1() const { return p1_; }
    const Vec3& perp2() const { return p2_; }

  private:
    UnitTranslation(Vec3 t, Vec3 p1, Vec3 p2) : t_(std::move(t)), p1_(std::move(p1)), p2_(std::move(p2)) {}
    Vec3 t_, p1_, p2_;
};

/// Deterministic right-handed orthonormal completion {t, out1, out2}
/// (Householder-style against the standard axis least aligned with t).
std::pair<Vec3, Vec3> orthonormal_complement(const Vec3& t);

struct WorldSceneE {
    Rotation R = Rotation::identity();
    UnitTranslation t = UnitTranslation::from_vector(Vec3(0, 0, 1));
    std::array<Vec3, 5> X;

    /// Throws InvariantError if any projection is undefined.
    void validate() const;
    Vec3 second_camera_point(int i) const { return R.matrix() * X[size_t(i)] + t.vector(); }
};

struct WorldSceneF {
    Eigen::Matrix<double, 7, 1> b;
    std::array<Vec3, 7> X;

    static Mat34 camera_matrix(const Eigen::Matrix<double, 7, 1>& b);
    Mat34 M() const { return camera_matrix(b); }
    void validate() const;
    Vec3 second_camera_point(int i) const { return M() * X[size_t(i)].homogeneous(); }
};

using WorldScene = std::variant<WorldSceneE, WorldSceneF>;

inline ProblemKind kind_of(const WorldScene& s) {
    return std::holds_alternative<WorldSceneE>(s) ? ProblemKind::essential : ProblemKind::fundamental;
}
int point_count(const WorldScene& s);
Vec3 scene_point(const WorldScene& s, int i);

struct ImageData {
    std::vector<std::pair<Vec2, Vec2>> pairs;
    void validate() const;
};

/// Epipolar matrix with unit Frobenius norm and fixed sign gauge
/// (first entry with |entry| > 1e-9 made positive, row-major scan).
struct EpipolarModel {
    ProblemKind kind = ProblemKind::essential;
    Mat3 m = Mat3::Zero();

    /// Normalizes + canonicalizes; throws InvariantError if the matrix does
    /// not satisfy the manifold membership tolerances for `kind`.
    static EpipolarModel make(ProblemKind kind, const Mat3& raw);
    /// Normalization and gauge only, no membership check (solver internals).
    static Mat3 normalize_canon(const Mat3& raw);
};

/// Geodesic distance on the projective sphere of 3x3 matrices,
/// arccos|<m1,m2>| for unit-Frobenius representatives (numerically stable
/// near zero).
double geodesic_distance(const Mat3& a, const Mat3& b);

struct Quadric {
    Mat4 Q = Mat4::Zero();  // symmetric, (a;1)^T Q (a;1) = 0 convention
    double evaluate(const Vec3& p) const {
        Vec4 h = p.homogeneous();
        return h.dot(Q * h);
    }
    void validate() const;
};

// --- operations -------------------------------------------------------------

/// Orthonormal basis of T(SO(3), R): (1/sqrt(2)) R [e_i]_x, i = 1..3.
std::array<Mat3, 3> tangent_basis_so3(const Rotation& R);

/// Closed-form Grammian of the essential tangent spanning set at (t, tp1, tp2):
/// rows/cols ordered (rot1, rot2, rot3, dt1, dt2).
Eigen::Matrix<double, 5, 5> grammian_essential(const Vec3& t, const Vec3& tp1, const Vec3& tp2);

/// Closed-form Grammian of the fundamental tangent spanning set at b,
/// scaled by 1/||F(b)||_F^2.
Eigen::Matrix<double, 7, 7> grammian_fundamental(const Eigen::Matrix<double, 7, 1>& b);

/// Grammian of the scene's epipolar tangent spanning set (5x5 or 7x7).
Eigen::MatrixXd grammian(const WorldScene& scene);

/// Symmetric positive-definite square root; throws NumericalError when the
/// minimum eigenvalue is not safely positive.
Eigen::MatrixXd pd_sqrt(const Eigen::MatrixXd& G);

struct NormalFormResult {
    Eigen::Matrix<double, 7, 1> b;
    Mat4 g;  // world transform: (A g, B g) ~ ([I 0], M(b)); points move by g^{-1}
};

/// Brings a projective camera pair to the ([I 0], M(b)) normal form.
/// Throws NumericalError when the genericity conditions fail.
NormalFormResult normal_form_uncalibrated(const Mat34& A, const Mat34& B);

/// The epipolar matrix compatible with forward_project correspondences:
/// y^T m x = 0 for all projected pairs.  E: [t]_x R; F: closed form F(b).
EpipolarModel epipolar_matrix(const WorldScene& scene);

/// Raw (unnormalized) fundamental matrix of the b parameterization.
Mat3 fundamental_from_b(const Eigen::Matrix<double, 7, 1>& b);

ImageData forward_project(const WorldScene& scene);

/// Unit direction of the world line through both camera centers.
Vec3 baseline(const WorldScene& scene);

/// Max-norm of the trace-identity cubic residuals plus |det m|; zero iff m is
/// (projectively) an essential matrix.  Expects ||m||_F = 1.
double essential_manifold_residual(const Mat3& m);

/// |y^T m x| on homogeneous lifts, scaled by the lift norms.
double epipolar_residual(const Mat3& m, const Vec2& x, const Vec2& y);

} // namespace epicond
