#include "epicond/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace epicond {

Tolerances& Tolerances::global() {
    static Tolerances tol;
    return tol;
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Rotation Rotation::from_matrix(const Mat3& m) {
    const double tol = Tolerances::global().orthogonality;
    if ((m * m.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
        throw InvariantError("Rotation: matrix not orthogonal within tolerance");
    if (std::abs(m.determinant() - 1.0) > tol)
        throw InvariantError("Rotation: determinant not +1 within tolerance");
    return Rotation(m, unchecked_tag{});
}

Rotation Rotation::random(Rng& rng) {
    Mat3 A;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) A(r, c) = rand_normal(rng);
    Eigen::HouseholderQR<Mat3> qr(A);
    Mat3 Q = qr.householderQ();
    Mat3 Rf = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int c = 0; c < 3; ++c)
        if (Rf(c, c) < 0) Q.col(c) *= -1.0;
    if (Q.determinant() < 0) Q.col(2) *= -1.0;
    // re-orthonormalize exactly enough for the 1e-12 invariant
    Eigen::JacobiSVD<Mat3> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 R = svd.matrixU() * svd.matrixV().transpose();
    return Rotation(R, unchecked_tag{});
}

std::pair<Vec3, Vec3> orthonormal_complement(const Vec3& t) {
    if (t.norm() < 1e-12) throw InvariantError("orthonormal_complement: zero vector");
    Vec3 u = t.normalized();
    int k = 0;
    if (std::abs(u.y()) < std::abs(u[k])) k = 1;
    if (std::abs(u.z()) < std::abs(u[k])) k = 2;
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    Vec3 v1 = (e - u * u[k]).normalized();
    Vec3 v2 = u.cross(v1);
    return {v1, v2};
}

UnitTranslation UnitTranslation::from_vector(const Vec3& t) {
    if (t.norm() < 1e-12) throw InvariantError("UnitTranslation: zero vector");
    Vec3 u = t.normalized();
    auto [p1, p2] = orthonormal_complement(u);
    return UnitTranslation(u, p1, p2);
}

UnitTranslation UnitTranslation::with_completion(const Vec3& t, const Vec3& p1, const Vec3& p2) {
    const double tol = Tolerances::global().orthogonality * 10;
    Eigen::Matrix3d G;
    Mat3 B;
    B.col(0) = t;
    B.col(1) = p1;
    B.col(2) = p2;
    G = B.transpose() * B;
    if ((G - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
        throw InvariantError("UnitTranslation: completion not orthonormal");
    if (p1.cross(p2).dot(t) < 0)
        throw InvariantError("UnitTranslation: completion not right-handed");
    return UnitTranslation(t, p1, p2);
}

void WorldSceneE::validate() const {
    for (int i = 0; i < 5; ++i) {
        if (std::abs(X[size_t(i)].z()) < 1e-12)
            throw InvariantError("WorldSceneE: point " + std::to_string(i) + " has zero depth");
        if (std::abs(second_camera_point(i).z()) < 1e-12)
            throw InvariantError("WorldSceneE: point " + std::to_string(i) + " has zero depth in second camera");
    }
}

Mat34 WorldSceneF::camera_matrix(const Eigen::Matrix<double, 7, 1>& b) {
    Mat34 M;
    M << 1, b[0], b[1], b[2], b[3], b[4], b[5], b[6], 0, 0, 0, 1;
    return M;
}

void WorldSceneF::validate() const {
    Eigen::JacobiSVD<Mat34> svd(M());
    if (svd.singularValues()(2) < 1e-10 * svd.singularValues()(0))
        throw InvariantError("WorldSceneF: M(b) is rank deficient");
    for (int i = 0; i < 7; ++i) {
        if (std::abs(X[size_t(i)].z()) < 1e-12)
            throw InvariantError("WorldSceneF: point " + std::to_string(i) + " has zero depth");
        if (std::abs(second_camera_point(i).z()) < 1e-12)
            throw InvariantError("WorldSceneF: point " + std::to_string(i) + " has zero depth in second camera");
    }
}

int point_count(const WorldScene& s) {
    return kind_of(s) == ProblemKind::essential ? 5 : 7;
}

Vec3 scene_point(const WorldScene& s, int i) {
    if (auto* e = std::get_if<WorldSceneE>(&s)) return e->X[size_t(i)];
    return std::get<WorldSceneF>(s).X[size_t(i)];
}

void ImageData::validate() const {
    for (const auto& [x, y] : pairs)
        if (!x.allFinite() || !y.allFinite())
            throw InvariantError("ImageData: non-finite coordinate");
}

Mat3 EpipolarModel::normalize_canon(const Mat3& raw) {
    double n = raw.norm();
    if (n < 1e-300) throw InvariantError("EpipolarModel: zero matrix");
    Mat3 m = raw / n;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            if (std::abs(m(r, c)) > 1e-9) return m(r, c) > 0 ? m : Mat3(-m);
        }
    return m;
}

EpipolarModel EpipolarModel::make(ProblemKind kind, const Mat3& raw) {
    EpipolarModel out;
    out.kind = kind;
    out.m = normalize_canon(raw);
    const auto& tol = Tolerances::global();
    Eigen::JacobiSVD<Mat3> svd(out.m);
    Vec3 s = svd.singularValues();
    if (kind == ProblemKind::essential) {
        if (s(0) - s(1) > tol.manifold_membership || s(2) > tol.manifold_membership)
            throw InvariantError("EpipolarModel: not an essential matrix (singular values)");
    } else {
        if (std::abs(out.m.determinant()) > tol.manifold_membership)
            throw InvariantError("EpipolarModel: fundamental matrix has nonzero determinant");
        if (s(1) < 1e-8) throw InvariantError("EpipolarModel: rank below 2");
    }
    return out;
}

double geodesic_distance(const Mat3& a, const Mat3& b) {
    Mat3 an = a / a.norm(), bn = b / b.norm();
    double dm = (an - bn).norm(), dp = (an + bn).norm();
    return 2.0 * std::asin(std::min(1.0, std::min(dm, dp) / 2.0));
}

void Quadric::validate() const {
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvariantError("Quadric: matrix not symmetric");
    if (Q.cwiseAbs().maxCoeff() < 1e-300) throw InvariantError("Quadric: zero matrix");
}

std::array<Mat3, 3> tangent_basis_so3(const Rotation& R) {
    const double s = 1.0 / std::sqrt(2.0);
    std::array<Mat3, 3> out;
    for (int j = 0; j < 3; ++j) {
        Vec3 e = Vec3::Zero();
        e[j] = 1.0;
        out[size_t(j)] = s * R.matrix() * skew(e);
    }
    return out;
}

Eigen::Matrix<double, 5, 5> grammian_essential(const Vec3& t, const Vec3& tp1, const Vec3& tp2) {
    Eigen::Matrix<double, 5, 5> G;
    const double c = 1.0 / (2.0 * std::sqrt(2.0));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) G(i, j) = 0.25 * t[i] * t[j] + (i == j ? 0.25 : 0.0);
    const Vec3* tp[2] = {&tp1, &tp2};
    for (int k = 0; k < 2; ++k) {
        const Vec3& p = *tp[k];
        Vec3 cr = t.cross(p);  // rows are c * (t x tperp_k)
        for (int i = 0; i < 3; ++i) {
            G(i, 3 + k) = c * cr[i];
            G(3 + k, i) = c * cr[i];
        }
    }
    G(3, 3) = G(4, 4) = 1.0;
    G(3, 4) = G(4, 3) = 0.0;
    return G;
}

Mat3 fundamental_from_b(const Eigen::Matrix<double, 7, 1>& b) {
    Mat3 F;
    F << b[3], b[4], b[5],
        -1, -b[0], -b[1],
        -b[2] * b[3] + b[6], -b[2] * b[4] + b[0] * b[6], -b[2] * b[5] + b[1] * b[6];
    return F;
}

Eigen::Matrix<double, 7, 7> grammian_fundamental(const Eigen::Matrix<double, 7, 1>& b) {
    const double b1 = b[0], b2 = b[1], b3 = b[2], b4 = b[3], b5 = b[4], b6 = b[5], b7 = b[6];
    Eigen::Matrix<double, 7, 7> G;
    G << b7 * b7 + 1, 0, -b5 * b7, 0, -b3 * b7, 0, b1 * b7,
        0, b7 * b7 + 1, -b6 * b7, 0, 0, -b3 * b7, b2 * b7,
        -b5 * b7, -b6 * b7, b4 * b4 + b5 * b5 + b6 * b6, b3 * b4, b3 * b5, b3 * b6, -b1 * b5 - b2 * b6 - b4,
        0, 0, b3 * b4, b3 * b3 + 1, 0, 0, -b3,
        -b3 * b7, 0, b3 * b5, 0, b3 * b3 + 1, 0, -b1 * b3,
        0, -b3 * b7, b3 * b6, 0, 0, b3 * b3 + 1, -b2 * b3,
        b1 * b7, b2 * b7, -b1 * b5 - b2 * b6 - b4, -b3, -b1 * b3, -b2 * b3, b1 * b1 + b2 * b2 + 1;
    return G / fundamental_from_b(b).squaredNorm();
}

Eigen::MatrixXd grammian(const WorldScene& scene) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) {
        e->validate();
        return grammian_essential(e->t.vector(), e->t.perp1(), e->t.perp2());
    }
    const auto& f = std::get<WorldSceneF>(scene);
    f.validate();
    return grammian_fundamental(f.b);
}

Eigen::MatrixXd pd_sqrt(const Eigen::MatrixXd& G) {
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, G.cwiseAbs().maxCoeff()))
        throw NumericalError("pd_sqrt: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const auto& ev = es.eigenvalues();
    if (ev.minCoeff() <= 1e-14 * std::max(1.0, ev.maxCoeff()))
        throw NumericalError("pd_sqrt: matrix not positive definite");
    return es.operatorSqrt();
}

NormalFormResult normal_form_uncalibrated(const Mat34& A, const Mat34& B) {
    Mat4 S;
    S.topRows<3>() = A;
    S.row(3) = B.row(2);
    double scale = std::max(A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff());
    double det = S.determinant();
    if (std::abs(det) < 1e-12 * std::pow(scale, 4))
        throw NumericalError("normal_form_uncalibrated: det[A; B(3,:)] vanishes (degenerate pair)");
    Mat4 g0 = S.inverse();
    Mat34 C = B * g0;
    double s = C(0, 0);
    if (std::abs(s) < 1e-12 * scale)
        throw NumericalError("normal_form_uncalibrated: B(1,:) g(:,1) vanishes (degenerate pair)");
    Mat34 M = C / s;
    M.col(3) *= s;  // rescale so row 3 stays (0,0,0,1) while (1,1) = 1
    NormalFormResult out;
    out.b << M(0, 1), M(0, 2), M(0, 3), M(1, 0), M(1, 1), M(1, 2), M(1, 3);
    out.g = g0;
    out.g.col(3) *= s;  // g = g0 diag(1,1,1,s): B g = s M(b), A g = [I 0]
    return out;
}

EpipolarModel epipolar_matrix(const WorldScene& scene) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) {
        e->validate();
        return EpipolarModel::make(ProblemKind::essential, skew(e->t.vector()) * e->R.matrix());
    }
    const auto& f = std::get<WorldSceneF>(scene);
    f.validate();
    return EpipolarModel::make(ProblemKind::fundamental, fundamental_from_b(f.b));
}

static Vec2 project(const Vec3& p) {
    if (std::abs(p.z()) < 1e-12) throw NumericalError("projection undefined: vanishing third coordinate");
    return Vec2(p.x() / p.z(), p.y() / p.z());
}

ImageData forward_project(const WorldScene& scene) {
    ImageData out;
    int n = point_count(scene);
    out.pairs.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        Vec3 z = scene_point(scene, i);
        Vec3 zt = std::holds_alternative<WorldSceneE>(scene)
                      ? std::get<WorldSceneE>(scene).second_camera_point(i)
                      : std::get<WorldSceneF>(scene).second_camera_point(i);
        out.pairs.emplace_back(project(z), project(zt));
    }
    return out;
}

Vec3 baseline(const WorldScene& scene) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) {
        return (-e->R.matrix().transpose() * e->t.vector()).normalized();
    }
    const auto& b = std::get<WorldSceneF>(scene).b;
    Vec3 v(b[1] * b[4] - b[0] * b[5], -b[1] * b[3] + b[5], b[0] * b[3] - b[4]);
    double n = v.norm();
    if (n < 1e-12) throw NumericalError("baseline: degenerate b, zero direction");
    return v / n;
}

double essential_manifold_residual(const Mat3& m) {
    Mat3 c = 2.0 * m * m.transpose() * m - (m * m.transpose()).trace() * m;
    return c.cwiseAbs().maxCoeff() + std::abs(m.determinant());
}

double epipolar_residual(const Mat3& m, const Vec2& x, const Vec2& y) {
    Vec3 xh = x.homogeneous(), yh = y.homogeneous();
    return std::abs(yh.dot(m * xh)) / (m.norm() * xh.norm() * yh.norm());
}

} // namespace epicond
