#include "epicond/illposed.hpp"

#include "epicond/condition.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace epicond {

static DegeneracyCertificate finalize(Eigen::MatrixXd M, std::vector<Vec3> pts) {
    DegeneracyCertificate cert;
    cert.matrix = std::move(M);
    cert.det = cert.matrix.determinant();
    cert.scale = 1.0;
    for (int r = 0; r < cert.matrix.rows(); ++r) cert.scale *= cert.matrix.row(r).norm();
    if (cert.scale == 0.0) cert.scale = 1.0;
    if (std::abs(cert.det) < Tolerances::global().degeneracy_rel * cert.scale) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(cert.matrix, Eigen::ComputeFullV);
        cert.kernel_vector = svd.matrixV().col(cert.matrix.cols() - 1);
    }
    cert.transformed_points = std::move(pts);
    return cert;
}

DegeneracyCertificate degeneracy_matrix(const WorldScene& scene) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) {
        e->validate();
        // frame change: X <- R X, then rotate so t -> e3, tperp_k -> e_k
        Mat3 U;
        U.row(0) = e->t.perp1().transpose();
        U.row(1) = e->t.perp2().transpose();
        U.row(2) = e->t.vector().transpose();
        Mat3 T = U * e->R.matrix();
        Eigen::MatrixXd M(5, 5);
        std::vector<Vec3> pts;
        for (int i = 0; i < 5; ++i) {
            Vec3 Z = T * e->X[size_t(i)];
            pts.push_back(Z);
            // unknowns ordered (s3, s2, s1, dt1, dt2)
            M.row(i) << Z.x() * Z.x() + Z.y() * Z.y(), -Z.y() * Z.z(), -Z.x() * Z.z(), Z.y(), -Z.x();
        }
        return finalize(std::move(M), std::move(pts));
    }
    const auto& f = std::get<WorldSceneF>(scene);
    f.validate();
    const double b1 = f.b[0], b2 = f.b[1], b4 = f.b[3], b5 = f.b[4], b6 = f.b[5];
    Eigen::MatrixXd M(7, 7);
    for (int i = 0; i < 7; ++i) {
        const Vec3& X = f.X[size_t(i)];
        const double x1 = X.x(), x2 = X.y(), x3 = X.z();
        M.row(i) << -b4 * x1 * x2 - b5 * x2 * x2 - b6 * x2 * x3,
            -b4 * x1 * x3 - b5 * x2 * x3 - b6 * x3 * x3,
            -b4 * x1 - b5 * x2 - b6 * x3,
            x1 * x1 + b1 * x1 * x2 + b2 * x1 * x3,
            x1 * x2 + b1 * x2 * x2 + b2 * x2 * x3,
            x1 * x3 + b1 * x2 * x3 + b2 * x3 * x3,
            x1 + b1 * x2 + b2 * x3;
    }
    return finalize(std::move(M), {});
}

IllPosedVerdict is_ill_posed(const WorldScene& scene, double tol) {
    ForwardJacobian J = jacobian_forward(scene);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J.product);
    const auto& sv = svd.singularValues();
    IllPosedVerdict v;
    v.margin = sv(sv.size() - 1) / sv(0);
    v.ill_posed = v.margin < tol;
    return v;
}

Quadric rectangular_quadric(const Eigen::Matrix<double, 5, 1>& q) {
    if (q.norm() == 0.0) throw InvariantError("rectangular_quadric: zero coefficient vector");
    Quadric out;
    Mat4& Q = out.Q;
    Q.setZero();
    Q(0, 0) = Q(1, 1) = q[0];
    Q(0, 2) = Q(2, 0) = q[2] / 2;  // z1 z3
    Q(1, 2) = Q(2, 1) = q[1] / 2;  // z2 z3
    Q(0, 3) = Q(3, 0) = q[4] / 2;  // z1
    Q(1, 3) = Q(3, 1) = q[3] / 2;  // z2
    return out;
}

bool quadric_contains_baseline(const Quadric& Q, const Vec3& dir) {
    Q.validate();
    if (std::abs(dir.norm() - 1.0) > 1e-8) throw InvariantError("quadric_contains_baseline: dir must be unit");
    const Mat3 A = Q.Q.topLeftCorner<3, 3>();
    const Vec3 c = Q.Q.topRightCorner<3, 1>();
    double scale = Q.Q.cwiseAbs().maxCoeff();
    // coefficients of lambda^2, lambda, 1
    double c2 = dir.dot(A * dir);
    double c1 = 2.0 * dir.dot(c);
    double c0 = Q.Q(3, 3);
    return std::abs(c2) < 1e-10 * scale && std::abs(c1) < 1e-10 * scale && std::abs(c0) < 1e-10 * scale;
}

Quadric quadric_through_line(const Vec3& dir, Rng& rng) {
    // three linear conditions on the 10-dim space of symmetric 4x4 matrices
    std::vector<Mat4> basis;
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) {
            Mat4 B = Mat4::Zero();
            B(i, j) = B(j, i) = 1.0;
            basis.push_back(B);
        }
    Eigen::MatrixXd C(3, 10);
    for (int k = 0; k < 10; ++k) {
        const Mat4& B = basis[size_t(k)];
        C(0, k) = dir.dot(B.topLeftCorner<3, 3>() * dir);
        C(1, k) = dir.dot(B.topRightCorner<3, 1>());
        C(2, k) = B(3, 3);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    // columns 3..9 of V span the kernel: the 7-dim family through the line
    Quadric out;
    out.Q.setZero();
    for (int k = 3; k < 10; ++k) {
        double w = rand_normal(rng);
        for (int idx = 0; idx < 10; ++idx) out.Q += w * svd.matrixV()(idx, k) * basis[size_t(idx)];
    }
    out.Q /= out.Q.norm();
    return out;
}

std::vector<Vec3> sample_on_quadric(const Quadric& Q, int count, std::uint64_t rng_seed) {
    Q.validate();
    Rng rng(rng_seed);
    std::vector<Vec3> pts;
    const double scale = Q.Q.cwiseAbs().maxCoeff();
    for (int attempt = 0; attempt < 4000 && int(pts.size()) < count; ++attempt) {
        // fix z2, z3 and solve the quadratic in z1
        double z2 = rand_uniform(rng, -2.5, 2.5);
        double z3 = rand_uniform(rng, 1.0, 6.0) * (rand_uniform(rng, 0, 1) < 0.15 ? -1.0 : 1.0);
        const Mat4& q = Q.Q;
        double a = q(0, 0);
        double b = 2.0 * (q(0, 1) * z2 + q(0, 2) * z3 + q(0, 3));
        double c = q(1, 1) * z2 * z2 + q(2, 2) * z3 * z3 + q(3, 3) + 2.0 * q(1, 2) * z2 * z3 +
                   2.0 * q(1, 3) * z2 + 2.0 * q(2, 3) * z3;
        double z1;
        if (std::abs(a) > 1e-12 * scale) {
            double disc = b * b - 4 * a * c;
            if (disc < 0) continue;
            double r = std::sqrt(disc);
            z1 = (rand_uniform(rng, 0, 1) < 0.5) ? (-b + r) / (2 * a) : (-b - r) / (2 * a);
        } else if (std::abs(b) > 1e-12 * scale) {
            z1 = -c / b;
        } else {
            continue;
        }
        Vec3 P(z1, z2, z3);
        if (!P.allFinite() || P.cwiseAbs().maxCoeff() > 10.0) continue;
        if (std::abs(P.z()) < 0.25) continue;
        if (std::abs(Q.evaluate(P)) > 1e-10 * std::max(1.0, scale * P.squaredNorm())) continue;
        bool dup = false;
        for (const auto& other : pts)
            if ((other - P).norm() < 1e-6) dup = true;
        if (dup) continue;
        pts.push_back(P);
    }
    if (int(pts.size()) < count)
        throw NumericalError("sample_on_quadric: no suitable real points found (empty real locus?)");
    return pts;
}

WorldScene construct_ill_posed(ProblemKind kind, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    for (int attempt = 0; attempt < 50; ++attempt) {
        std::uint64_t sub = mix_seed(rng_seed, std::uint64_t(attempt) + 1);
        if (kind == ProblemKind::essential) {
            Rotation R = Rotation::random(rng);
            UnitTranslation t = UnitTranslation::from_vector(rand_unit_vec3(rng));
            Eigen::Matrix<double, 5, 1> q;
            for (int i = 0; i < 5; ++i) q[i] = rand_normal(rng);
            std::vector<Vec3> pts;
            try {
                pts = sample_on_quadric(rectangular_quadric(q), 5, sub);
            } catch (const NumericalError&) {
                continue;
            }
            // pull the sampled points back through the frame change
            Mat3 U;
            U.row(0) = t.perp1().transpose();
            U.row(1) = t.perp2().transpose();
            U.row(2) = t.vector().transpose();
            Mat3 Tinv = (U * R.matrix()).transpose();
            WorldSceneE s;
            s.R = R;
            s.t = t;
            bool ok = true;
            for (int i = 0; i < 5; ++i) {
                s.X[size_t(i)] = Tinv * pts[size_t(i)];
                if (std::abs(s.X[size_t(i)].z()) < 0.05 || std::abs(s.second_camera_point(i).z()) < 0.05) ok = false;
            }
            if (!ok) continue;
            return s;
        }
        Eigen::Matrix<double, 7, 1> b;
        for (int i = 0; i < 7; ++i) b[i] = rand_normal(rng);
        WorldSceneF s;
        s.b = b;
        Vec3 dir;
        try {
            dir = baseline(WorldScene(s));
        } catch (const NumericalError&) {
            continue;
        }
        Quadric Q = quadric_through_line(dir, rng);
        std::vector<Vec3> pts;
        try {
            pts = sample_on_quadric(Q, 7, sub);
        } catch (const NumericalError&) {
            continue;
        }
        bool ok = true;
        for (int i = 0; i < 7; ++i) {
            s.X[size_t(i)] = pts[size_t(i)];
            if (std::abs(s.X[size_t(i)].z()) < 0.05 || std::abs(s.second_camera_point(i).z()) < 0.05) ok = false;
        }
        if (!ok) continue;
        try {
            s.validate();
        } catch (const InvariantError&) {
            continue;
        }
        return s;
    }
    throw NumericalError("construct_ill_posed: sampling failed");
}

} // namespace epicond
