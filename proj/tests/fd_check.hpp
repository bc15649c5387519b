#pragma once

#include "epicond/condition.hpp"

#include <cmath>

namespace epicond::testing {

inline Mat3 exp_so3(const Vec3& s) {
    double th = s.norm();
    if (th < 1e-300) return Mat3::Identity();
    Mat3 K = skew(s / th);
    return Mat3::Identity() + std::sin(th) * K + (1 - std::cos(th)) * K * K;
}

inline Eigen::VectorXd flatten_image(const ImageData& d) {
    int n = int(d.pairs.size());
    Eigen::VectorXd out(4 * n);
    for (int i = 0; i < n; ++i) {
        out.segment<2>(2 * i) = d.pairs[size_t(i)].first;
        out.segment<2>(2 * n + 2 * i) = d.pairs[size_t(i)].second;
    }
    return out;
}

/// Scene moved along the orthonormal tangent direction `d` by arclength `h`
/// (geodesic steps on SO(3) and S^2, linear on the points and on b).
inline WorldScene scene_step(const WorldScene& scene, const Eigen::VectorXd& d, double h) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) {
        WorldSceneE out = *e;
        for (int i = 0; i < 5; ++i) out.X[size_t(i)] += h * d.segment<3>(3 * i);
        Vec3 s = d.segment<3>(15) / std::sqrt(2.0);
        out.R = Rotation::from_matrix(e->R.matrix() * exp_so3(h * s));
        Vec3 dt = d(18) * e->t.perp1() + d(19) * e->t.perp2();
        double nrm = std::abs(h) * dt.norm();
        if (nrm > 0) {
            // geodesic step on the sphere; the completion does not enter Phi
            Vec3 dir = (h >= 0 ? 1.0 : -1.0) * dt.normalized();
            Vec3 tn = std::cos(nrm) * e->t.vector() + std::sin(nrm) * dir;
            out.t = UnitTranslation::from_vector(tn.normalized());
        }
        return out;
    }
    const auto& f = std::get<WorldSceneF>(scene);
    WorldSceneF out = f;
    for (int i = 0; i < 7; ++i) out.X[size_t(i)] += h * d.segment<3>(3 * i);
    out.b += h * d.segment<7>(21);
    return out;
}

/// Max relative error of product * delta against central finite differences
/// over `dirs` random unit tangent directions.
inline double fd_relative_error(const WorldScene& scene, Rng& rng, int dirs = 4, double eps = 1e-6) {
    ForwardJacobian J = jacobian_forward(scene);
    const int dim = int(J.product.cols());
    double worst = 0.0;
    for (int k = 0; k < dirs; ++k) {
        Eigen::VectorXd d(dim);
        for (int i = 0; i < dim; ++i) d(i) = rand_normal(rng);
        d.normalize();
        Eigen::VectorXd fd = (flatten_image(forward_project(scene_step(scene, d, eps))) -
                              flatten_image(forward_project(scene_step(scene, d, -eps)))) /
                             (2 * eps);
        Eigen::VectorXd an = J.product * d;
        worst = std::max(worst, (fd - an).norm() / std::max(1e-12, an.norm()));
    }
    return worst;
}

} // namespace epicond::testing
