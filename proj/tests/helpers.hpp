#pragma once

#include "epicond/bench.hpp"
#include "epicond/geometry.hpp"

#include <doctest.h>

namespace epicond::testing {

// Unit-scale scene samplers for numerical checks (depths away from zero).
inline WorldSceneE random_scene_e(Rng& rng) {
    for (;;) {
        WorldSceneE s;
        s.R = Rotation::random(rng);
        s.t = UnitTranslation::from_vector(rand_unit_vec3(rng));
        bool ok = true;
        for (int i = 0; i < 5; ++i) {
            s.X[size_t(i)] = Vec3(rand_uniform(rng, -2, 2), rand_uniform(rng, -2, 2), rand_uniform(rng, 2, 8));
            if (std::abs(s.second_camera_point(i).z()) < 0.3) ok = false;
        }
        if (ok) return s;
    }
}

inline WorldSceneF random_scene_f(Rng& rng) {
    for (;;) {
        WorldSceneF s;
        for (int i = 0; i < 7; ++i) s.b[i] = rand_normal(rng);
        bool ok = true;
        for (int i = 0; i < 7; ++i) {
            s.X[size_t(i)] = Vec3(rand_uniform(rng, -2, 2), rand_uniform(rng, -2, 2), rand_uniform(rng, 2, 8));
            if (std::abs(s.second_camera_point(i).z()) < 0.3) ok = false;
        }
        if (!ok) continue;
        try {
            s.validate();
            return s;
        } catch (const InvariantError&) {
        }
    }
}

inline WorldScene random_scene(ProblemKind kind, Rng& rng) {
    if (kind == ProblemKind::essential) return random_scene_e(rng);
    return random_scene_f(rng);
}

inline Mat3 rotation_about(const Vec3& axis_unit, double angle) {
    Mat3 K = skew(axis_unit);
    return Mat3::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
}

} // namespace epicond::testing
