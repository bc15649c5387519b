#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace epicond {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Complex = std::complex<double>;

enum class ProblemKind { essential, fundamental };

inline int minimal_count(ProblemKind k) { return k == ProblemKind::essential ? 5 : 7; }

/// Thrown when a numerical routine cannot produce a certified result.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on invariant violations of domain types.
struct InvariantError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Central tolerances; CLI --tol-overrides writes here before dispatch.
struct Tolerances {
    double orthogonality = 1e-12;
    double manifold_membership = 1e-8;
    double solver_residual = 1e-8;
    double sentinel_rel = 1e-10;      // sigma_min(product) < rel * ||product||_2 -> cond = inf
    double degeneracy_rel = 1e-9;     // |det|/scale and sigma ratio thresholds
    double path_residual = 1e-10;
    double real_imag_tol = 1e-8;
    double root_merge = 1e-7;
    double curve_root_residual = 1e-8;
    double curve_dedup_v = 1e-6;
    static Tolerances& global();
};

// --- deterministic RNG plumbing -------------------------------------------

using Rng = std::mt19937_64;

/// splitmix64 step, used to derive independent per-task seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double rand_uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double rand_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline Vec3 rand_unit_vec3(Rng& rng) {
    Vec3 v;
    do {
        v = Vec3(rand_normal(rng), rand_normal(rng), rand_normal(rng));
    } while (v.norm() < 1e-12);
    return v.normalized();
}

// --- tiny parallel map ------------------------------------------------------
// Results are written by index so aggregation order never depends on the
// thread count; with threads <= 1 it runs inline.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

inline int default_threads() {
    if (const char* env = std::getenv("THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

} // namespace epicond
