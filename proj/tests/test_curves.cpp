#include "helpers.hpp"

#include "epicond/curves.hpp"
#include "epicond/illposed.hpp"

#include <doctest.h>

using namespace epicond;
using namespace epicond::testing;

namespace {

CurveQuery query_from_scene(const WorldScene& scene, Vec2* target, double step = 0.02) {
    ImageData d = forward_project(scene);
    CurveQuery q;
    q.kind = kind_of(scene);
    int n = point_count(scene);
    for (int i = 0; i < n - 1; ++i) q.anchors.push_back(d.pairs[size_t(i)]);
    q.x_last = d.pairs[size_t(n - 1)].first;
    *target = d.pairs[size_t(n - 1)].second;
    q.step = step;
    q.jump_cap = 5 * step;
    return q;
}

double cubic_disc_of_pairs(const std::vector<PairXY>& pairs) {
    SolverOutput out = solve_seven_point(pairs);
    (void)out;
    // rebuild the pencil cubic as the oracle does
    Eigen::MatrixXd W(7, 9);
    for (int i = 0; i < 7; ++i) W.row(i) = epipolar_row(pairs[size_t(i)].first, pairs[size_t(i)].second).transpose();
    auto basis = nullspace_basis(W, 2);
    const Mat3 &F1 = basis[0], &F2 = basis[1];
    double vm = (F1 - F2).determinant(), v0 = F1.determinant();
    double v1 = (F1 + F2).determinant(), v2 = (F1 + 2.0 * F2).determinant();
    double d = v0, bq = 0.5 * (v1 + vm) - v0, S = 0.5 * (v1 - vm);
    double a = (v2 - v0 - 4.0 * bq - 2.0 * S) / 6.0, c = S - a;
    double n2 = a * a + bq * bq + c * c + d * d;
    return (bq * bq * c * c - 4 * a * c * c * c - 4 * bq * bq * bq * d - 27 * a * a * d * d +
            18 * a * bq * c * d) /
           (n2 * n2);
}

}  // namespace

TEST_SUITE_BEGIN("curves");

TEST_CASE("binary cubic discriminant vanishes at a double root") {
    // (t-1)^2 (t+2) = t^3 - 3t + 2: a=1, b=0, c=-3, d=2
    double a = 1, b = 0, c = -3, d = 2;
    CHECK(b * b * c * c - 4 * a * c * c * c - 4 * b * b * b * d - 27 * a * a * d * d + 18 * a * b * c * d ==
          doctest::Approx(0.0));
}

TEST_CASE("F-curve column passes through the known degenerate point") {
    for (std::uint64_t seed : {3u, 4u}) {
        WorldScene scene = construct_ill_posed(ProblemKind::fundamental, seed);
        Vec2 target;
        CurveQuery q = query_from_scene(scene, &target);
        CurveSlice slice = curve_column_F(q, target.x());
        CHECK(int(slice.roots.size()) <= 6);
        double best = 1e9;
        for (double v : slice.roots) best = std::min(best, std::abs(v - target.y()));
        CHECK(best < 1e-5);
        for (double r : slice.residuals) CHECK(r < 1e-8);
    }
}

TEST_CASE("F-curve roots make the seven-point cubic degenerate") {
    Rng rng(61);
    WorldSceneF s = random_scene_f(rng);
    Vec2 target;
    CurveQuery q = query_from_scene(WorldScene(s), &target);
    CurveSlice slice = curve_column_F(q, target.x());
    for (double v : slice.roots) {
        std::vector<PairXY> pairs = q.anchors;
        pairs.emplace_back(q.x_last, Vec2(target.x(), v));
        CHECK(std::abs(cubic_disc_of_pairs(pairs)) < 1e-6);
        SolverOutput out = solve_seven_point(pairs);
        CHECK(out.near_degenerate);
    }
    CHECK(!slice.roots.empty());
}

TEST_CASE("F-curve columns agree with discriminant bisection") {
    Rng rng(62);
    int columns_checked = 0;
    for (int trial = 0; trial < 3; ++trial) {
        WorldSceneF s = random_scene_f(rng);
        Vec2 target;
        CurveQuery q = query_from_scene(WorldScene(s), &target);
        CurveTracer tracer(q);
        for (int col = -2; col <= 2; ++col) {
            double u = target.x() + 0.05 * col;
            CurveSlice slice = tracer.slice(u);
            // bisection oracle over a v-grid
            const double vstep = 0.005, lo = -3.0, hi = 3.0;
            std::vector<double> oracle_roots;
            double prev_v = lo, prev_d = disc_oracle_F(q, u, lo);
            for (double v = lo + vstep; v <= hi; v += vstep) {
                double dv = disc_oracle_F(q, u, v);
                if (std::signbit(dv) != std::signbit(prev_d)) {
                    double a = prev_v, b = v, fa = prev_d;
                    for (int it = 0; it < 60; ++it) {
                        double mid = 0.5 * (a + b), fm = disc_oracle_F(q, u, mid);
                        if (std::signbit(fm) == std::signbit(fa)) {
                            a = mid;
                            fa = fm;
                        } else {
                            b = mid;
                        }
                    }
                    oracle_roots.push_back(0.5 * (a + b));
                }
                prev_v = v;
                prev_d = dv;
            }
            // every oracle root is found by the homotopy
            for (double vr : oracle_roots) {
                double best = 1e9;
                for (double v : slice.roots) best = std::min(best, std::abs(v - vr));
                CHECK(best < 1e-4);
            }
            // every homotopy root in the grid band is confirmed by the oracle
            // value (tangential roots may lack a sign change)
            for (double v : slice.roots) {
                if (v < lo + 0.1 || v > hi - 0.1) continue;
                CHECK(std::abs(disc_oracle_F(q, u, v)) < 1e-6);
            }
            ++columns_checked;
        }
    }
    CHECK(columns_checked == 15);
}

TEST_CASE("disc_oracle_F is scale-stable and generically large") {
    Rng rng(63);
    WorldSceneF s = random_scene_f(rng);
    Vec2 target;
    CurveQuery q = query_from_scene(WorldScene(s), &target);
    int large = 0, total = 0;
    for (double v = -2.0; v <= 2.0; v += 0.37) {
        double d = std::abs(disc_oracle_F(q, target.x(), v));
        ++total;
        if (d > 1e-3) ++large;
    }
    CHECK(large * 2 > total);  // typically far from the curve
}

TEST_CASE("solution count changes by two across an F-curve root") {
    Rng rng(64);
    for (int trial = 0; trial < 3; ++trial) {
        WorldSceneF s = random_scene_f(rng);
        Vec2 target;
        CurveQuery q = query_from_scene(WorldScene(s), &target);
        CurveSlice slice = curve_column_F(q, target.x());
        if (slice.roots.empty()) continue;
        double v0 = slice.roots[0];
        // skip tangential roots (no sign change in the oracle)
        double below = disc_oracle_F(q, target.x(), v0 - 0.05);
        double above = disc_oracle_F(q, target.x(), v0 + 0.05);
        if (std::signbit(below) == std::signbit(above)) continue;
        auto count_at = [&](double v) {
            std::vector<PairXY> pairs = q.anchors;
            pairs.emplace_back(q.x_last, Vec2(target.x(), v));
            return solve_seven_point(pairs).real_count;
        };
        CHECK(std::abs(count_at(v0 - 0.05) - count_at(v0 + 0.05)) == 2);
    }
}

TEST_CASE("E-curve column recovers the known degenerate point") {
    WorldScene scene = construct_ill_posed(ProblemKind::essential, 7);
    Vec2 target;
    CurveQuery q = query_from_scene(scene, &target);
    CurveSlice slice = curve_column_E(q, target.x());
    CHECK(int(slice.roots.size()) <= 30);
    REQUIRE(!slice.roots.empty());
    double best = 1e9;
    for (double v : slice.roots) best = std::min(best, std::abs(v - target.y()));
    CHECK(best < 1e-4);
    for (double r : slice.residuals) CHECK(r < 1e-8);

    // the completed five-point instance has a degenerate eliminant
    for (double v : slice.roots) {
        if (std::abs(v - target.y()) > 1e-4) continue;
        std::vector<PairXY> pairs = q.anchors;
        pairs.emplace_back(q.x_last, Vec2(target.x(), v));
        auto poly = five_point_polynomial(pairs);
        Eigen::Map<Eigen::VectorXd> c(poly.data(), long(poly.size()));
        c /= c.norm();
        // resultant(p, p') via the Sylvester matrix
        int n = int(poly.size()) - 1;
        std::vector<double> dp(static_cast<size_t>(n));
        for (int k = 1; k <= n; ++k) dp[size_t(k - 1)] = k * poly[size_t(k)];
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * n - 1, 2 * n - 1);
        for (int r = 0; r < n - 1; ++r)
            for (int k = 0; k <= n; ++k) S(r, r + k) = poly[size_t(n - k)];
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < n; ++k) S(n - 1 + r, r + k) = dp[size_t(n - 1 - k)];
        CHECK(std::abs(S.determinant()) < 1e-5);
    }
}

TEST_CASE("E-curve sweep tracks across columns") {
    WorldScene scene = construct_ill_posed(ProblemKind::essential, 9);
    Vec2 target;
    CurveQuery q = query_from_scene(scene, &target, 0.01);
    CurveTracer tracer(q);
    CurveSlice first = tracer.slice(target.x() - 0.05);
    for (int k = 1; k <= 10; ++k) {
        CurveSlice s = tracer.slice(target.x() - 0.05 + 0.01 * k);
        CHECK(int(s.roots.size()) <= 30);
    }
    CHECK(tracer.columns_since_revalidation() >= 1);
    (void)first;
}

TEST_CASE("curve_sweep assembles branches and tolerates failures") {
    Rng rng(65);
    WorldSceneF s = random_scene_f(rng);
    Vec2 target;
    CurveQuery q = query_from_scene(WorldScene(s), &target, 0.02);
    q.window = {target.x() - 0.2, target.x() + 0.2, -3, 3};
    CurveSweep sweep = curve_sweep(q);
    CHECK(sweep.slices.size() == 21);
    CHECK(sweep.failed_columns.empty());
    for (const auto& seg : sweep.segments) {
        CHECK(seg.col_b == seg.col_a + 1);
        double va = sweep.slices[size_t(seg.col_a)].roots[size_t(seg.root_a)];
        double vb = sweep.slices[size_t(seg.col_b)].roots[size_t(seg.root_b)];
        CHECK(std::abs(va - vb) <= q.jump_cap);
    }
    SUBCASE("empty window yields an empty sweep") {
        CurveQuery empty = q;
        empty.window = {1.0, 0.0, 0.0, 0.0};
        CurveSweep es = curve_sweep(empty);
        CHECK(es.slices.empty());
        CHECK(es.segments.empty());
    }
    SUBCASE("neighborhood scan is a subset of the full sweep") {
        CurveQuery local = q;
        local.window.umin = target.x() - 0.06;
        local.window.umax = target.x() + 0.06;
        CurveSweep ls = curve_sweep(local);
        for (const auto& slice : ls.slices) {
            // find matching column in the full sweep
            for (const auto& full : sweep.slices) {
                if (std::abs(full.u - slice.u) > 1e-12) continue;
                REQUIRE(full.roots.size() == slice.roots.size());
                for (size_t i = 0; i < slice.roots.size(); ++i)
                    CHECK(slice.roots[i] == doctest::Approx(full.roots[i]).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("distance_to_curve") {
    Rng rng(66);
    SUBCASE("zero at a root, sentinel on an empty window") {
        WorldSceneF s = random_scene_f(rng);
        Vec2 target;
        CurveQuery q = query_from_scene(WorldScene(s), &target, 0.02);
        CurveSlice slice = curve_column_F(q, target.x());
        REQUIRE(!slice.roots.empty());
        Vec2 on_curve(target.x(), slice.roots[0]);
        CHECK(distance_to_curve(q, on_curve, 0.1) < q.step / 2);

        // a window far from any curve point returns the sentinel
        CurveQuery far = q;
        Vec2 nowhere(target.x() + 1000.0, 0.0);
        CHECK(std::isinf(distance_to_curve(far, nowhere, 0.04)));
    }
    SUBCASE("projected ill-posed instances sit on the curve") {
        WorldScene scene = construct_ill_posed(ProblemKind::fundamental, 31);
        Vec2 target;
        CurveQuery q = query_from_scene(scene, &target, 0.002);
        // distances in these normalized units: 1 px at f=525 is ~0.0019
        CHECK(distance_to_curve(q, target, 0.01) < 0.002);
    }
}

TEST_CASE("curve is stable under anchor noise") {
    Rng rng(67);
    std::vector<double> diffs;
    for (int trial = 0; trial < 6; ++trial) {
        WorldSceneF s = random_scene_f(rng);
        Vec2 target;
        CurveQuery q = query_from_scene(WorldScene(s), &target, 0.02);
        double d0 = distance_to_curve(q, target, 0.3);
        CurveQuery noisy = q;
        const double sigma = 0.002;  // ~1 px at f = 525
        for (auto& [x, y] : noisy.anchors) {
            x += sigma * Vec2(rand_normal(rng), rand_normal(rng));
            y += sigma * Vec2(rand_normal(rng), rand_normal(rng));
        }
        noisy.x_last += sigma * Vec2(rand_normal(rng), rand_normal(rng));
        double d1 = distance_to_curve(noisy, target, 0.3);
        if (std::isinf(d0) || std::isinf(d1)) continue;
        diffs.push_back(std::abs(d0 - d1));
    }
    REQUIRE(int(diffs.size()) >= 4);
    std::sort(diffs.begin(), diffs.end());
    CHECK(diffs[diffs.size() / 2] < 0.01);  // ~5 px at f = 525
}

TEST_CASE("plucker_minors") {
    SUBCASE("identity block has a single nonzero minor") {
        Eigen::Matrix<double, 7, 9> M = Eigen::Matrix<double, 7, 9>::Zero();
        M.leftCols<7>().setIdentity();
        auto p = plucker_minors(M);
        CHECK(std::abs(p(0)) == doctest::Approx(1.0));  // subset {0..6} is first in lex order
        for (int i = 1; i < 36; ++i) CHECK(p(i) == 0.0);
    }
    SUBCASE("scaling a row leaves the normalized minors unchanged") {
        Rng rng(68);
        Eigen::Matrix<double, 7, 9> M;
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 9; ++c) M(r, c) = rand_normal(rng);
        auto p = plucker_minors(M);
        Eigen::Matrix<double, 7, 9> M2 = M;
        M2.row(3) *= 2.0;
        auto p2 = plucker_minors(M2);
        CHECK((p - p2).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("a sampled Grassmann-Pluecker relation holds") {
        Rng rng(69);
        Eigen::Matrix<double, 7, 9> M;
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 9; ++c) M(r, c) = rand_normal(rng);
        auto p = plucker_minors(M);
        // dual coordinates q_{ab} indexed by the skipped pair, with the sign
        // (-1)^{sum of skipped indices}; then for a < b < c < d:
        // q_{ab} q_{cd} - q_{ac} q_{bd} + q_{ad} q_{bc} = 0
        auto q = [&](int a, int b) {
            // position of skip-pair (a, b) in the emission order (a desc, b desc)
            int idx = 0;
            for (int aa = 7; aa >= 0; --aa)
                for (int bb = 8; bb > aa; --bb) {
                    if (aa == a && bb == b) return ((a + b) % 2 ? -1.0 : 1.0) * p(idx);
                    ++idx;
                }
            return 0.0;
        };
        for (auto [a, b, c, d] : std::vector<std::array<int, 4>>{{0, 1, 2, 3}, {1, 3, 5, 8}, {2, 4, 6, 7}}) {
            double rel = q(a, b) * q(c, d) - q(a, c) * q(b, d) + q(a, d) * q(b, c);
            CHECK(std::abs(rel) < 1e-10);
        }
    }
    SUBCASE("rank-deficient input rejected") {
        Eigen::Matrix<double, 7, 9> M = Eigen::Matrix<double, 7, 9>::Zero();
        CHECK_THROWS_AS(plucker_minors(M), NumericalError);
    }
}

TEST_SUITE_END();
