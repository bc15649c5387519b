#include "helpers.hpp"

#include "epicond/solvers.hpp"

#include <doctest.h>

#include <complex>

using namespace epicond;
using namespace epicond::testing;

TEST_SUITE_BEGIN("solvers");

TEST_CASE("real_roots") {
    SUBCASE("cubic with one real root") {
        auto r = real_roots({-1, 0, 0, 1});  // t^3 - 1
        REQUIRE(r.size() == 1);
        CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("double root collapsed") {
        // (t-1)^2 (t+2) = t^3 - 3t + 2
        auto r = real_roots({2, -3, 0, 1});
        REQUIRE(r.size() == 2);
        CHECK(r[0] == doctest::Approx(-2.0).epsilon(1e-9));
        CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("degree 10 with known roots") {
        Rng rng(41);
        std::vector<double> roots;
        for (int i = 0; i < 10; ++i) roots.push_back(rand_uniform(rng, -3, 3));
        std::sort(roots.begin(), roots.end());
        std::vector<double> c = {1.0};
        for (double r0 : roots) {
            std::vector<double> nc(c.size() + 1, 0.0);
            for (size_t k = 0; k < c.size(); ++k) {
                nc[k] -= r0 * c[k];
                nc[k + 1] += c[k];
            }
            c = nc;
        }
        auto found = real_roots(c);
        REQUIRE(found.size() == 10);
        for (int i = 0; i < 10; ++i) CHECK(std::abs(found[size_t(i)] - roots[size_t(i)]) < 1e-9);
    }
    SUBCASE("leading-coefficient truncation and errors") {
        auto r = real_roots({-4, 0, 1, 1e-16});  // effectively t^2 - 4
        REQUIRE(r.size() == 2);
        CHECK(r[0] == doctest::Approx(-2.0));
        CHECK(r[1] == doctest::Approx(2.0));
        CHECK_THROWS_AS(real_roots({0.0, 0.0}), NumericalError);
        CHECK(real_roots({5.0}).empty());
    }
}

TEST_CASE("nullspace_basis") {
    Rng rng(42);
    SUBCASE("seven epipolar rows give a 2-dim basis containing the truth") {
        WorldSceneF s = random_scene_f(rng);
        ImageData d = forward_project(WorldScene(s));
        Eigen::MatrixXd W(7, 9);
        for (int i = 0; i < 7; ++i)
            W.row(i) = epipolar_row(d.pairs[size_t(i)].first, d.pairs[size_t(i)].second).transpose();
        auto basis = nullspace_basis(W, 2);
        REQUIRE(basis.size() == 2);
        Mat3 T = epipolar_matrix(WorldScene(s)).m;
        // projection of the truth onto the basis span
        Mat3 P = (T.cwiseProduct(basis[0])).sum() * basis[0] + (T.cwiseProduct(basis[1])).sum() * basis[1];
        CHECK((P - T).norm() < 1e-9);
    }
    SUBCASE("five rows give a 4-dim basis containing the truth") {
        WorldSceneE s = random_scene_e(rng);
        ImageData d = forward_project(WorldScene(s));
        Eigen::MatrixXd W(5, 9);
        for (int i = 0; i < 5; ++i)
            W.row(i) = epipolar_row(d.pairs[size_t(i)].first, d.pairs[size_t(i)].second).transpose();
        auto basis = nullspace_basis(W, 4);
        REQUIRE(basis.size() == 4);
        Mat3 T = epipolar_matrix(WorldScene(s)).m;
        Mat3 P = Mat3::Zero();
        for (const auto& B : basis) P += (T.cwiseProduct(B)).sum() * B;
        CHECK((P - T).norm() < 1e-9);
    }
    SUBCASE("duplicate correspondences fail the rank check") {
        WorldSceneF s = random_scene_f(rng);
        ImageData d = forward_project(WorldScene(s));
        Eigen::MatrixXd W(7, 9);
        for (int i = 0; i < 7; ++i)
            W.row(i) = epipolar_row(d.pairs[size_t(i)].first, d.pairs[size_t(i)].second).transpose();
        W.row(6) = W.row(5);
        CHECK_THROWS_AS(nullspace_basis(W, 2), NumericalError);
    }
    SUBCASE("deterministic sign") {
        WorldSceneF s = random_scene_f(rng);
        ImageData d = forward_project(WorldScene(s));
        Eigen::MatrixXd W(7, 9);
        for (int i = 0; i < 7; ++i)
            W.row(i) = epipolar_row(d.pairs[size_t(i)].first, d.pairs[size_t(i)].second).transpose();
        auto a = nullspace_basis(W, 2), b = nullspace_basis(W, 2);
        CHECK((a[0] - b[0]).norm() == 0.0);
        CHECK((a[1] - b[1]).norm() == 0.0);
    }
}

TEST_CASE("solve_seven_point recovers synthetic scenes") {
    Rng rng(43);
    int ones = 0, threes = 0;
    for (int trial = 0; trial < 60; ++trial) {
        WorldSceneF s = random_scene_f(rng);
        ImageData d = forward_project(WorldScene(s));
        SolverOutput out = solve_seven_point(d.pairs);
        CHECK(out.real_count >= 1);
        CHECK(out.real_count <= 3);
        CHECK(out.residual_max < 1e-8);
        if (!out.near_degenerate) CHECK((out.real_count % 2) == 1);
        if (out.real_count == 1) ++ones;
        if (out.real_count == 3) ++threes;
        Mat3 T = epipolar_matrix(WorldScene(s)).m;
        double best = 1e9;
        for (const auto& m : out.models) best = std::min(best, geodesic_distance(m.m, T));
        CHECK(best < 1e-6);
    }
    CHECK(ones > 0);
    CHECK(threes > 0);
}

TEST_CASE("solve_five_point recovers synthetic scenes") {
    Rng rng(44);
    for (int trial = 0; trial < 60; ++trial) {
        WorldSceneE s = random_scene_e(rng);
        ImageData d = forward_project(WorldScene(s));
        SolverOutput out = solve_five_point(d.pairs);
        CHECK(out.real_count <= 10);
        CHECK(out.residual_max < 1e-8);
        for (const auto& m : out.models) {
            Eigen::JacobiSVD<Mat3> svd(m.m);
            CHECK(svd.singularValues()(0) - svd.singularValues()(1) < 1e-8);
            CHECK(svd.singularValues()(2) < 1e-8);
        }
        Mat3 T = epipolar_matrix(WorldScene(s)).m;
        double best = 1e9;
        for (const auto& m : out.models) best = std::min(best, geodesic_distance(m.m, T));
        CHECK(best < 1e-6);
    }
}

TEST_CASE("five-point elimination agrees with a dense multistart oracle") {
    // Gauss-Newton on the ten cubics in (x, y, z) from random complex starts
    Rng rng(45);
    int instances = 0;
    for (int trial = 0; trial < 40 && instances < 20; ++trial) {
        WorldSceneE s = random_scene_e(rng);
        ImageData d = forward_project(WorldScene(s));

        Eigen::MatrixXd W(5, 9);
        for (int i = 0; i < 5; ++i)
            W.row(i) = epipolar_row(d.pairs[size_t(i)].first, d.pairs[size_t(i)].second).transpose();
        auto Eb = nullspace_basis(W, 4);

        auto cubics = [&](const Eigen::Vector3cd& v, Eigen::VectorXcd& f, Eigen::MatrixXcd* Jout) {
            Eigen::Matrix3cd E = v(0) * Eb[0] + v(1) * Eb[1] + v(2) * Eb[2] + Eb[3].cast<Complex>();
            Eigen::Matrix3cd C = 2.0 * E * E.transpose() * E - (E * E.transpose()).trace() * E;
            f.resize(10);
            f(0) = E.determinant();
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) f(1 + 3 * r + c) = C(r, c);
            if (Jout) {
                Jout->resize(10, 3);
                for (int j = 0; j < 3; ++j) {
                    Eigen::Matrix3cd Ej = Eb[size_t(j)].cast<Complex>();
                    Complex ddet = 0;
                    for (int r = 0; r < 3; ++r) {
                        Eigen::Matrix3cd Em = E;
                        Em.row(r) = Ej.row(r);
                        ddet += Em.determinant();
                    }
                    (*Jout)(0, j) = ddet;
                    Eigen::Matrix3cd dC = 2.0 * (Ej * E.transpose() * E + E * Ej.transpose() * E +
                                                 E * E.transpose() * Ej) -
                                          2.0 * (E.cwiseProduct(Ej)).sum() * E -
                                          (E * E.transpose()).trace() * Ej;
                    for (int r = 0; r < 3; ++r)
                        for (int c = 0; c < 3; ++c) (*Jout)(1 + 3 * r + c, j) = dC(r, c);
                }
            }
        };

        std::vector<Eigen::Vector3cd> found;
        for (int start = 0; start < 200; ++start) {
            Eigen::Vector3cd v;
            for (int i = 0; i < 3; ++i) v(i) = Complex(rand_normal(rng), rand_normal(rng)) * 2.0;
            bool converged = false;
            for (int it = 0; it < 60; ++it) {
                Eigen::VectorXcd f;
                Eigen::MatrixXcd J;
                cubics(v, f, &J);
                Eigen::Vector3cd dv = (J.adjoint() * J).ldlt().solve(-(J.adjoint() * f));
                if (!dv.allFinite()) break;
                v += dv;
                if (dv.norm() < 1e-14 * (1 + v.norm())) {
                    Eigen::VectorXcd fc;
                    cubics(v, fc, nullptr);
                    converged = fc.norm() < 1e-10;
                    break;
                }
            }
            if (!converged || v.norm() > 1e6) continue;
            bool dup = false;
            for (const auto& w : found)
                if ((w - v).norm() < 1e-6 * (1 + v.norm())) dup = true;
            if (!dup) found.push_back(v);
        }

        SolverOutput out = solve_five_point(d.pairs);

        // every solver model corresponds to a real oracle solution and
        // every real oracle solution to a solver model
        int oracle_real = 0;
        for (const auto& v : found) {
            if (std::max({std::abs(v(0).imag()), std::abs(v(1).imag()), std::abs(v(2).imag())}) > 1e-6)
                continue;
            ++oracle_real;
            Mat3 E = v(0).real() * Eb[0] + v(1).real() * Eb[1] + v(2).real() * Eb[2] + Eb[3];
            double best = 1e9;
            for (const auto& m : out.models) best = std::min(best, geodesic_distance(m.m, E));
            CHECK(best < 1e-6);
        }
        CHECK(oracle_real == out.real_count);
        ++instances;
    }
    CHECK(instances == 20);
}

TEST_CASE("five_point_polynomial exposes the degree-10 eliminant") {
    Rng rng(46);
    WorldSceneE s = random_scene_e(rng);
    ImageData d = forward_project(WorldScene(s));
    auto poly = five_point_polynomial(d.pairs);
    CHECK(poly.size() == 11);
    SolverOutput out = solve_five_point(d.pairs);
    CHECK(int(real_roots(poly).size()) >= out.real_count);
}

TEST_CASE("decompose_essential") {
    Rng rng(47);
    SUBCASE("round trip with cheirality") {
        for (int trial = 0; trial < 20; ++trial) {
            WorldSceneE s = random_scene_e(rng);
            // make sure the scene is in front of both cameras (cheirality data)
            bool ok = true;
            for (int i = 0; i < 5; ++i)
                if (s.X[size_t(i)].z() < 0.2 || s.second_camera_point(i).z() < 0.2) ok = false;
            if (!ok) continue;
            EpipolarModel E = epipolar_matrix(WorldScene(s));
            ImageData d = forward_project(WorldScene(s));
            RelativePose pose = decompose_essential(E, d.pairs);
            // rotation angle error
            Mat3 dR = pose.R.matrix().transpose() * s.R.matrix();
            double angle = std::acos(std::clamp((dR.trace() - 1) / 2, -1.0, 1.0));
            CHECK(angle < 1e-6);
            CHECK(std::min((pose.t.vector() - s.t.vector()).norm(),
                           (pose.t.vector() + s.t.vector()).norm()) < 1e-6);
            CHECK(geodesic_distance(skew(pose.t.vector()) * pose.R.matrix(), E.m) < 1e-8);
        }
    }
    SUBCASE("twisted pair rejected by depth counts") {
        WorldSceneE s = random_scene_e(rng);
        bool ok = true;
        for (int i = 0; i < 5; ++i)
            if (s.X[size_t(i)].z() < 0.2 || s.second_camera_point(i).z() < 0.2) ok = false;
        REQUIRE(ok);
        EpipolarModel E = epipolar_matrix(WorldScene(s));
        ImageData d = forward_project(WorldScene(s));
        RelativePose pose = decompose_essential(E, d.pairs);
        // the other three candidates leave at least one point behind a camera
        Eigen::JacobiSVD<Mat3> svd(E.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Mat3 U = svd.matrixU(), V = svd.matrixV();
        if (U.determinant() < 0) U = -U;
        if (V.determinant() < 0) V = -V;
        Mat3 Wm;
        Wm << 0, -1, 0, 1, 0, 0, 0, 0, 1;
        int matching = 0;
        for (const Mat3& R : {Mat3(U * Wm * V.transpose()), Mat3(U * Wm.transpose() * V.transpose())})
            for (const Vec3& t : {Vec3(U.col(2)), Vec3(-U.col(2))}) {
                bool is_chosen = (R - pose.R.matrix()).norm() < 1e-9 &&
                                 (t - pose.t.vector()).norm() < 1e-9;
                if (is_chosen) ++matching;
            }
        CHECK(matching == 1);
    }
    SUBCASE("pair at the epipole fails") {
        WorldSceneE s = random_scene_e(rng);
        EpipolarModel E = epipolar_matrix(WorldScene(s));
        // the epipoles: images of the camera centers
        Vec3 c2_in_1 = -s.R.matrix().transpose() * s.t.vector();
        Vec3 c1_in_2 = s.t.vector();
        if (std::abs(c2_in_1.z()) > 1e-6 && std::abs(c1_in_2.z()) > 1e-6) {
            std::vector<PairXY> pairs = {{c2_in_1.hnormalized(), c1_in_2.hnormalized()}};
            CHECK_THROWS_AS(decompose_essential(E, pairs), NumericalError);
        }
    }
}

TEST_CASE("sampson_distance") {
    Rng rng(48);
    WorldSceneF s = random_scene_f(rng);
    EpipolarModel F = epipolar_matrix(WorldScene(s));
    ImageData d = forward_project(WorldScene(s));

    SUBCASE("zero on exact pairs") {
        for (const auto& pr : d.pairs) CHECK(sampson_distance(F, pr) < 1e-18);
    }
    SUBCASE("first-order value for a unit normal displacement") {
        const auto& pr = d.pairs[0];
        Vec3 l = F.m * pr.first.homogeneous();
        Vec2 n = Vec2(l(0), l(1)).normalized();
        PairXY moved = pr;
        moved.second += n;
        double sd = sampson_distance(F, moved);
        // the two-sided Sampson splits the unit correction across both images
        Vec3 lt = F.m.transpose() * moved.second.homogeneous();
        double expect = std::pow(l.dot(moved.second.homogeneous()), 2) /
                        (Vec2(l(0), l(1)).squaredNorm() + Vec2(lt(0), lt(1)).squaredNorm());
        CHECK(sd == doctest::Approx(expect));
        CHECK(sd > 0.0);
        CHECK(sd <= 1.0 + 1e-9);
    }
    SUBCASE("symmetric under transpose + swap") {
        PairXY pr = d.pairs[1];
        pr.second += Vec2(0.3, -0.2);
        EpipolarModel Ft = F;
        Ft.m = F.m.transpose();
        PairXY swapped = {pr.second, pr.first};
        CHECK(sampson_distance(F, pr) == doctest::Approx(sampson_distance(Ft, swapped)).epsilon(1e-12));
    }
}

TEST_SUITE_END();
