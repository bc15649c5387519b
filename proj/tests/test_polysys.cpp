#include "epicond/polysys.hpp"

#include <doctest.h>

#include <set>

using namespace epicond;

namespace {

Poly from_callback(int nv, int np, const std::vector<std::pair<Complex, std::vector<uint8_t>>>& terms) {
    Poly p(nv, np);
    for (const auto& [c, e] : terms) p.add_term(c, e);
    p.normalize();
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("polysys");

TEST_CASE("poly arithmetic and differentiation") {
    // (x + 2)(x - 2) = x^2 - 4
    Poly x = Poly::variable(0, 1);
    Poly p = (x + Poly::constant(2, 1)) * (x - Poly::constant(2, 1));
    VecXc pt(1);
    pt(0) = Complex(3, 0);
    CHECK(p.evaluate(pt, VecXc()) == Complex(5, 0));
    CHECK(p.degree() == 2);
    Poly dp = p.derivative(0);
    CHECK(dp.evaluate(pt, VecXc()) == Complex(6, 0));

    // parameters multiply through
    Poly q = Poly::variable(0, 1, 1) * Poly::parameter(0, 1, 1);
    VecXc par(1);
    par(0) = Complex(0, 1);
    CHECK(q.evaluate(pt, par) == Complex(0, 3));
    CHECK(q.degree() == 1);
    CHECK(q.param_degree() == 1);
}

TEST_CASE("evaluate_and_jacobian") {
    SUBCASE("x^2 - 1 at x = 1") {
        PolySystem sys;
        sys.n_vars = 1;
        sys.equations = {from_callback(1, 0, {{1.0, {2}}, {-1.0, {0}}})};
        VecXc pt(1);
        pt(0) = 1.0;
        auto [H, J] = evaluate_and_jacobian(sys, pt);
        CHECK(std::abs(H(0)) == 0.0);
        CHECK(J(0, 0) == Complex(2, 0));
    }
    SUBCASE("random system matches finite differences") {
        Rng rng(51);
        PolySystem sys;
        sys.n_vars = 3;
        for (int e = 0; e < 3; ++e) {
            Poly p(3, 0);
            for (int t = 0; t < 8; ++t) {
                std::vector<uint8_t> ex = {uint8_t(rng() % 3), uint8_t(rng() % 3), uint8_t(rng() % 2)};
                p.add_term(Complex(rand_normal(rng), rand_normal(rng)), ex);
            }
            p.normalize();
            sys.equations.push_back(p);
        }
        VecXc pt(3);
        for (int i = 0; i < 3; ++i) pt(i) = Complex(rand_normal(rng), rand_normal(rng));
        auto [H, J] = evaluate_and_jacobian(sys, pt);
        const double h = 1e-6;
        for (int v = 0; v < 3; ++v) {
            VecXc pp = pt, pm = pt;
            pp(v) += h;
            pm(v) -= h;
            auto Hp = evaluate_and_jacobian(sys, pp).first;
            auto Hm = evaluate_and_jacobian(sys, pm).first;
            for (int e = 0; e < 3; ++e) {
                Complex fd = (Hp(e) - Hm(e)) / (2 * h);
                CHECK(std::abs(fd - J(e, v)) < 1e-6 * (1 + std::abs(J(e, v))));
            }
        }
    }
    SUBCASE("empty system") {
        PolySystem sys;
        sys.n_vars = 2;
        auto [H, J] = evaluate_and_jacobian(sys, VecXc::Zero(2));
        CHECK(H.size() == 0);
        CHECK(J.rows() == 0);
        CHECK(J.cols() == 2);
    }
}

TEST_CASE("square_up") {
    Rng rng(52);
    PolySystem sys;
    sys.n_vars = 2;
    // m = 4 equations, n = 2: x^2 - 1, y^2 - 4, and two consistent extras
    sys.equations = {
        from_callback(2, 0, {{1.0, {2, 0}}, {-1.0, {0, 0}}}),
        from_callback(2, 0, {{1.0, {0, 2}}, {-4.0, {0, 0}}}),
        from_callback(2, 0, {{1.0, {2, 0}}, {1.0, {0, 2}}, {-5.0, {0, 0}}}),
        from_callback(2, 0, {{2.0, {2, 0}}, {-2.0, {0, 0}}}),
    };
    SUBCASE("square input is a no-op") {
        PolySystem square;
        square.n_vars = 2;
        square.equations = {sys.equations[0], sys.equations[1]};
        PolySystem out = square_up(square, 7);
        CHECK(out.equations.size() == 2);
        VecXc pt(2);
        pt(0) = 1.0;
        pt(1) = 2.0;
        CHECK(std::abs(out.equations[0].evaluate(pt, VecXc())) == 0.0);
    }
    SUBCASE("solutions of the original satisfy the squared system") {
        PolySystem out = square_up(sys, 11);
        REQUIRE(out.equations.size() == 2);
        for (double sx : {-1.0, 1.0})
            for (double sy : {-2.0, 2.0}) {
                VecXc pt(2);
                pt(0) = sx;
                pt(1) = sy;
                for (const auto& eq : out.equations) CHECK(std::abs(eq.evaluate(pt, VecXc())) < 1e-12);
            }
    }
    SUBCASE("fewer equations than unknowns rejected") {
        PolySystem tall;
        tall.n_vars = 3;
        tall.equations = {sys.equations[0]};
        CHECK_THROWS_AS(square_up(tall, 1), InvariantError);
    }
}

TEST_CASE("solve_total_degree") {
    SUBCASE("two decoupled quadrics") {
        PolySystem sys;
        sys.n_vars = 2;
        sys.equations = {from_callback(2, 0, {{1.0, {2, 0}}, {-1.0, {0, 0}}}),
                         from_callback(2, 0, {{1.0, {0, 2}}, {-4.0, {0, 0}}})};
        auto results = solve_total_degree(sys, VecXc(), 1);
        CHECK(results.size() == 4);  // total degree exactly
        auto sols = unique_solutions(results);
        REQUIRE(sols.size() == 4);
        std::set<std::pair<int, int>> found;
        for (const auto& s : sols) {
            CHECK(std::abs(s(0).imag()) < 1e-10);
            CHECK(std::abs(s(1).imag()) < 1e-10);
            found.insert({int(std::round(s(0).real())), int(std::round(s(1).real()))});
        }
        CHECK(found == std::set<std::pair<int, int>>{{-1, -2}, {-1, 2}, {1, -2}, {1, 2}});
    }
    SUBCASE("hand-factored system") {
        // {x^3 - x = 0, y - x^2 = 0}: solutions (0,0), (1,1), (-1,1)
        PolySystem sys;
        sys.n_vars = 2;
        sys.equations = {from_callback(2, 0, {{1.0, {3, 0}}, {-1.0, {1, 0}}}),
                         from_callback(2, 0, {{1.0, {0, 1}}, {-1.0, {2, 0}}})};
        auto results = solve_total_degree(sys, VecXc(), 2);
        CHECK(results.size() == 3);
        auto sols = unique_solutions(results);
        REQUIRE(sols.size() == 3);
        std::set<std::pair<int, int>> found;
        for (const auto& s : sols) found.insert({int(std::round(s(0).real())), int(std::round(s(1).real()))});
        CHECK(found == std::set<std::pair<int, int>>{{-1, 1}, {0, 0}, {1, 1}});
    }
    SUBCASE("every converged endpoint satisfies the residual bound") {
        Rng rng(53);
        PolySystem sys;
        sys.n_vars = 2;
        for (int e = 0; e < 2; ++e) {
            Poly p(2, 0);
            for (int t = 0; t < 6; ++t)
                p.add_term(Complex(rand_normal(rng), rand_normal(rng)),
                           {uint8_t(rng() % 3), uint8_t(rng() % 3)});
            p.normalize();
            sys.equations.push_back(p);
        }
        auto results = solve_total_degree(sys, VecXc(), 3);
        int converged = 0;
        for (const auto& r : results) {
            if (!r.converged()) continue;
            ++converged;
            CHECK(r.residual < 1e-10);
            CHECK(system_residual(sys, r.end_point) < 1e-9);
        }
        CHECK(converged > 0);
    }
    SUBCASE("identical seed gives bitwise identical results") {
        PolySystem sys;
        sys.n_vars = 2;
        sys.equations = {from_callback(2, 0, {{1.0, {2, 0}}, {-1.0, {0, 0}}, {0.25, {0, 1}}}),
                         from_callback(2, 0, {{1.0, {0, 2}}, {-4.0, {0, 0}}, {-0.5, {1, 0}}})};
        auto a = solve_total_degree(sys, VecXc(), 42);
        auto b = solve_total_degree(sys, VecXc(), 42);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].status == b[i].status);
            if (a[i].converged())
                CHECK((a[i].end_point - b[i].end_point).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("track_parameter_path") {
    // x^2 - p
    PolySystem sys;
    sys.n_vars = 1;
    sys.n_params = 1;
    sys.equations = {from_callback(1, 1, {{1.0, {2, 0}}, {-1.0, {0, 1}}})};

    VecXc p0(1), p1(1);
    p0(0) = 1.0;
    p1(0) = 4.0;
    VecXc x0(1);
    x0(0) = 1.0;

    SUBCASE("tracks the square root") {
        auto res = track_parameter_path(sys, {x0}, p0, p1);
        REQUIRE(res.size() == 1);
        REQUIRE(res[0].converged());
        CHECK(std::abs(res[0].end_point(0) - Complex(2, 0)) < 1e-9);
    }
    SUBCASE("identity segment") {
        auto res = track_parameter_path(sys, {x0}, p0, p0);
        REQUIRE(res[0].converged());
        CHECK(std::abs(res[0].end_point(0) - Complex(1, 0)) < 1e-12);
    }
    SUBCASE("invalid start rejected") {
        VecXc bad(1);
        bad(0) = 3.0;
        CHECK_THROWS_AS(track_parameter_path(sys, {bad}, p0, p1), InvariantError);
    }
    SUBCASE("continuation agrees with a fresh solve on random parametric systems") {
        Rng rng(54);
        for (int trial = 0; trial < 4; ++trial) {
            PolySystem rnd;
            rnd.n_vars = 3;
            rnd.n_params = 2;
            for (int e = 0; e < 3; ++e) {
                Poly p(3, 2);
                for (int t = 0; t < 7; ++t) {
                    std::vector<uint8_t> ex = {uint8_t(rng() % 4), uint8_t(rng() % 2), uint8_t(rng() % 2),
                                               uint8_t(rng() % 2), uint8_t(rng() % 2)};
                    if (ex[0] + ex[1] + ex[2] == 0) ex[0] = 1;
                    p.add_term(Complex(rand_normal(rng), rand_normal(rng)), ex);
                }
                p.add_term(Complex(rand_normal(rng), rand_normal(rng)), {0, 0, 0, 0, 0});
                p.normalize();
                rnd.equations.push_back(p);
            }
            if (rnd.total_degree() > 27) continue;
            VecXc q0(2), q1(2);
            for (int i = 0; i < 2; ++i) {
                q0(i) = Complex(rand_normal(rng), rand_normal(rng));
                q1(i) = Complex(rand_normal(rng), rand_normal(rng));
            }
            auto at0 = unique_solutions(solve_total_degree(rnd, q0, 5));
            if (at0.empty()) continue;
            auto tracked = track_parameter_path(rnd, at0, q0, q1);
            auto fresh = unique_solutions(solve_total_degree(rnd, q1, 6));
            // every tracked converged endpoint appears among the fresh solutions
            for (const auto& r : tracked) {
                if (!r.converged()) continue;
                double best = 1e9;
                for (const auto& f : fresh)
                    best = std::min(best, (f - r.end_point).cwiseAbs().maxCoeff());
                CHECK(best < 1e-6);
            }
        }
    }
}

TEST_CASE("filter_real") {
    PolySystem sys;
    sys.n_vars = 1;
    sys.equations = {from_callback(1, 0, {{1.0, {2}}, {-4.0, {0}}})};  // x^2 = 4

    auto mk = [&](Complex z) {
        PathResult r;
        r.end_point = VecXc(1);
        r.end_point(0) = z;
        r.status = PathStatus::converged;
        r.residual = 0;
        return r;
    };
    SUBCASE("all-real input unchanged") {
        auto out = filter_real(sys, VecXc(), {mk(2.0), mk(-2.0)}, 1e-6);
        REQUIRE(out.size() == 2);
        CHECK(out[0](0) == doctest::Approx(2.0));
        CHECK(out[1](0) == doctest::Approx(-2.0));
    }
    SUBCASE("conjugate pair dropped") {
        auto out = filter_real(sys, VecXc(), {mk(Complex(0.1, 0.3))}, 1e-6);
        CHECK(out.empty());
    }
    SUBCASE("borderline imaginary part polished to a real root") {
        auto out = filter_real(sys, VecXc(), {mk(Complex(2.0 + 3e-8, 1e-7))}, 1e-6);
        REQUIRE(out.size() == 1);
        VecXc z(1);
        z(0) = out[0](0);
        CHECK(system_residual(sys, z) < 1e-10);
    }
    SUBCASE("non-converged results ignored") {
        PathResult r = mk(2.0);
        r.status = PathStatus::diverged;
        CHECK(filter_real(sys, VecXc(), {r}, 1e-6).empty());
    }
}

TEST_CASE("CompiledFamily matches the plain interface") {
    PolySystem sys;
    sys.n_vars = 2;
    sys.n_params = 1;
    // {x^2 - p, y - x} has solutions (+-sqrt(p), +-sqrt(p))
    sys.equations = {from_callback(2, 1, {{1.0, {2, 0, 0}}, {-1.0, {0, 0, 1}}}),
                     from_callback(2, 1, {{1.0, {0, 1, 0}}, {-1.0, {1, 0, 0}}})};
    CompiledFamily family(sys);
    VecXc p(1);
    p(0) = 9.0;
    auto a = unique_solutions(family.solve_total_degree(p, 4));
    auto b = unique_solutions(solve_total_degree(sys, p, 4));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).cwiseAbs().maxCoeff() == 0.0);

    VecXc probe(2);
    probe(0) = 3.0;
    probe(1) = 3.0;
    CHECK(family.at(p).scaled_residual(probe) < 1e-14);
}

TEST_SUITE_END();
