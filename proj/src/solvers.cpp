#include "epicond/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace epicond {

// ---------------------------------------------------------------- real_roots

static Complex poly_eval(const std::vector<double>& c, Complex z) {
    Complex v = 0.0;
    for (size_t k = c.size(); k-- > 0;) v = v * z + c[k];
    return v;
}

static Complex poly_eval_deriv(const std::vector<double>& c, Complex z) {
    Complex v = 0.0;
    for (size_t k = c.size(); k-- > 1;) v = v * z + double(k) * c[k];
    return v;
}

std::vector<double> real_roots(const std::vector<double>& coeffs) {
    double maxc = 0.0;
    for (double c : coeffs) maxc = std::max(maxc, std::abs(c));
    if (maxc == 0.0 || coeffs.empty()) throw NumericalError("real_roots: zero polynomial");

    int d = int(coeffs.size()) - 1;
    while (d > 0 && std::abs(coeffs[size_t(d)]) <= 1e-13 * maxc) --d;
    if (d == 0) return {};

    std::vector<double> c(coeffs.begin(), coeffs.begin() + d + 1);

    // variable scaling balances the companion matrix
    double s = 0.0;
    for (int k = 0; k < d; ++k)
        s = std::max(s, std::pow(std::abs(c[size_t(k)] / c[size_t(d)]), 1.0 / double(d - k)));
    if (s == 0.0) s = 1.0;

    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < d - 1; ++k) comp(k + 1, k) = 1.0;
    double lead = c[size_t(d)] * std::pow(s, d);
    for (int k = 0; k < d; ++k) comp(k, d - 1) = -c[size_t(k)] * std::pow(s, k) / lead;

    // Parlett-Reinsch balancing (Eigen's eigensolver does not balance, and
    // companion matrices badly need it)
    for (int sweep = 0; sweep < 12; ++sweep) {
        bool converged = true;
        for (int i = 0; i < d; ++i) {
            double cn = 0, rn = 0;
            for (int j = 0; j < d; ++j) {
                if (j == i) continue;
                cn += std::abs(comp(j, i));
                rn += std::abs(comp(i, j));
            }
            if (cn == 0 || rn == 0) continue;
            double f = 1.0;
            const double total = cn + rn;
            while (cn < rn / 2) {
                cn *= 2;
                rn /= 2;
                f *= 2;
            }
            while (cn > rn * 2) {
                cn /= 2;
                rn *= 2;
                f /= 2;
            }
            if (cn + rn < 0.95 * total) {
                converged = false;
                comp.col(i) *= f;
                comp.row(i) /= f;
            }
        }
        if (converged) break;
    }

    Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
    std::vector<double> roots;
    for (int k = 0; k < d; ++k) {
        Complex z = es.eigenvalues()(k) * s;
        for (int it = 0; it < 6; ++it) {
            Complex dp = poly_eval_deriv(c, z);
            if (std::abs(dp) < 1e-300) break;
            Complex step = poly_eval(c, z) / dp;
            z -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        if (std::abs(z.imag()) < Tolerances::global().real_imag_tol * std::max(1.0, std::abs(z)))
            roots.push_back(z.real());
    }
    std::sort(roots.begin(), roots.end());

    // multiplicity collapse
    std::vector<double> out;
    size_t i = 0;
    while (i < roots.size()) {
        size_t j = i + 1;
        double sum = roots[i];
        while (j < roots.size() &&
               std::abs(roots[j] - roots[j - 1]) < Tolerances::global().root_merge * std::max(1.0, std::abs(roots[j])))
            sum += roots[j++];
        out.push_back(sum / double(j - i));
        i = j;
    }
    return out;
}

// ------------------------------------------------------------ nullspace_basis

Eigen::Matrix<double, 9, 1> epipolar_row(const Vec2& x, const Vec2& y) {
    Vec3 xh = x.homogeneous(), yh = y.homogeneous();
    Eigen::Matrix<double, 9, 1> row;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) row(3 * r + c) = yh(r) * xh(c);
    return row;
}

std::vector<Mat3> nullspace_basis(const Eigen::MatrixXd& M, int expected_dim) {
    if (M.cols() != 9) throw InvariantError("nullspace_basis: matrix must have 9 columns");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int expected_rank = 9 - expected_dim;
    double smax = sv(0);
    if (int(sv.size()) < expected_rank || sv(expected_rank - 1) < 1e-9 * smax)
        throw NumericalError("nullspace_basis: rank below expected (degenerate correspondences)");
    if (int(sv.size()) > expected_rank && sv(expected_rank) > 1e-7 * smax) {
        // full-rank rows cannot have a larger nullspace; nothing to check here
        // beyond the count (rows >= expected_rank enforced by the caller).
    }
    std::vector<Mat3> basis;
    for (int k = 0; k < expected_dim; ++k) {
        Eigen::Matrix<double, 9, 1> v = svd.matrixV().col(8 - k);
        int imax = 0;
        for (int i = 1; i < 9; ++i)
            if (std::abs(v(i)) > std::abs(v(imax))) imax = i;
        if (v(imax) < 0) v = -v;
        basis.push_back(Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(v.data()));
    }
    return basis;
}

// --------------------------------------------------------------- seven point

static std::array<double, 4> cubic_from_pencil(const Mat3& F1, const Mat3& F2) {
    // interpolate det(F1 + t F2) at t = -1, 0, 1, 2 (ascending coefficients)
    double vm = (F1 - F2).determinant();
    double v0 = F1.determinant();
    double v1 = (F1 + F2).determinant();
    double v2 = (F1 + 2.0 * F2).determinant();
    double dd = v0;
    double b = 0.5 * (v1 + vm) - v0;
    double S = 0.5 * (v1 - vm);
    double a = (v2 - v0 - 4.0 * b - 2.0 * S) / 6.0;
    double cc = S - a;
    return {dd, cc, b, a};
}

static double cubic_discriminant(const std::array<double, 4>& asc) {
    const double d = asc[0], c = asc[1], b = asc[2], a = asc[3];
    return b * b * c * c - 4.0 * a * c * c * c - 4.0 * b * b * b * d - 27.0 * a * a * d * d +
           18.0 * a * b * c * d;
}

SolverOutput solve_seven_point(std::span<const PairXY> pairs) {
    if (pairs.size() != 7) throw InvariantError("solve_seven_point: exactly 7 pairs required");
    Eigen::MatrixXd W(7, 9);
    for (int i = 0; i < 7; ++i) W.row(i) = epipolar_row(pairs[size_t(i)].first, pairs[size_t(i)].second).transpose();
    auto basis = nullspace_basis(W, 2);
    const Mat3 &F1 = basis[0], &F2 = basis[1];

    auto coef = cubic_from_pencil(F1, F2);
    double cn = std::sqrt(coef[0] * coef[0] + coef[1] * coef[1] + coef[2] * coef[2] + coef[3] * coef[3]);
    double ndisc = cubic_discriminant(coef) / (cn * cn * cn * cn);

    SolverOutput out;
    out.near_degenerate = std::abs(ndisc) < 1e-6;

    std::vector<Mat3> raw;
    if (std::abs(coef[3]) <= 1e-13 * cn) raw.push_back(F2);  // root at infinity
    for (double t : real_roots({coef.begin(), coef.end()})) raw.push_back(F1 + t * F2);

    const double rtol = Tolerances::global().solver_residual;
    for (const Mat3& F : raw) {
        Mat3 Fn = EpipolarModel::normalize_canon(F);
        double worst = 0.0;
        for (const auto& [x, y] : pairs) worst = std::max(worst, epipolar_residual(Fn, x, y));
        if (worst >= rtol) continue;
        bool dup = false;
        for (const auto& m : out.models)
            if (geodesic_distance(m.m, Fn) < 1e-7) dup = true;
        if (dup) {
            out.near_degenerate = true;
            continue;
        }
        EpipolarModel m;
        m.kind = ProblemKind::fundamental;
        m.m = Fn;
        out.models.push_back(m);
        out.residual_max = std::max(out.residual_max, worst);
    }
    out.real_count = int(out.models.size());
    if (out.models.empty()) throw NumericalError("solve_seven_point: no certified model");
    return out;
}

// ---------------------------------------------------------------- five point
//
// Nister-style elimination.  E = x E1 + y E2 + z E3 + E4; the ten cubic
// constraints are expanded over the 20 monomials
//   x3 y3 x2y xy2 x2z x2 y2z y2 xyz xy | xz2 xz x yz2 yz y z3 z2 z 1,
// Gauss-Jordan reduced, and combined pairwise to a 3x3 polynomial matrix
// B(z) (x, y, 1) = 0 whose determinant is the degree-10 univariate.

namespace {

using Lin = Eigen::Matrix<double, 4, 1>;    // x y z 1
using Quad = Eigen::Matrix<double, 10, 1>;  // x2 xy xz y2 yz z2 x y z 1
using Cub = Eigen::Matrix<double, 20, 1>;   // order above

Quad mul_ll(const Lin& a, const Lin& b) {
    Quad q = Quad::Zero();
    q(0) = a(0) * b(0);
    q(1) = a(0) * b(1) + a(1) * b(0);
    q(2) = a(0) * b(2) + a(2) * b(0);
    q(3) = a(1) * b(1);
    q(4) = a(1) * b(2) + a(2) * b(1);
    q(5) = a(2) * b(2);
    q(6) = a(0) * b(3) + a(3) * b(0);
    q(7) = a(1) * b(3) + a(3) * b(1);
    q(8) = a(2) * b(3) + a(3) * b(2);
    q(9) = a(3) * b(3);
    return q;
}

Cub mul_ql(const Quad& q, const Lin& l) {
    // target indices: x3 0, y3 1, x2y 2, xy2 3, x2z 4, x2 5, y2z 6, y2 7,
    // xyz 8, xy 9, xz2 10, xz 11, x 12, yz2 13, yz 14, y 15, z3 16, z2 17, z 18, 1 19
    Cub c = Cub::Zero();
    auto add = [&](int idx, double v) { c(idx) += v; };
    // q components: 0:x2 1:xy 2:xz 3:y2 4:yz 5:z2 6:x 7:y 8:z 9:1
    // times l: 0:x 1:y 2:z 3:1
    const int tbl[10][4] = {
        /*x2*/ {0, 2, 4, 5},
        /*xy*/ {2, 3, 8, 9},
        /*xz*/ {4, 8, 10, 11},
        /*y2*/ {3, 1, 6, 7},
        /*yz*/ {8, 6, 13, 14},
        /*z2*/ {10, 13, 16, 17},
        /*x*/ {5, 9, 11, 12},
        /*y*/ {9, 7, 14, 15},
        /*z*/ {11, 14, 17, 18},
        /*1*/ {12, 15, 18, 19},
    };
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 4; ++j) add(tbl[i][j], q(i) * l(j));
    return c;
}

using ZPoly = std::vector<double>;  // ascending coefficients

ZPoly zmul(const ZPoly& a, const ZPoly& b) {
    ZPoly out(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

ZPoly zsub(ZPoly a, const ZPoly& b) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (size_t i = 0; i < b.size(); ++i) a[i] -= b[i];
    return a;
}

ZPoly zshift(const ZPoly& a) {  // multiply by z
    ZPoly out(a.size() + 1, 0.0);
    std::copy(a.begin(), a.end(), out.begin() + 1);
    return out;
}

double zeval(const ZPoly& a, double z) {
    double v = 0.0;
    for (size_t k = a.size(); k-- > 0;) v = v * z + a[k];
    return v;
}

struct FivePointFailure : NumericalError {
    using NumericalError::NumericalError;
};

std::vector<Mat3> five_point_core(const std::vector<PairXY>& pairs, ZPoly* poly_out = nullptr) {
    Eigen::MatrixXd A(5, 9);
    for (int i = 0; i < 5; ++i) A.row(i) = epipolar_row(pairs[size_t(i)].first, pairs[size_t(i)].second).transpose();
    auto Eb = nullspace_basis(A, 4);

    // entries of E as linear forms in (x, y, z, 1)
    Lin EL[3][3];
    for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc)
            EL[r][cc] = Lin(Eb[0](r, cc), Eb[1](r, cc), Eb[2](r, cc), Eb[3](r, cc));

    Eigen::Matrix<double, 10, 20> M;
    auto det_row = [&]() {
        Cub d = mul_ql(mul_ll(EL[1][1], EL[2][2]) - mul_ll(EL[1][2], EL[2][1]), EL[0][0]);
        d -= mul_ql(mul_ll(EL[1][0], EL[2][2]) - mul_ll(EL[1][2], EL[2][0]), EL[0][1]);
        d += mul_ql(mul_ll(EL[1][0], EL[2][1]) - mul_ll(EL[1][1], EL[2][0]), EL[0][2]);
        return d;
    };
    M.row(0) = det_row().transpose();

    Quad Q[3][3];
    for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc) {
            Quad q = Quad::Zero();
            for (int k = 0; k < 3; ++k) q += mul_ll(EL[r][k], EL[cc][k]);
            Q[r][cc] = q;
        }
    Quad trQ = Q[0][0] + Q[1][1] + Q[2][2];
    int row = 1;
    for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc) {
            Cub c = Cub::Zero();
            for (int k = 0; k < 3; ++k) c += mul_ql(2.0 * Q[r][k], EL[k][cc]);
            c -= mul_ql(trQ, EL[r][cc]);
            M.row(row++) = c.transpose();
        }

    // Gauss-Jordan on the left 10 columns with partial pivoting
    const double scale = M.cwiseAbs().maxCoeff();
    for (int col = 0; col < 10; ++col) {
        int p = col;
        for (int r = col + 1; r < 10; ++r)
            if (std::abs(M(r, col)) > std::abs(M(p, col))) p = r;
        if (std::abs(M(p, col)) < 1e-10 * scale) throw FivePointFailure("five-point elimination pivot failure");
        M.row(col).swap(M.row(p));
        M.row(col) /= M(col, col);
        for (int r = 0; r < 10; ++r)
            if (r != col) M.row(r) -= M(r, col) * M.row(col);
    }

    // tails as polynomials in z: x-part cols 10..12 (xz2 xz x), y-part 13..15,
    // constant part 16..19 (z3 z2 z 1)
    auto tail = [&](int r) {
        ZPoly xp = {M(r, 12), M(r, 11), M(r, 10)};
        ZPoly yp = {M(r, 15), M(r, 14), M(r, 13)};
        ZPoly cp = {M(r, 19), M(r, 18), M(r, 17), M(r, 16)};
        return std::array<ZPoly, 3>{xp, yp, cp};
    };
    // pair rows with leading monomials (x2z, x2), (y2z, y2), (xyz, xy)
    std::array<std::array<ZPoly, 3>, 3> B;
    const int pairs_rc[3][2] = {{4, 5}, {6, 7}, {8, 9}};
    for (int k = 0; k < 3; ++k) {
        auto ta = tail(pairs_rc[k][0]);
        auto tb = tail(pairs_rc[k][1]);
        for (int c = 0; c < 3; ++c) B[size_t(k)][size_t(c)] = zsub(ta[size_t(c)], zshift(tb[size_t(c)]));
    }

    ZPoly det10 = zsub(zmul(B[0][0], zsub(zmul(B[1][1], B[2][2]), zmul(B[1][2], B[2][1]))),
                       zmul(B[0][1], zsub(zmul(B[1][0], B[2][2]), zmul(B[1][2], B[2][0]))));
    {
        ZPoly third = zmul(B[0][2], zsub(zmul(B[1][0], B[2][1]), zmul(B[1][1], B[2][0])));
        if (third.size() > det10.size()) det10.resize(third.size(), 0.0);
        for (size_t i = 0; i < third.size(); ++i) det10[i] += third[i];
    }

    if (poly_out) *poly_out = det10;
    // Gauss-Newton polish of (x, y, z) on the ten cubic constraints
    auto polish = [&](Eigen::Vector3d v) {
        for (int it = 0; it < 4; ++it) {
            Mat3 E = v(0) * Eb[0] + v(1) * Eb[1] + v(2) * Eb[2] + Eb[3];
            Mat3 C = 2.0 * E * E.transpose() * E - (E * E.transpose()).trace() * E;
            Eigen::VectorXd f(10);
            f(0) = E.determinant();
            for (int r = 0; r < 3; ++r)
                for (int cc = 0; cc < 3; ++cc) f(1 + 3 * r + cc) = C(r, cc);
            Eigen::MatrixXd J(10, 3);
            for (int j = 0; j < 3; ++j) {
                const Mat3& Ej = Eb[size_t(j)];
                double ddet = 0;
                for (int r = 0; r < 3; ++r) {
                    Mat3 Em = E;
                    Em.row(r) = Ej.row(r);
                    ddet += Em.determinant();
                }
                J(0, j) = ddet;
                Mat3 dC = 2.0 * (Ej * E.transpose() * E + E * Ej.transpose() * E + E * E.transpose() * Ej) -
                          2.0 * (E.cwiseProduct(Ej)).sum() * E - (E * E.transpose()).trace() * Ej;
                for (int r = 0; r < 3; ++r)
                    for (int cc = 0; cc < 3; ++cc) J(1 + 3 * r + cc, j) = dC(r, cc);
            }
            Eigen::Vector3d dv = J.colPivHouseholderQr().solve(-f);
            if (!dv.allFinite()) break;
            v += dv;
            if (dv.norm() < 1e-14 * (1 + v.norm())) break;
        }
        return v;
    };

    std::vector<Mat3> models;
    for (double z : real_roots(det10)) {
        Mat3 Bz;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) Bz(r, c) = zeval(B[size_t(r)][size_t(c)], z);
        Eigen::JacobiSVD<Mat3> svd(Bz, Eigen::ComputeFullV);
        Vec3 n = svd.matrixV().col(2);
        if (std::abs(n(2)) < 1e-12) continue;
        Eigen::Vector3d v = polish(Eigen::Vector3d(n(0) / n(2), n(1) / n(2), z));
        Mat3 E = v(0) * Eb[0] + v(1) * Eb[1] + v(2) * Eb[2] + Eb[3];
        models.push_back(E / E.norm());
    }
    return models;
}

Mat3 small_rotation(Rng& rng, double angle) {
    Vec3 axis = rand_unit_vec3(rng);
    Mat3 K = skew(axis);
    return Mat3::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
}

}  // namespace

SolverOutput solve_five_point(std::span<const PairXY> pairs) {
    if (pairs.size() != 5) throw InvariantError("solve_five_point: exactly 5 pairs required");
    const double rtol = Tolerances::global().solver_residual;

    std::string last_err;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Mat3 Q1 = Mat3::Identity(), Q2 = Mat3::Identity();
        std::vector<PairXY> work(pairs.begin(), pairs.end());
        if (attempt > 0) {
            Rng rng(mix_seed(0x5051CEULL, std::uint64_t(attempt)));
            Q1 = small_rotation(rng, 0.2);
            Q2 = small_rotation(rng, 0.2);
            bool ok = true;
            for (auto& [x, y] : work) {
                Vec3 xr = Q1 * x.homogeneous(), yr = Q2 * y.homogeneous();
                if (std::abs(xr.z()) < 1e-6 || std::abs(yr.z()) < 1e-6) ok = false;
                x = xr.hnormalized();
                y = yr.hnormalized();
            }
            if (!ok) continue;
        }
        std::vector<Mat3> raw;
        try {
            raw = five_point_core(work);
        } catch (const FivePointFailure& e) {
            last_err = e.what();
            continue;
        } catch (const NumericalError& e) {
            last_err = e.what();
            continue;
        }

        SolverOutput out;
        for (Mat3 E : raw) {
            if (attempt > 0) E = Q2.transpose() * E * Q1;  // undo image rotations
            Mat3 En = EpipolarModel::normalize_canon(E);
            if (essential_manifold_residual(En) >= rtol) continue;
            double worst = 0.0;
            for (const auto& [x, y] : pairs) worst = std::max(worst, epipolar_residual(En, x, y));
            if (worst >= rtol) continue;
            bool dup = false;
            for (const auto& m : out.models)
                if (geodesic_distance(m.m, En) < 1e-7) dup = true;
            if (dup) continue;
            EpipolarModel m;
            m.kind = ProblemKind::essential;
            m.m = En;
            out.models.push_back(m);
            out.residual_max = std::max(out.residual_max, worst);
        }
        if (!out.models.empty()) {
            out.real_count = int(out.models.size());
            return out;
        }
        last_err = "no certified model";
    }
    throw NumericalError("solve_five_point: " + (last_err.empty() ? std::string("failed") : last_err));
}

// -------------------------------------------------------------- decomposition

static Vec3 triangulate(const Mat34& P1, const Mat34& P2, const Vec2& x, const Vec2& y) {
    Mat4 D;
    D.row(0) = x.x() * P1.row(2) - P1.row(0);
    D.row(1) = x.y() * P1.row(2) - P1.row(1);
    D.row(2) = y.x() * P2.row(2) - P2.row(0);
    D.row(3) = y.y() * P2.row(2) - P2.row(1);
    Eigen::JacobiSVD<Mat4> svd(D, Eigen::ComputeFullV);
    Vec4 X = svd.matrixV().col(3);
    if (std::abs(X(3)) < 1e-14) throw NumericalError("triangulation undefined (point at infinity)");
    return X.head<3>() / X(3);
}

RelativePose decompose_essential(const EpipolarModel& E, std::span<const PairXY> pairs) {
    if (E.kind != ProblemKind::essential) throw InvariantError("decompose_essential: not an essential model");
    if (pairs.empty()) throw InvariantError("decompose_essential: at least one pair required");

    Eigen::JacobiSVD<Mat3> svd(E.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 U = svd.matrixU(), V = svd.matrixV();
    if (U.determinant() < 0) U = -U;
    if (V.determinant() < 0) V = -V;
    Mat3 Wm;
    Wm << 0, -1, 0, 1, 0, 0, 0, 0, 1;

    std::array<Mat3, 2> Rs = {U * Wm * V.transpose(), U * Wm.transpose() * V.transpose()};
    std::array<Vec3, 2> ts = {U.col(2), -U.col(2)};

    int best_count = -1;
    Mat3 bestR;
    Vec3 bestT;
    for (const Mat3& R : Rs) {
        for (const Vec3& t : ts) {
            Mat34 P1 = Mat34::Zero(), P2;
            P1.leftCols<3>().setIdentity();
            P2.leftCols<3>() = R;
            P2.col(3) = t;
            int count = 0;
            for (const auto& [x, y] : pairs) {
                try {
                    Vec3 X = triangulate(P1, P2, x, y);
                    if (X.z() > 0 && (R * X + t).z() > 0) ++count;
                } catch (const NumericalError&) {
                }
            }
            if (count > best_count) {
                best_count = count;
                bestR = R;
                bestT = t;
            }
        }
    }
    if (best_count < 1) throw NumericalError("decompose_essential: cheirality failed for all candidates");
    if (geodesic_distance(skew(bestT) * bestR, E.m) > Tolerances::global().manifold_membership)
        throw NumericalError("decompose_essential: candidate does not reproduce the model");
    RelativePose pose;
    pose.R = Rotation::from_matrix(bestR);
    pose.t = UnitTranslation::from_vector(bestT);
    return pose;
}

std::vector<double> five_point_polynomial(std::span<const PairXY> pairs) {
    if (pairs.size() != 5) throw InvariantError("five_point_polynomial: exactly 5 pairs required");
    std::vector<PairXY> work(pairs.begin(), pairs.end());
    ZPoly poly;
    five_point_core(work, &poly);
    return poly;
}

double sampson_distance(const EpipolarModel& model, const PairXY& pair) {
    Vec3 xh = pair.first.homogeneous(), yh = pair.second.homogeneous();
    double num = yh.dot(model.m * xh);
    Vec3 Fx = model.m * xh, Fty = model.m.transpose() * yh;
    double g = Fx.head<2>().squaredNorm() + Fty.head<2>().squaredNorm();
    if (g < 1e-30) return num * num;  // epipolar-line gradient vanished
    return num * num / g;
}

} // namespace epicond
