#include "epicond/curves.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <optional>

namespace epicond {

void CurveQuery::validate() const {
    size_t need = kind == ProblemKind::essential ? 4 : 6;
    if (anchors.size() != need)
        throw InvariantError("CurveQuery: expected " + std::to_string(need) + " anchor correspondences");
    for (const auto& [x, y] : anchors)
        if (!x.allFinite() || !y.allFinite()) throw InvariantError("CurveQuery: non-finite anchor");
    if (!(step > 0)) throw InvariantError("CurveQuery: step must be positive");
}

// ------------------------------------------------------------- F-curve system

namespace {

// Square system {det F = 0, (u,v,1) F x7 = 0, J (d1,1)^T = 0} in variables
// (a1, a2, v, d1) with the column coordinate u as the single parameter.
PolySystem build_f_system(const std::vector<PairXY>& anchors, const Vec2& x_last,
                          std::array<Mat3, 3>* basis_out) {
    Eigen::MatrixXd W(6, 9);
    for (int i = 0; i < 6; ++i) W.row(i) = epipolar_row(anchors[size_t(i)].first, anchors[size_t(i)].second).transpose();
    auto basis = nullspace_basis(W, 3);
    if (basis_out) *basis_out = {basis[0], basis[1], basis[2]};

    const int NV = 4, NP = 1;
    auto var = [&](int i) { return Poly::variable(i, NV, NP); };
    auto cst = [&](double c) { return Poly::constant(c, NV, NP); };

    Poly F[3][3];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            F[r][c] = var(0) * Complex(basis[0](r, c)) + var(1) * Complex(basis[1](r, c)) + cst(basis[2](r, c));

    Poly det = F[0][0] * (F[1][1] * F[2][2] - F[1][2] * F[2][1]) -
               F[0][1] * (F[1][0] * F[2][2] - F[1][2] * F[2][0]) +
               F[0][2] * (F[1][0] * F[2][1] - F[1][1] * F[2][0]);

    Vec3 xh = x_last.homogeneous();
    Poly y[3] = {Poly::parameter(0, NV, NP), var(2), cst(1.0)};
    Poly lin(NV, NP);
    for (int r = 0; r < 3; ++r) {
        Poly row(NV, NP);
        for (int c = 0; c < 3; ++c) row += F[r][c] * Complex(xh(c));
        lin += y[r] * row;
    }

    Poly j_det_1 = det.derivative(0), j_det_2 = det.derivative(1);
    Poly j_lin_1 = lin.derivative(0), j_lin_2 = lin.derivative(1);
    Poly d1 = var(3);

    PolySystem sys;
    sys.n_vars = NV;
    sys.n_params = NP;
    sys.equations = {det, lin, j_det_1 * d1 + j_det_2, j_lin_1 * d1 + j_lin_2};
    return sys;
}

// ------------------------------------------------------------- E-curve family
//
// The 22-equation calibrated system as a single parametric family: variables
// (a1..a4, v, d1..d3); parameters are the 45 nullspace-basis entries, the two
// coordinates of x5, and the column coordinate u.  Queries specialize the
// parameters; a generic complex member is solved once by total degree and all
// columns are reached by coefficient-parameter tracking.
class EssentialCurveFamily {
  public:
    static constexpr int NV = 8;
    static constexpr int NP = 48;

    static const EssentialCurveFamily& instance() {
        static EssentialCurveFamily fam;
        return fam;
    }

    const CompiledFamily& orig() const { return *orig_family_; }
    const CompiledFamily& squared() const { return *squared_family_; }
    const VecXc& seed_params() const { return seed_params_; }
    const std::vector<VecXc>& seed_solutions() const { return seed_solutions_; }

    static VecXc pack_params(const std::array<Mat3, 5>& basis, const Vec2& x_last, Complex u) {
        VecXc p(NP);
        for (int k = 0; k < 5; ++k)
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) p(9 * k + 3 * r + c) = basis[size_t(k)](r, c);
        p(45) = x_last.x();
        p(46) = x_last.y();
        p(47) = u;
        return p;
    }

  private:
    EssentialCurveFamily() {
        build_systems();
        solve_seed();
    }

    void build_systems() {
        auto var = [&](int i) { return Poly::variable(i, NV, NP); };
        auto par = [&](int j) { return Poly::parameter(j, NV, NP); };
        auto cst = [&](double c) { return Poly::constant(c, NV, NP); };

        Poly E[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                Poly e = par(36 + 3 * r + c);  // basis 5 (constant slot)
                for (int k = 0; k < 4; ++k) e += var(k) * par(9 * k + 3 * r + c);
                E[r][c] = e;
            }

        Poly det = E[0][0] * (E[1][1] * E[2][2] - E[1][2] * E[2][1]) -
                   E[0][1] * (E[1][0] * E[2][2] - E[1][2] * E[2][0]) +
                   E[0][2] * (E[1][0] * E[2][1] - E[1][1] * E[2][0]);

        Poly y[3] = {par(47), var(4), cst(1.0)};
        Poly x[3] = {par(45), par(46), cst(1.0)};
        Poly lin(NV, NP);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) lin += y[r] * E[r][c] * x[c];

        // Q = E E^T, tr(Q), C = 2 Q E - tr(Q) E
        Poly Q[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                Poly q(NV, NP);
                for (int k = 0; k < 3; ++k) q += E[r][k] * E[c][k];
                Q[r][c] = q;
            }
        Poly trQ = Q[0][0] + Q[1][1] + Q[2][2];
        std::vector<Poly> rows;
        rows.push_back(det);
        rows.push_back(lin);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                Poly cub(NV, NP);
                for (int k = 0; k < 3; ++k) cub += Q[r][k] * E[k][c] * Complex(2.0);
                cub -= trQ * E[r][c];
                rows.push_back(cub);
            }

        orig_.n_vars = NV;
        orig_.n_params = NP;
        orig_.equations = rows;
        // J (d1,d2,d3,1)^T = 0, J = d(rows)/d(alpha), 11 rows
        for (const Poly& row : rows) {
            Poly jr(NV, NP);
            for (int j = 0; j < 3; ++j) jr += row.derivative(j) * Poly::variable(5 + j, NV, NP);
            jr += row.derivative(3);
            orig_.equations.push_back(jr);
        }
        squared_ = square_up(orig_, 0xA11CE5u);
        orig_family_.emplace(orig_);
        squared_family_.emplace(squared_);
    }

    void solve_seed() {
        TrackOptions opts;
        opts.threads = default_threads();
        for (std::uint64_t attempt = 0; attempt < 3; ++attempt) {
            Rng rng(mix_seed(0xE55EEDULL, attempt));
            VecXc p(NP);
            for (int i = 0; i < NP; ++i) p(i) = Complex(rand_normal(rng), rand_normal(rng));
            auto results = squared_family_->solve_total_degree(p, mix_seed(0x6A44AULL, attempt), opts);
            FixedSystem checker = orig_family_->at(p);
            std::vector<VecXc> sols;
            for (const auto& s : unique_solutions(results, 1e-8)) {
                if (checker.scaled_residual(s) < 1e-8) sols.push_back(s);
            }
            if (sols.size() >= seed_solutions_.size()) {
                seed_solutions_ = sols;
                seed_params_ = p;
            }
            if (seed_solutions_.size() == 30) break;
        }
        if (seed_solutions_.empty())
            throw NumericalError("EssentialCurveFamily: seed solve found no solutions");
    }

    PolySystem orig_;
    PolySystem squared_;
    std::optional<CompiledFamily> orig_family_;
    std::optional<CompiledFamily> squared_family_;
    VecXc seed_params_;
    std::vector<VecXc> seed_solutions_;
};

std::vector<std::pair<double, double>> extract_roots(const FixedSystem& checker,
                                                     const std::vector<PathResult>& results, int v_index,
                                                     double dedup_tol) {
    std::vector<std::pair<double, double>> out;  // (v, residual)
    for (const auto& r : results) {
        if (!r.converged()) continue;
        double im = 0.0;
        for (int i = 0; i < r.end_point.size(); ++i) im = std::max(im, std::abs(r.end_point(i).imag()));
        if (im > 1e-6) continue;
        if (std::abs(r.end_point(v_index).real()) > 1e6) continue;
        double res = checker.scaled_residual(r.end_point.real().cast<Complex>());
        if (res > Tolerances::global().curve_root_residual) continue;
        double v = r.end_point(v_index).real();
        bool dup = false;
        for (auto& [v0, r0] : out)
            if (std::abs(v0 - v) < dedup_tol) {
                dup = true;
                if (res < r0) {
                    v0 = v;
                    r0 = res;
                }
            }
        if (!dup) out.emplace_back(v, res);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

// ---------------------------------------------------------------- CurveTracer

struct CurveTracer::Impl {
    CurveQuery query;
    int threads = 1;

    // F state
    PolySystem f_sys;
    std::optional<CompiledFamily> f_family;

    // E state
    VecXc e_params_last;
    std::vector<VecXc> e_sols_last;
    int since_revalidation = 0;
    std::array<Mat3, 5> e_basis;

    CurveSlice slice_f(double u) {
        VecXc p(1);
        p(0) = u;
        TrackOptions opts;
        opts.threads = threads;
        auto results = f_family->solve_total_degree(p, 0xF00DULL, opts);
        CurveSlice s;
        s.u = u;
        for (auto [v, res] : extract_roots(f_family->at(p), results, 2, Tolerances::global().curve_dedup_v)) {
            s.roots.push_back(v);
            s.residuals.push_back(res);
        }
        return s;
    }

    CurveSlice slice_e(double u) {
        const auto& fam = EssentialCurveFamily::instance();
        VecXc p = EssentialCurveFamily::pack_params(e_basis, query.x_last, Complex(u));
        TrackOptions opts;
        opts.threads = threads;

        std::vector<PathResult> results;
        bool fresh = e_sols_last.empty() || since_revalidation >= 50;
        if (fresh) {
            results = fam.squared().track_parameter_path(fam.seed_solutions(), fam.seed_params(), p, opts);
            since_revalidation = 0;
        } else {
            results = fam.squared().track_parameter_path(e_sols_last, e_params_last, p, opts);
        }
        std::vector<VecXc> live = unique_solutions(results, 1e-8);
        if (!fresh && live.size() < fam.seed_solutions().size() / 2) {
            // chain degraded; re-track independently from the seed
            results = fam.squared().track_parameter_path(fam.seed_solutions(), fam.seed_params(), p, opts);
            live = unique_solutions(results, 1e-8);
            since_revalidation = 0;
        }
        e_params_last = p;
        e_sols_last = live;
        ++since_revalidation;

        CurveSlice s;
        s.u = u;
        for (auto [v, res] : extract_roots(fam.orig().at(p), results, 4, Tolerances::global().curve_dedup_v)) {
            s.roots.push_back(v);
            s.residuals.push_back(res);
        }
        return s;
    }
};

CurveTracer::CurveTracer(const CurveQuery& query, int threads) : impl_(new Impl) {
    query.validate();
    impl_->query = query;
    impl_->threads = threads;
    if (query.kind == ProblemKind::fundamental) {
        impl_->f_sys = build_f_system(query.anchors, query.x_last, nullptr);
        impl_->f_family.emplace(impl_->f_sys);
    } else {
        Eigen::MatrixXd W(4, 9);
        for (int i = 0; i < 4; ++i)
            W.row(i) = epipolar_row(query.anchors[size_t(i)].first, query.anchors[size_t(i)].second).transpose();
        auto basis = nullspace_basis(W, 5);
        for (int k = 0; k < 5; ++k) impl_->e_basis[size_t(k)] = basis[size_t(k)];
    }
}

CurveTracer::~CurveTracer() = default;
CurveTracer::CurveTracer(CurveTracer&&) noexcept = default;

CurveSlice CurveTracer::slice(double u) {
    return impl_->query.kind == ProblemKind::fundamental ? impl_->slice_f(u) : impl_->slice_e(u);
}

const CurveQuery& CurveTracer::query() const { return impl_->query; }
int CurveTracer::columns_since_revalidation() const { return impl_->since_revalidation; }

CurveSlice curve_column_F(const CurveQuery& query, double u) {
    CurveTracer tracer(query);
    return tracer.slice(u);
}

CurveSlice curve_column_E(const CurveQuery& query, double u) {
    CurveTracer tracer(query);
    return tracer.slice(u);
}

double disc_oracle_F(const CurveQuery& query, double u, double v) {
    query.validate();
    if (query.kind != ProblemKind::fundamental) throw InvariantError("disc_oracle_F: F queries only");
    Eigen::MatrixXd W(7, 9);
    for (int i = 0; i < 6; ++i)
        W.row(i) = epipolar_row(query.anchors[size_t(i)].first, query.anchors[size_t(i)].second).transpose();
    W.row(6) = epipolar_row(query.x_last, Vec2(u, v)).transpose();
    auto basis = nullspace_basis(W, 2);  // throws on rank failure
    const Mat3 &F1 = basis[0], &F2 = basis[1];
    double vm = (F1 - F2).determinant();
    double v0 = F1.determinant();
    double v1 = (F1 + F2).determinant();
    double v2 = (F1 + 2.0 * F2).determinant();
    double d = v0;
    double b = 0.5 * (v1 + vm) - v0;
    double S = 0.5 * (v1 - vm);
    double a = (v2 - v0 - 4.0 * b - 2.0 * S) / 6.0;
    double c = S - a;
    double n2 = a * a + b * b + c * c + d * d;
    double disc = b * b * c * c - 4.0 * a * c * c * c - 4.0 * b * b * b * d - 27.0 * a * a * d * d +
                  18.0 * a * b * c * d;
    return disc / (n2 * n2);
}

void link_slices(CurveSweep& sweep, double jump_cap) {
    sweep.segments.clear();
    std::vector<std::vector<int>> branch(sweep.slices.size());
    int next_branch = 0;
    for (size_t c = 0; c < sweep.slices.size(); ++c) {
        branch[c].assign(sweep.slices[c].roots.size(), -1);
        if (c == 0) continue;
    }
    for (size_t c = 0; c < sweep.slices.size(); ++c) {
        auto& cur = sweep.slices[c];
        if (c > 0) {
            const auto& prev = sweep.slices[c - 1];
            std::vector<bool> used(cur.roots.size(), false);
            // greedy nearest-neighbor matching by |dv|
            std::vector<std::tuple<double, int, int>> cand;
            for (size_t i = 0; i < prev.roots.size(); ++i)
                for (size_t j = 0; j < cur.roots.size(); ++j) {
                    double d = std::abs(prev.roots[i] - cur.roots[j]);
                    if (d <= jump_cap) cand.emplace_back(d, int(i), int(j));
                }
            std::sort(cand.begin(), cand.end());
            std::vector<bool> used_prev(prev.roots.size(), false);
            for (auto& [d, i, j] : cand) {
                if (used_prev[size_t(i)] || used[size_t(j)]) continue;
                used_prev[size_t(i)] = true;
                used[size_t(j)] = true;
                int br = branch[c - 1][size_t(i)];
                if (br < 0) br = next_branch++;
                branch[c - 1][size_t(i)] = br;
                branch[c][size_t(j)] = br;
                sweep.segments.push_back({int(c - 1), i, int(c), j, br});
            }
        }
    }
    for (auto& col : branch)
        for (auto& b : col)
            if (b < 0) b = next_branch++;
}

CurveSweep curve_sweep_impl(CurveTracer& tracer, double umin, double umax, double step, int threads) {
    CurveSweep sweep;
    const CurveQuery& q = tracer.query();
    std::vector<double> cols;
    for (double u = umin; u <= umax + 1e-12; u += step) cols.push_back(u);

    if (q.kind == ProblemKind::fundamental && threads > 1) {
        sweep.slices.assign(cols.size(), {});
        std::vector<char> failed(cols.size(), 0);
        parallel_for(int(cols.size()), threads, [&](int i) {
            try {
                CurveTracer local(q, 1);
                sweep.slices[size_t(i)] = local.slice(cols[size_t(i)]);
            } catch (const std::exception&) {
                failed[size_t(i)] = 1;
                sweep.slices[size_t(i)].u = cols[size_t(i)];
            }
        });
        for (size_t i = 0; i < cols.size(); ++i)
            if (failed[i]) sweep.failed_columns.push_back(cols[i]);
    } else {
        for (double u : cols) {
            try {
                sweep.slices.push_back(tracer.slice(u));
            } catch (const std::exception&) {
                sweep.failed_columns.push_back(u);
                CurveSlice s;
                s.u = u;
                sweep.slices.push_back(s);
            }
        }
    }
    link_slices(sweep, q.jump_cap);
    return sweep;
}

CurveSweep curve_sweep(const CurveQuery& query, int threads) {
    CurveTracer tracer(query, threads);
    return curve_sweep_impl(tracer, query.window.umin, query.window.umax, query.step, threads);
}

double distance_to_sweep(const CurveSweep& sweep, const Vec2& point) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<bool>> linked(sweep.slices.size());
    for (size_t c = 0; c < sweep.slices.size(); ++c) linked[c].assign(sweep.slices[c].roots.size(), false);
    for (const auto& seg : sweep.segments) {
        Vec2 a(sweep.slices[size_t(seg.col_a)].u, sweep.slices[size_t(seg.col_a)].roots[size_t(seg.root_a)]);
        Vec2 b(sweep.slices[size_t(seg.col_b)].u, sweep.slices[size_t(seg.col_b)].roots[size_t(seg.root_b)]);
        Vec2 ab = b - a;
        double t = ab.squaredNorm() > 0 ? std::clamp((point - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
        best = std::min(best, (point - (a + t * ab)).norm());
        linked[size_t(seg.col_a)][size_t(seg.root_a)] = true;
        linked[size_t(seg.col_b)][size_t(seg.root_b)] = true;
    }
    for (size_t c = 0; c < sweep.slices.size(); ++c)
        for (size_t j = 0; j < sweep.slices[c].roots.size(); ++j)
            if (!linked[c][j])
                best = std::min(best, (point - Vec2(sweep.slices[c].u, sweep.slices[c].roots[j])).norm());
    return best;
}

double distance_to_curve(CurveTracer& tracer, const Vec2& point, double scan_halfwidth) {
    const CurveQuery& q = tracer.query();
    CurveSweep sweep = curve_sweep_impl(tracer, point.x() - scan_halfwidth, point.x() + scan_halfwidth, q.step, 1);
    return distance_to_sweep(sweep, point);
}

double distance_to_curve(const CurveQuery& query, const Vec2& point, double scan_halfwidth) {
    CurveTracer tracer(query, 1);
    return distance_to_curve(tracer, point, scan_halfwidth);
}

Eigen::Matrix<double, 36, 1> plucker_minors(const Eigen::Matrix<double, 7, 9>& M) {
    Eigen::JacobiSVD<Eigen::Matrix<double, 7, 9>> svd(M);
    if (svd.singularValues()(6) < 1e-12 * svd.singularValues()(0))
        throw NumericalError("plucker_minors: matrix not of rank 7");
    Eigen::Matrix<double, 36, 1> out;
    int idx = 0;
    Eigen::Matrix<double, 7, 7> sub;
    // chosen 7-subsets in lexicographic order = skipped pairs (a, b) with a
    // descending, then b descending
    for (int a = 7; a >= 0; --a)
        for (int b = 8; b > a; --b) {
            int c = 0;
            for (int col = 0; col < 9; ++col) {
                if (col == a || col == b) continue;
                sub.col(c++) = M.col(col);
            }
            out(idx++) = sub.determinant();
        }
    out.normalize();
    return out;
}

} // namespace epicond
