#include "epicond/polysys.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>

namespace epicond {

// ------------------------------------------------------------------- Poly

Poly Poly::constant(Complex c, int n_vars, int n_params) {
    Poly p(n_vars, n_params);
    if (c != Complex(0.0)) p.add_term(c, std::vector<uint8_t>(size_t(n_vars + n_params), 0));
    return p;
}

Poly Poly::variable(int i, int n_vars, int n_params) {
    Poly p(n_vars, n_params);
    std::vector<uint8_t> e(size_t(n_vars + n_params), 0);
    e[size_t(i)] = 1;
    p.add_term(1.0, e);
    return p;
}

Poly Poly::parameter(int j, int n_vars, int n_params) {
    Poly p(n_vars, n_params);
    std::vector<uint8_t> e(size_t(n_vars + n_params), 0);
    e[size_t(n_vars + j)] = 1;
    p.add_term(1.0, e);
    return p;
}

void Poly::add_term(Complex c, const std::vector<uint8_t>& exponents) {
    if (int(exponents.size()) != stride()) throw InvariantError("Poly::add_term: exponent size mismatch");
    coef_.push_back(c);
    exp_.insert(exp_.end(), exponents.begin(), exponents.end());
}

int Poly::degree() const {
    int d = 0;
    for (int t = 0; t < n_terms(); ++t) {
        int s = 0;
        for (int i = 0; i < nv_; ++i) s += exp_[size_t(t * stride() + i)];
        d = std::max(d, s);
    }
    return d;
}

int Poly::param_degree() const {
    int d = 0;
    for (int t = 0; t < n_terms(); ++t) {
        int s = 0;
        for (int i = nv_; i < stride(); ++i) s += exp_[size_t(t * stride() + i)];
        d = std::max(d, s);
    }
    return d;
}

Poly& Poly::operator+=(const Poly& o) {
    if (nv_ != o.nv_ || np_ != o.np_) throw InvariantError("Poly: mixed variable spaces");
    coef_.insert(coef_.end(), o.coef_.begin(), o.coef_.end());
    exp_.insert(exp_.end(), o.exp_.begin(), o.exp_.end());
    normalize();
    return *this;
}

Poly& Poly::operator-=(const Poly& o) { return *this += o * Complex(-1.0); }
Poly Poly::operator+(const Poly& o) const {
    Poly p = *this;
    p += o;
    return p;
}
Poly Poly::operator-(const Poly& o) const {
    Poly p = *this;
    p -= o;
    return p;
}

Poly Poly::operator*(Complex s) const {
    Poly p = *this;
    for (auto& c : p.coef_) c *= s;
    return p;
}

Poly Poly::operator*(const Poly& o) const {
    if (nv_ != o.nv_ || np_ != o.np_) throw InvariantError("Poly: mixed variable spaces");
    Poly p(nv_, np_);
    const int st = stride();
    p.coef_.reserve(size_t(n_terms() * o.n_terms()));
    std::vector<uint8_t> e(static_cast<size_t>(st));
    for (int a = 0; a < n_terms(); ++a) {
        for (int b = 0; b < o.n_terms(); ++b) {
            for (int k = 0; k < st; ++k)
                e[size_t(k)] = uint8_t(exp_[size_t(a * st + k)] + o.exp_[size_t(b * st + k)]);
            p.coef_.push_back(coef_[size_t(a)] * o.coef_[size_t(b)]);
            p.exp_.insert(p.exp_.end(), e.begin(), e.end());
        }
    }
    p.normalize();
    return p;
}

Poly Poly::derivative(int var) const {
    Poly p(nv_, np_);
    const int st = stride();
    for (int t = 0; t < n_terms(); ++t) {
        uint8_t e = exp_[size_t(t * st + var)];
        if (e == 0) continue;
        std::vector<uint8_t> ne(exp_.begin() + t * st, exp_.begin() + (t + 1) * st);
        ne[size_t(var)] = uint8_t(e - 1);
        p.add_term(double(e) * coef_[size_t(t)], ne);
    }
    p.normalize();
    return p;
}

Complex Poly::evaluate(const VecXc& z, const VecXc& params) const {
    if (int(z.size()) != nv_) throw InvariantError("Poly::evaluate: point dimension mismatch");
    if (int(params.size()) != np_) throw InvariantError("Poly::evaluate: parameter dimension mismatch");
    const int st = stride();
    Complex out = 0.0;
    for (int t = 0; t < n_terms(); ++t) {
        Complex v = coef_[size_t(t)];
        for (int i = 0; i < nv_; ++i)
            for (int k = 0; k < exp_[size_t(t * st + i)]; ++k) v *= z[i];
        for (int j = 0; j < np_; ++j)
            for (int k = 0; k < exp_[size_t(t * st + nv_ + j)]; ++k) v *= params[j];
        out += v;
    }
    return out;
}

void Poly::normalize() {
    const int st = stride();
    const int n = n_terms();
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;
    auto key = [&](int t) { return exp_.data() + t * st; };
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::lexicographical_compare(key(a), key(a) + st, key(b), key(b) + st);
    });
    std::vector<Complex> nc;
    std::vector<uint8_t> ne;
    nc.reserve(size_t(n));
    ne.reserve(exp_.size());
    for (int idx = 0; idx < n;) {
        int t = order[size_t(idx)];
        Complex c = coef_[size_t(t)];
        int j = idx + 1;
        while (j < n && std::equal(key(t), key(t) + st, key(order[size_t(j)]))) {
            c += coef_[size_t(order[size_t(j)])];
            ++j;
        }
        if (c != Complex(0.0)) {
            nc.push_back(c);
            ne.insert(ne.end(), key(t), key(t) + st);
        }
        idx = j;
    }
    coef_ = std::move(nc);
    exp_ = std::move(ne);
}

// -------------------------------------------------------------- PolySystem

std::vector<int> PolySystem::degrees() const {
    std::vector<int> d;
    d.reserve(equations.size());
    for (const auto& eq : equations) d.push_back(eq.degree());
    return d;
}

long long PolySystem::total_degree() const {
    long long p = 1;
    for (int d : degrees()) p *= std::max(1, d);
    return p;
}

void PolySystem::validate() const {
    for (const auto& eq : equations)
        if (eq.n_vars() != n_vars || eq.n_params() != n_params)
            throw InvariantError("PolySystem: equation over wrong variable space");
}

std::pair<VecXc, MatXc> evaluate_and_jacobian(const PolySystem& sys, const VecXc& point, const VecXc& params) {
    sys.validate();
    const int m = int(sys.equations.size());
    VecXc H(m);
    MatXc J = MatXc::Zero(m, sys.n_vars);
    for (int i = 0; i < m; ++i) {
        H(i) = sys.equations[size_t(i)].evaluate(point, params);
        for (int v = 0; v < sys.n_vars; ++v) J(i, v) = sys.equations[size_t(i)].derivative(v).evaluate(point, params);
    }
    return {H, J};
}

PolySystem square_up(const PolySystem& sys, std::uint64_t rng_seed) {
    sys.validate();
    const int m = int(sys.equations.size());
    const int n = sys.n_vars;
    if (m == n) return sys;
    if (m < n) throw InvariantError("square_up: fewer equations than unknowns");

    auto degs = sys.degrees();
    int dmax = *std::max_element(degs.begin(), degs.end());
    std::vector<int> low;
    std::vector<int> all(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        all[size_t(i)] = i;
        if (degs[size_t(i)] < dmax) low.push_back(i);
    }
    int n_low_rows = std::min<int>(int(low.size()), n - 1);

    Rng rng(rng_seed);
    auto coeff = [&] {
        double th = rand_uniform(rng, 0.0, 2.0 * M_PI);
        double r = rand_uniform(rng, 0.5, 1.5);
        return Complex(r * std::cos(th), r * std::sin(th));
    };
    PolySystem out;
    out.n_vars = n;
    out.n_params = sys.n_params;
    for (int row = 0; row < n; ++row) {
        const std::vector<int>& pool = row < n_low_rows ? low : all;
        Poly acc(n, sys.n_params);
        for (int j : pool) acc += sys.equations[size_t(j)] * coeff();
        out.equations.push_back(std::move(acc));
    }
    return out;
}

// ------------------------------------------------------- compiled evaluation

namespace {

// One equation specialized along an s-segment: variable monomials with
// coefficients polynomial in s (Horner arrays), pre-normalized.
struct CompiledEq {
    struct Term {
        std::array<Complex, 8> cs;  // coefficient poly in s, ascending, K+1 used
        std::array<uint8_t, 12> var;
        std::array<uint8_t, 12> exp;
        int nnz = 0;
    };
    std::vector<Term> terms;
    int K = 0;
    int degree = 1;
};

struct Compiled {
    int nv = 0;
    std::vector<CompiledEq> eqs;
    int max_deg = 1;

    void eval(const VecXc& z, double s, VecXc* H, MatXc* Hz, VecXc* Hs) const {
        const int n = int(eqs.size());
        thread_local std::vector<Complex> powers;
        powers.assign(size_t(nv * (max_deg + 1)), Complex(1.0));
        for (int i = 0; i < nv; ++i)
            for (int k = 1; k <= max_deg; ++k)
                powers[size_t(i * (max_deg + 1) + k)] = powers[size_t(i * (max_deg + 1) + k - 1)] * z[i];

        if (H) H->setZero(n);
        if (Hz) Hz->setZero(n, nv);
        if (Hs) Hs->setZero(n);
        for (int e = 0; e < n; ++e) {
            const auto& eq = eqs[size_t(e)];
            for (const auto& t : eq.terms) {
                Complex c = t.cs[size_t(eq.K)];
                Complex dc = 0.0;
                for (int k = eq.K - 1; k >= 0; --k) {
                    dc = dc * s + c;
                    c = c * s + t.cs[size_t(k)];
                }
                Complex mono = 1.0;
                Complex vals[12];
                for (int q = 0; q < t.nnz; ++q) {
                    vals[q] = powers[size_t(t.var[size_t(q)] * (max_deg + 1) + t.exp[size_t(q)])];
                    mono *= vals[q];
                }
                if (H) (*H)(e) += c * mono;
                if (Hs) (*Hs)(e) += dc * mono;
                if (Hz) {
                    Complex pre[13], suf[13];
                    pre[0] = 1.0;
                    for (int q = 0; q < t.nnz; ++q) pre[q + 1] = pre[q] * vals[q];
                    suf[t.nnz] = 1.0;
                    for (int q = t.nnz - 1; q >= 0; --q) suf[q] = suf[q + 1] * vals[q];
                    for (int q = 0; q < t.nnz; ++q) {
                        int vi = t.var[size_t(q)], ei = t.exp[size_t(q)];
                        Complex rest = pre[q] * suf[q + 1];
                        (*Hz)(e, vi) += c * double(ei) * powers[size_t(vi * (max_deg + 1) + ei - 1)] * rest;
                    }
                }
            }
        }
    }

    double scaled_residual(const VecXc& z, const VecXc& H) const {
        double zn = 1.0 + z.cwiseAbs().maxCoeff();
        double worst = 0.0;
        for (int e = 0; e < int(eqs.size()); ++e)
            worst = std::max(worst, std::abs(H(e)) / std::pow(zn, eqs[size_t(e)].degree));
        return worst;
    }
};

// Pre-grouped parametric family: variable-monomial groups with flat lists of
// parameter terms, built once so specialization is a linear pass.
struct FamilyData {
    int nv = 0, np = 0, K = 0;
    struct PTerm {
        Complex c;
        std::array<uint16_t, 8> idx;
        std::array<uint8_t, 8> exp;
        int nnz = 0;
    };
    struct Group {
        std::array<uint8_t, 12> var;
        std::array<uint8_t, 12> exp;
        int nnz = 0;
        int pbegin = 0, pend = 0;
    };
    struct EqRange {
        int gbegin = 0, gend = 0;
        int degree = 1;
    };
    std::vector<PTerm> pterms;
    std::vector<Group> groups;
    std::vector<EqRange> eqs;
};

FamilyData build_family(const PolySystem& sys) {
    sys.validate();
    FamilyData fam;
    fam.nv = sys.n_vars;
    fam.np = sys.n_params;
    const int st = sys.n_vars + sys.n_params;

    for (const auto& eq : sys.equations) {
        fam.K = std::max(fam.K, eq.param_degree());
        FamilyData::EqRange range;
        range.gbegin = int(fam.groups.size());
        range.degree = std::max(1, eq.degree());

        std::map<std::vector<uint8_t>, std::vector<int>> grouped;
        const auto& exps = eq.exponents();
        for (int t = 0; t < eq.n_terms(); ++t) {
            std::vector<uint8_t> vkey(exps.begin() + t * st, exps.begin() + t * st + sys.n_vars);
            grouped[vkey].push_back(t);
        }
        for (const auto& [vkey, idxs] : grouped) {
            FamilyData::Group g;
            for (int v = 0; v < sys.n_vars; ++v) {
                if (vkey[size_t(v)] == 0) continue;
                if (g.nnz >= 12) throw NumericalError("build_family: monomial touches too many variables");
                g.var[size_t(g.nnz)] = uint8_t(v);
                g.exp[size_t(g.nnz)] = vkey[size_t(v)];
                ++g.nnz;
            }
            g.pbegin = int(fam.pterms.size());
            for (int t : idxs) {
                FamilyData::PTerm pt;
                pt.c = eq.coefficients()[size_t(t)];
                for (int j = 0; j < sys.n_params; ++j) {
                    uint8_t e = exps[size_t(t * st + sys.n_vars + j)];
                    if (e == 0) continue;
                    if (pt.nnz >= 8) throw NumericalError("build_family: parameter degree too large per term");
                    pt.idx[size_t(pt.nnz)] = uint16_t(j);
                    pt.exp[size_t(pt.nnz)] = e;
                    ++pt.nnz;
                }
                fam.pterms.push_back(pt);
            }
            g.pend = int(fam.pterms.size());
            fam.groups.push_back(g);
        }
        range.gend = int(fam.groups.size());
        fam.eqs.push_back(range);
    }
    if (fam.K > 7) throw NumericalError("build_family: parameter degree too large");
    return fam;
}

// Specializes the family along params(s) = p_end + s (p_start - p_end) by
// sampling the (polynomial-in-s) coefficients at K+1 nodes and interpolating
// exactly.
Compiled specialize(const FamilyData& fam, const VecXc& p_start, const VecXc& p_end) {
    if (int(p_start.size()) != fam.np || int(p_end.size()) != fam.np)
        throw InvariantError("specialize: parameter dimension mismatch");
    int K = fam.K;
    if (fam.np == 0 || (p_start - p_end).norm() == 0.0) K = 0;

    Eigen::MatrixXd V(K + 1, K + 1);
    std::vector<VecXc> node_params;
    for (int i = 0; i <= K; ++i) {
        double node = K == 0 ? 0.0 : double(i) / double(K);
        node_params.push_back(p_end + node * (p_start - p_end));
        for (int j = 0; j <= K; ++j) V(i, j) = std::pow(node, j);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> Vlu(V);

    Compiled out;
    out.nv = fam.nv;
    for (const auto& range : fam.eqs) {
        CompiledEq ce;
        ce.K = K;
        ce.degree = range.degree;
        out.max_deg = std::max(out.max_deg, ce.degree);

        std::vector<Eigen::VectorXcd> samples(size_t(range.gend - range.gbegin), Eigen::VectorXcd(K + 1));
        double scale = 0.0;
        for (int g = range.gbegin; g < range.gend; ++g) {
            const auto& grp = fam.groups[size_t(g)];
            for (int i = 0; i <= K; ++i) {
                const VecXc& p = node_params[size_t(i)];
                Complex c = 0.0;
                for (int t = grp.pbegin; t < grp.pend; ++t) {
                    const auto& pt = fam.pterms[size_t(t)];
                    Complex v = pt.c;
                    for (int q = 0; q < pt.nnz; ++q) {
                        Complex base = p(pt.idx[size_t(q)]);
                        for (int k = 0; k < pt.exp[size_t(q)]; ++k) v *= base;
                    }
                    c += v;
                }
                samples[size_t(g - range.gbegin)](i) = c;
            }
        }
        // interpolate to monomial coefficients in s and normalize the equation
        std::vector<Eigen::VectorXcd> cpolys(samples.size());
        for (size_t g = 0; g < samples.size(); ++g) {
            Eigen::VectorXcd cp(K + 1);
            if (K == 0)
                cp(0) = samples[g](0);
            else {
                Eigen::VectorXd re = Vlu.solve(samples[g].real());
                Eigen::VectorXd im = Vlu.solve(samples[g].imag());
                for (int j = 0; j <= K; ++j) cp(j) = Complex(re(j), im(j));
            }
            cpolys[g] = cp;
            for (int j = 0; j <= K; ++j) scale = std::max(scale, std::abs(cp(j)));
        }
        if (scale == 0.0) scale = 1.0;
        for (size_t g = 0; g < cpolys.size(); ++g) {
            const auto& grp = fam.groups[size_t(int(g) + range.gbegin)];
            CompiledEq::Term term;
            bool nonzero = false;
            for (int j = 0; j <= K; ++j) {
                term.cs[size_t(j)] = cpolys[g](j) / scale;
                if (std::abs(term.cs[size_t(j)]) > 0) nonzero = true;
            }
            if (!nonzero) continue;
            term.var = grp.var;
            term.exp = grp.exp;
            term.nnz = grp.nnz;
            ce.terms.push_back(term);
        }
        out.eqs.push_back(std::move(ce));
    }
    return out;
}

Compiled compile_fixed(const PolySystem& sys, const VecXc& params) {
    return specialize(build_family(sys), params, params);
}

struct GammaHomotopy final : HomotopyFn {
    Compiled target;
    std::vector<int> degs;
    Complex gamma;

    int dim() const override { return target.nv; }
    void eval(const VecXc& z, double s, VecXc* H, MatXc* Hz, VecXc* Hs) const override {
        const int n = target.nv;
        VecXc T;
        MatXc Tz;
        target.eval(z, 0.0, &T, Hz ? &Tz : nullptr, nullptr);
        VecXc S(n);
        for (int i = 0; i < n; ++i) {
            Complex p = 1.0;
            for (int k = 0; k < degs[size_t(i)]; ++k) p *= z[i];
            S(i) = p - 1.0;
        }
        if (H) *H = (1.0 - s) * T + gamma * s * S;
        if (Hs) *Hs = -T + gamma * S;
        if (Hz) {
            *Hz = (1.0 - s) * Tz;
            for (int i = 0; i < n; ++i) {
                Complex p = 1.0;
                for (int k = 0; k < degs[size_t(i)] - 1; ++k) p *= z[i];
                (*Hz)(i, i) += gamma * s * double(degs[size_t(i)]) * p;
            }
        }
    }
    double scaled_residual(const VecXc& z, const VecXc& H) const override {
        return target.scaled_residual(z, H);
    }
};

struct SegmentHomotopy final : HomotopyFn {
    Compiled path;  // coefficients polynomial in s; s=1 start, s=0 target
    int dim() const override { return path.nv; }
    void eval(const VecXc& z, double s, VecXc* H, MatXc* Hz, VecXc* Hs) const override {
        path.eval(z, s, H, Hz, Hs);
    }
    double scaled_residual(const VecXc& z, const VecXc& H) const override {
        return path.scaled_residual(z, H);
    }
};

std::vector<PathResult> run_total_degree(const Compiled& target, const std::vector<int>& degrees,
                                         std::uint64_t rng_seed, const TrackOptions& opts) {
    GammaHomotopy hom;
    hom.target = target;
    hom.degs = degrees;
    for (int& d : hom.degs) d = std::max(1, d);
    Rng rng(rng_seed);
    double th = rand_uniform(rng, 0.25, 2.0 * M_PI - 0.25);
    hom.gamma = Complex(std::cos(th), std::sin(th));

    const int n = target.nv;
    long long total = 1;
    for (int d : hom.degs) total *= d;
    std::vector<PathResult> results(static_cast<size_t>(total));
    parallel_for(int(total), opts.threads, [&](int idx) {
        VecXc z0(n);
        long long rem = idx;
        for (int i = 0; i < n; ++i) {
            int k = int(rem % hom.degs[size_t(i)]);
            rem /= hom.degs[size_t(i)];
            double ang = 2.0 * M_PI * double(k) / double(hom.degs[size_t(i)]);
            z0(i) = Complex(std::cos(ang), std::sin(ang));
        }
        results[size_t(idx)] = track_path(hom, z0, opts);
    });
    return results;
}

std::vector<PathResult> run_parameter_path(const FamilyData& fam, const std::vector<VecXc>& sols,
                                           const VecXc& p0, const VecXc& p1, const TrackOptions& opts) {
    // validate inputs at p0 against the specialized start system
    Compiled start = specialize(fam, p0, p0);
    for (const auto& sol : sols) {
        VecXc H;
        start.eval(sol, 0.0, &H, nullptr, nullptr);
        if (start.scaled_residual(sol, H) > 1e-9)
            throw InvariantError("track_parameter_path: input solution invalid at p0");
    }
    SegmentHomotopy hom;
    hom.path = specialize(fam, p0, p1);
    std::vector<PathResult> results(sols.size());
    parallel_for(int(sols.size()), opts.threads,
                 [&](int i) { results[size_t(i)] = track_path(hom, sols[size_t(i)], opts); });
    return results;
}

}  // namespace

// ----------------------------------------------------------------- tracking

PathResult track_path(const HomotopyFn& fn, const VecXc& start, const TrackOptions& opts) {
    const int n = fn.dim();
    PathResult res;
    res.end_point = start;

    VecXc z = start, H(n), Hs(n), k1(n), k2(n), k3(n), k4(n), zt(n);
    MatXc Hz(n, n);
    double s = 1.0, ds = opts.initial_step;
    int streak = 0;

    auto davidenko = [&](const VecXc& zz, double ss, VecXc& out) -> bool {
        fn.eval(zz, ss, nullptr, &Hz, &Hs);
        Eigen::PartialPivLU<MatXc> lu(Hz);
        out = lu.solve(-Hs);
        return out.allFinite();
    };

    while (s > 0.0) {
        if (res.steps++ > opts.max_steps) {
            res.status = PathStatus::path_failure;
            return res;
        }
        double step = std::min(ds, s);
        double sn = s - step;
        const double h = -step;

        bool ok = davidenko(z, s, k1);
        if (ok) {
            zt = z + (h / 2) * k1;
            ok = davidenko(zt, s + h / 2, k2);
        }
        if (ok) {
            zt = z + (h / 2) * k2;
            ok = davidenko(zt, s + h / 2, k3);
        }
        if (ok) {
            zt = z + h * k3;
            ok = davidenko(zt, s + h, k4);
        }
        if (ok) {
            VecXc zp = z + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            ok = false;
            for (int it = 0; it <= opts.newton_iters; ++it) {
                fn.eval(zp, sn, &H, &Hz, nullptr);
                if (!H.allFinite()) break;
                if (fn.scaled_residual(zp, H) < opts.track_tol) {
                    ok = true;
                    break;
                }
                if (it == opts.newton_iters) break;
                Eigen::PartialPivLU<MatXc> lu(Hz);
                VecXc dz = lu.solve(-H);
                if (!dz.allFinite()) break;
                zp += dz;
            }
            if (ok) {
                z = zp;
                s = sn;
                if (++streak >= opts.grow_after) {
                    ds = std::min(ds * 2.0, 0.25);
                    streak = 0;
                }
                if (z.cwiseAbs().maxCoeff() > opts.diverge_norm) {
                    res.status = PathStatus::diverged;
                    res.end_point = z;
                    return res;
                }
                continue;
            }
        }
        ds *= 0.5;
        streak = 0;
        if (ds < opts.min_step) {
            res.status = PathStatus::path_failure;
            res.end_point = z;
            return res;
        }
    }

    // endpoint polish at s = 0
    for (int it = 0; it < 10; ++it) {
        fn.eval(z, 0.0, &H, &Hz, nullptr);
        if (!H.allFinite()) break;
        if (fn.scaled_residual(z, H) < opts.residual_tol) break;
        Eigen::PartialPivLU<MatXc> lu(Hz);
        VecXc dz = lu.solve(-H);
        if (!dz.allFinite()) break;
        z += dz;
        if (z.cwiseAbs().maxCoeff() > opts.diverge_norm) {
            res.status = PathStatus::diverged;
            res.end_point = z;
            return res;
        }
    }
    fn.eval(z, 0.0, &H, nullptr, nullptr);
    res.end_point = z;
    res.residual = H.allFinite() ? fn.scaled_residual(z, H) : std::numeric_limits<double>::infinity();
    if (res.residual < opts.residual_tol)
        res.status = PathStatus::converged;
    else if (res.residual < 1e-6)
        res.status = PathStatus::singular_endpoint;
    else
        res.status = PathStatus::path_failure;
    return res;
}

std::vector<PathResult> solve_total_degree(const PolySystem& sys, const VecXc& params,
                                           std::uint64_t rng_seed, const TrackOptions& opts) {
    sys.validate();
    if (int(sys.equations.size()) != sys.n_vars)
        throw InvariantError("solve_total_degree: system must be square");
    return run_total_degree(compile_fixed(sys, params), sys.degrees(), rng_seed, opts);
}

std::vector<PathResult> track_parameter_path(const PolySystem& sys, const std::vector<VecXc>& solutions_at_p0,
                                             const VecXc& p0, const VecXc& p1, const TrackOptions& opts) {
    sys.validate();
    if (int(sys.equations.size()) != sys.n_vars)
        throw InvariantError("track_parameter_path: system must be square");
    if (int(p0.size()) != sys.n_params || int(p1.size()) != sys.n_params)
        throw InvariantError("track_parameter_path: parameter dimension mismatch");
    return run_parameter_path(build_family(sys), solutions_at_p0, p0, p1, opts);
}

std::vector<Eigen::VectorXd> filter_real(const PolySystem& sys, const VecXc& params,
                                         const std::vector<PathResult>& results, double imag_tol) {
    std::vector<Eigen::VectorXd> out;
    for (const auto& r : results) {
        if (!r.converged()) continue;
        double worst = 0.0;
        for (int i = 0; i < r.end_point.size(); ++i) worst = std::max(worst, std::abs(r.end_point(i).imag()));
        if (worst >= imag_tol) continue;
        Eigen::VectorXd x = r.end_point.real();
        // Gauss-Newton on the real restriction (stacked real/imag system)
        for (int it = 0; it < 3; ++it) {
            auto [H, J] = evaluate_and_jacobian(sys, x.cast<Complex>(), params);
            const int m = int(H.size());
            Eigen::MatrixXd Js(2 * m, x.size());
            Eigen::VectorXd Hv(2 * m);
            Js << J.real(), J.imag();
            Hv << H.real(), H.imag();
            Eigen::VectorXd dx = Js.colPivHouseholderQr().solve(-Hv);
            if (!dx.allFinite()) break;
            x += dx;
            if (dx.cwiseAbs().maxCoeff() < 1e-14 * (1.0 + x.cwiseAbs().maxCoeff())) break;
        }
        out.push_back(x);
    }
    return out;
}

std::vector<VecXc> unique_solutions(const std::vector<PathResult>& results, double tol) {
    std::vector<VecXc> sols;
    for (const auto& r : results) {
        if (!r.converged()) continue;
        bool dup = false;
        for (const auto& s : sols)
            if ((s - r.end_point).cwiseAbs().maxCoeff() < tol * (1.0 + r.end_point.cwiseAbs().maxCoeff())) dup = true;
        if (!dup) sols.push_back(r.end_point);
    }
    std::sort(sols.begin(), sols.end(), [](const VecXc& a, const VecXc& b) {
        for (int i = 0; i < a.size(); ++i) {
            if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
            if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
        }
        return false;
    });
    return sols;
}

double system_residual(const PolySystem& sys, const VecXc& point, const VecXc& params) {
    Compiled c = compile_fixed(sys, params);
    VecXc H;
    c.eval(point, 0.0, &H, nullptr, nullptr);
    return c.scaled_residual(point, H);
}

// ------------------------------------------------------------- FixedSystem

struct FixedSystem::Impl {
    Compiled compiled;
};

FixedSystem::FixedSystem(const PolySystem& sys, const VecXc& params) {
    auto impl = std::make_shared<Impl>();
    impl->compiled = compile_fixed(sys, params);
    impl_ = impl;
}

VecXc FixedSystem::evaluate(const VecXc& z) const {
    VecXc H;
    impl_->compiled.eval(z, 0.0, &H, nullptr, nullptr);
    return H;
}

double FixedSystem::scaled_residual(const VecXc& z) const {
    VecXc H;
    impl_->compiled.eval(z, 0.0, &H, nullptr, nullptr);
    return impl_->compiled.scaled_residual(z, H);
}

// ----------------------------------------------------------- CompiledFamily

struct CompiledFamily::Impl {
    PolySystem sys;
    FamilyData fam;
    std::vector<int> degrees;
};

CompiledFamily::CompiledFamily(const PolySystem& sys) {
    auto impl = std::make_shared<Impl>();
    impl->sys = sys;
    impl->fam = build_family(sys);
    impl->degrees = sys.degrees();
    impl_ = impl;
}

const PolySystem& CompiledFamily::system() const { return impl_->sys; }

FixedSystem CompiledFamily::at(const VecXc& params) const {
    FixedSystem fs;
    auto fimpl = std::make_shared<FixedSystem::Impl>();
    fimpl->compiled = specialize(impl_->fam, params, params);
    fs.impl_ = fimpl;
    return fs;
}

std::vector<PathResult> CompiledFamily::solve_total_degree(const VecXc& params, std::uint64_t rng_seed,
                                                           const TrackOptions& opts) const {
    if (int(impl_->sys.equations.size()) != impl_->sys.n_vars)
        throw InvariantError("solve_total_degree: system must be square");
    return run_total_degree(specialize(impl_->fam, params, params), impl_->degrees, rng_seed, opts);
}

std::vector<PathResult> CompiledFamily::track_parameter_path(const std::vector<VecXc>& solutions_at_p0,
                                                             const VecXc& p0, const VecXc& p1,
                                                             const TrackOptions& opts) const {
    if (int(impl_->sys.equations.size()) != impl_->sys.n_vars)
        throw InvariantError("track_parameter_path: system must be square");
    return run_parameter_path(impl_->fam, solutions_at_p0, p0, p1, opts);
}

} // namespace epicond
