#include "epicond/condition.hpp"

#include "epicond/solvers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <atomic>
#include <cmath>
#include <limits>

namespace epicond {

static Eigen::Matrix<double, 2, 3> dbeta(const Vec3& z) {
    Eigen::Matrix<double, 2, 3> d;
    d << 1.0 / z.z(), 0, -z.x() / (z.z() * z.z()), 0, 1.0 / z.z(), -z.y() / (z.z() * z.z());
    return d;
}

std::vector<std::string> ForwardJacobian::column_labels() const {
    std::vector<std::string> out;
    int npts = kind == ProblemKind::essential ? 5 : 7;
    for (int i = 0; i < npts; ++i)
        for (const char* c : {"x", "y", "z"}) out.push_back("dX" + std::to_string(i + 1) + "." + c);
    if (kind == ProblemKind::essential) {
        out.insert(out.end(), {"dR.1", "dR.2", "dR.3", "dt.1", "dt.2"});
    } else {
        for (int j = 1; j <= 7; ++j) out.push_back("db." + std::to_string(j));
    }
    return out;
}

static ForwardJacobian jacobian_forward_e(const WorldSceneE& s) {
    s.validate();
    ForwardJacobian J;
    J.kind = ProblemKind::essential;
    const Mat3& R = s.R.matrix();
    auto rot_basis = tangent_basis_so3(s.R);

    J.stage1 = Eigen::MatrixXd::Zero(30, 20);
    J.stage1.topLeftCorner(15, 15).setIdentity();
    for (int i = 0; i < 5; ++i) {
        J.stage1.block<3, 3>(15 + 3 * i, 3 * i) = R;
        for (int j = 0; j < 3; ++j) J.stage1.block<3, 1>(15 + 3 * i, 15 + j) = rot_basis[size_t(j)] * s.X[size_t(i)];
        J.stage1.block<3, 1>(15 + 3 * i, 18) = s.t.perp1();
        J.stage1.block<3, 1>(15 + 3 * i, 19) = s.t.perp2();
    }
    J.stage2 = Eigen::MatrixXd::Zero(20, 30);
    for (int i = 0; i < 5; ++i) {
        J.stage2.block<2, 3>(2 * i, 3 * i) = dbeta(s.X[size_t(i)]);
        J.stage2.block<2, 3>(10 + 2 * i, 15 + 3 * i) = dbeta(s.second_camera_point(i));
    }
    J.product = J.stage2 * J.stage1;
    return J;
}

static ForwardJacobian jacobian_forward_f(const WorldSceneF& s) {
    s.validate();
    ForwardJacobian J;
    J.kind = ProblemKind::fundamental;
    Mat34 M = s.M();
    Mat3 M3 = M.leftCols<3>();

    // dM/db_j has a single unit entry at these (row, col) positions.
    static constexpr int kRow[7] = {0, 0, 0, 1, 1, 1, 1};
    static constexpr int kCol[7] = {1, 2, 3, 0, 1, 2, 3};

    J.stage1 = Eigen::MatrixXd::Zero(42, 28);
    J.stage1.topLeftCorner(21, 21).setIdentity();
    for (int i = 0; i < 7; ++i) {
        J.stage1.block<3, 3>(21 + 3 * i, 3 * i) = M3;
        Vec4 Xh = s.X[size_t(i)].homogeneous();
        for (int j = 0; j < 7; ++j) J.stage1(21 + 3 * i + kRow[j], 21 + j) = Xh[kCol[j]];
    }
    J.stage2 = Eigen::MatrixXd::Zero(28, 42);
    for (int i = 0; i < 7; ++i) {
        J.stage2.block<2, 3>(2 * i, 3 * i) = dbeta(s.X[size_t(i)]);
        J.stage2.block<2, 3>(14 + 2 * i, 21 + 3 * i) = dbeta(s.second_camera_point(i));
    }
    J.product = J.stage2 * J.stage1;
    return J;
}

ForwardJacobian jacobian_forward(const WorldScene& scene) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) return jacobian_forward_e(*e);
    return jacobian_forward_f(std::get<WorldSceneF>(scene));
}

// Grammian of the projective tangent images of the epipolar map that matches
// the solver convention (y^T E x = 0, E = [t]_x R).  Same closed form as
// grammian_essential at transported arguments.
static Eigen::MatrixXd epipolar_tangent_gram(const WorldScene& scene) {
    if (auto* e = std::get_if<WorldSceneE>(&scene)) {
        const Mat3 Rt = e->R.matrix().transpose();
        return grammian_essential(Rt * e->t.vector(), -(Rt * e->t.perp1()), -(Rt * e->t.perp2()));
    }
    const auto& f = std::get<WorldSceneF>(scene);
    Eigen::Matrix<double, 7, 7> G = grammian_fundamental(f.b);
    // project out the radial (scale) component so distances live on the
    // projective quotient, where the empirical oracle measures them
    Mat3 F = fundamental_from_b(f.b);
    double n2 = F.squaredNorm();
    Eigen::Matrix<double, 7, 1> r;
    for (int j = 0; j < 7; ++j) {
        Mat3 dF = Mat3::Zero();
        // dF/db_j per the closed form of F(b)
        switch (j) {
            case 0: dF(1, 1) = -1; dF(2, 1) = f.b[6]; break;
            case 1: dF(1, 2) = -1; dF(2, 2) = f.b[6]; break;
            case 2: dF(2, 0) = -f.b[3]; dF(2, 1) = -f.b[4]; dF(2, 2) = -f.b[5]; break;
            case 3: dF(0, 0) = 1; dF(2, 0) = -f.b[2]; break;
            case 4: dF(0, 1) = 1; dF(2, 1) = -f.b[2]; break;
            case 5: dF(0, 2) = 1; dF(2, 2) = -f.b[2]; break;
            case 6: dF(2, 0) = 1; dF(2, 1) = f.b[0]; dF(2, 2) = f.b[1]; break;
        }
        r[j] = (dF.cwiseProduct(F)).sum() / n2;
    }
    G -= r * r.transpose();
    return G;
}

ConditionReport condition_number(const WorldScene& scene) {
    ForwardJacobian J = jacobian_forward(scene);
    const int n = int(J.product.rows());
    const int npose = kind_of(scene) == ProblemKind::essential ? 5 : 7;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J.product);
    ConditionReport rep;
    rep.sigma_min_forward = svd.singularValues()(n - 1);
    rep.sigma_max_forward = svd.singularValues()(0);
    if (rep.sigma_min_forward < Tolerances::global().sentinel_rel * rep.sigma_max_forward) {
        rep.cond = std::numeric_limits<double>::infinity();
        return rep;
    }

    // last npose rows of product^{-1}: row (n - npose + k) of P^{-1} is the
    // solution of P^T w = e_{n-npose+k}
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J.product.transpose());
    Eigen::MatrixXd B(npose, n);
    for (int k = 0; k < npose; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e(n - npose + k) = 1.0;
        B.row(k) = lu.solve(e).transpose();
    }
    // clamped PSD square root: the b-chart can be badly scaled (pixel-range
    // parameters), leaving the Gram with eigenvalues below double resolution
    Eigen::MatrixXd G = epipolar_tangent_gram(scene);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd Gh = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    rep.amplification_matrix = Gh * B;
    rep.cond = Eigen::JacobiSVD<Eigen::MatrixXd>(*rep.amplification_matrix).singularValues()(0);
    return rep;
}

double empirical_condition(const WorldScene& scene, double delta, int trials,
                           std::uint64_t rng_seed, int threads) {
    if (!(delta > 0.0) || delta > 1e-5)
        throw InvariantError("empirical_condition: delta must be in (0, 1e-5]");
    if (trials < 1) throw InvariantError("empirical_condition: trials must be positive");

    const ProblemKind kind = kind_of(scene);
    ImageData clean = forward_project(scene);
    Mat3 truth = epipolar_matrix(scene).m;
    const int dim = 4 * point_count(scene);

    std::vector<double> ratio(static_cast<size_t>(trials), -1.0);
    std::atomic<int> failures{0};
    parallel_for(trials, threads, [&](int trial) {
        Rng rng(mix_seed(rng_seed, std::uint64_t(trial)));
        Eigen::VectorXd dir(dim);
        for (int i = 0; i < dim; ++i) dir[i] = rand_normal(rng);
        dir.normalize();
        ImageData noisy = clean;
        int n = point_count(scene);
        for (int i = 0; i < n; ++i) {
            noisy.pairs[size_t(i)].first += delta * dir.segment<2>(2 * i);
            noisy.pairs[size_t(i)].second += delta * dir.segment<2>(2 * n + 2 * i);
        }
        try {
            SolverOutput out = kind == ProblemKind::essential ? solve_five_point(noisy.pairs)
                                                              : solve_seven_point(noisy.pairs);
            double best = std::numeric_limits<double>::infinity();
            for (const auto& m : out.models) best = std::min(best, geodesic_distance(m.m, truth));
            if (std::isfinite(best))
                ratio[size_t(trial)] = best / delta;
            else
                failures.fetch_add(1);
        } catch (const std::exception&) {
            failures.fetch_add(1);
        }
    });
    double best = -1.0;
    for (double r : ratio) best = std::max(best, r);
    if (best < 0) throw NumericalError("empirical_condition: solver failed on every perturbed input");
    return best;
}

} // namespace epicond
