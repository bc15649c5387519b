#include "epicond/bench.hpp"

#include "epicond/illposed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace epicond {

void SyntheticConfig::validate() const {
    if (image_width <= 0 || image_height <= 0 || focal <= 0)
        throw InvariantError("SyntheticConfig: dimensions must be positive");
    if (noise_sigma < 0) throw InvariantError("SyntheticConfig: sigma must be nonnegative");
    if (!(error_threshold > 0)) throw InvariantError("SyntheticConfig: tau must be positive");
    if (depth_min <= 0 || depth_max <= depth_min) throw InvariantError("SyntheticConfig: bad depth range");
}

Instance generate_instance(ProblemKind kind, const SyntheticConfig& config, std::uint64_t rng_seed) {
    config.validate();
    Intrinsics K = config.intrinsics();
    const int n = minimal_count(kind);
    Rng rng(rng_seed);

    for (int attempt = 0; attempt < 2000; ++attempt) {
        Rotation R = Rotation::random(rng);
        Vec3 t = rand_unit_vec3(rng);

        std::vector<Vec3> X;
        std::vector<PairXY> px;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            bool placed = false;
            for (int tries = 0; tries < 400; ++tries) {
                Vec2 p1(rand_uniform(rng, 0, config.image_width), rand_uniform(rng, 0, config.image_height));
                double depth = rand_uniform(rng, config.depth_min, config.depth_max);
                Vec3 Xi = depth * K.to_normalized(p1).homogeneous();
                Vec3 X2 = R.matrix() * Xi + t;
                if (X2.z() < 1e-3) continue;
                Vec2 p2 = K.to_pixels(X2.hnormalized());
                if (p2.x() < 0 || p2.x() > config.image_width || p2.y() < 0 || p2.y() > config.image_height)
                    continue;
                X.push_back(Xi);
                px.emplace_back(p1, p2);
                placed = true;
                break;
            }
            if (!placed) ok = false;
        }
        if (!ok) continue;

        Instance inst;
        inst.K = K;
        inst.pixels.pairs = px;
        if (kind == ProblemKind::essential) {
            WorldSceneE s;
            s.R = R;
            s.t = UnitTranslation::from_vector(t);
            for (int i = 0; i < 5; ++i) s.X[size_t(i)] = X[size_t(i)];
            try {
                s.validate();
            } catch (const InvariantError&) {
                continue;
            }
            inst.scene = s;
            return inst;
        }
        // F: normal form of the pixel camera pair (K[I 0], K[R t])
        Mat34 A = Mat34::Zero(), B;
        Mat3 Km;
        Km << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
        A.leftCols<3>() = Km;
        B.leftCols<3>() = Km * R.matrix();
        B.col(3) = Km * t;
        NormalFormResult nf;
        try {
            nf = normal_form_uncalibrated(A, B);
        } catch (const NumericalError&) {
            continue;
        }
        Mat4 ginv = nf.g.inverse();
        WorldSceneF s;
        s.b = nf.b;
        bool valid = true;
        for (int i = 0; i < 7; ++i) {
            Vec4 Xh = ginv * X[size_t(i)].homogeneous();
            if (std::abs(Xh(3)) < 1e-10) {
                valid = false;
                break;
            }
            s.X[size_t(i)] = Xh.head<3>() / Xh(3);
        }
        if (!valid) continue;
        try {
            s.validate();
        } catch (const InvariantError&) {
            continue;
        }
        // the normal-form scene must reproduce the pixel correspondences
        ImageData reproj = forward_project(WorldScene(s));
        for (int i = 0; i < 7; ++i)
            if ((reproj.pairs[size_t(i)].first - px[size_t(i)].first).norm() > 1e-7 ||
                (reproj.pairs[size_t(i)].second - px[size_t(i)].second).norm() > 1e-7)
                valid = false;
        if (!valid) continue;
        inst.scene = s;
        return inst;
    }
    throw NumericalError("generate_instance: rejection sampling exhausted");
}

ImageData perturb(const ImageData& data, double sigma, std::uint64_t rng_seed) {
    if (sigma < 0) throw InvariantError("perturb: sigma must be nonnegative");
    ImageData out = data;
    if (sigma == 0) return out;
    Rng rng(rng_seed);
    for (auto& [x, y] : out.pairs) {
        x += sigma * Vec2(rand_normal(rng), rand_normal(rng));
        y += sigma * Vec2(rand_normal(rng), rand_normal(rng));
    }
    return out;
}

double model_error(const EpipolarModel& estimate, const EpipolarModel& truth) {
    double sum = 0;
    int used = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            if (std::abs(truth.m(r, c)) < 1e-12) continue;
            sum += std::abs(std::abs(estimate.m(r, c) / truth.m(r, c)) - 1.0);
            ++used;
        }
    if (used == 0) throw NumericalError("model_error: all reference entries below threshold");
    return sum / used;
}

bool is_erroneous(const SolverOutput& outputs_clean, const SolverOutput& outputs_noisy,
                  const EpipolarModel& truth, double tau) {
    if (outputs_noisy.real_count != outputs_clean.real_count) return true;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : outputs_noisy.models) best = std::min(best, model_error(m, truth));
    return best > tau;
}

SolverOutput solve_instance(const Instance& inst, const ImageData& pixels) {
    if (kind_of(inst.scene) == ProblemKind::fundamental) return solve_seven_point(pixels.pairs);
    std::vector<PairXY> norm;
    norm.reserve(pixels.pairs.size());
    for (const auto& [x, y] : pixels.pairs) norm.emplace_back(inst.K.to_normalized(x), inst.K.to_normalized(y));
    return solve_five_point(norm);
}

// Truth model in the units the solver works in (normalized for E, pixels for F).
static EpipolarModel instance_truth(const Instance& inst) { return epipolar_matrix(inst.scene); }

RevelationTable run_revelation(ProblemKind kind, const std::vector<double>& sigma_list,
                               const std::vector<double>& tau_list, int instances,
                               const SyntheticConfig& config, int threads) {
    RevelationTable table;
    table.sigmas = sigma_list;
    table.taus = tau_list;
    table.ratios.assign(sigma_list.size(), std::vector<double>(tau_list.size(), 0.0));
    table.failures.assign(sigma_list.size(), 0);

    // erroneous[i][si][ti]
    std::vector<std::vector<std::vector<char>>> err(
        size_t(instances),
        std::vector<std::vector<char>>(sigma_list.size(), std::vector<char>(tau_list.size(), 0)));
    std::vector<std::vector<char>> failed(size_t(instances), std::vector<char>(sigma_list.size(), 0));

    parallel_for(instances, threads, [&](int i) {
        std::uint64_t seed = mix_seed(config.rng_seed, std::uint64_t(i));
        Instance inst = generate_instance(kind, config, seed);
        SolverOutput clean;
        EpipolarModel truth = instance_truth(inst);
        try {
            clean = solve_instance(inst, inst.pixels);
        } catch (const std::exception&) {
            for (size_t si = 0; si < sigma_list.size(); ++si) failed[size_t(i)][si] = 1;
            return;
        }
        for (size_t si = 0; si < sigma_list.size(); ++si) {
            ImageData noisy = perturb(inst.pixels, sigma_list[si], mix_seed(seed, 1000 + si));
            try {
                SolverOutput out = solve_instance(inst, noisy);
                for (size_t ti = 0; ti < tau_list.size(); ++ti)
                    err[size_t(i)][si][ti] = is_erroneous(clean, out, truth, tau_list[ti]) ? 1 : 0;
            } catch (const std::exception&) {
                failed[size_t(i)][si] = 1;
                for (size_t ti = 0; ti < tau_list.size(); ++ti) err[size_t(i)][si][ti] = 1;
            }
        }
    });
    for (size_t si = 0; si < sigma_list.size(); ++si) {
        for (size_t ti = 0; ti < tau_list.size(); ++ti) {
            int count = 0;
            for (int i = 0; i < instances; ++i) count += err[size_t(i)][si][ti];
            table.ratios[si][ti] = double(count) / double(instances);
        }
        for (int i = 0; i < instances; ++i) table.failures[si] += failed[size_t(i)][si];
    }
    return table;
}

StabilityClass stability_class(int n, int n_hat) {
    if (3 * n_hat <= n) return StabilityClass::stable;
    if (3 * n_hat >= 2 * n) return StabilityClass::unstable;
    return StabilityClass::borderline;
}

StabilityVerdict classify_stability(const Instance& inst, int n, double sigma, double tau,
                                    std::uint64_t rng_seed) {
    StabilityVerdict v;
    v.n = n;
    SolverOutput clean = solve_instance(inst, inst.pixels);
    EpipolarModel truth = instance_truth(inst);
    for (int k = 0; k < n; ++k) {
        ImageData noisy = perturb(inst.pixels, sigma, mix_seed(rng_seed, std::uint64_t(k)));
        bool bad;
        try {
            bad = is_erroneous(clean, solve_instance(inst, noisy), truth, tau);
        } catch (const std::exception&) {
            bad = true;
        }
        if (bad) ++v.n_hat;
    }
    v.cls = stability_class(v.n, v.n_hat);
    return v;
}

static CurveQuery instance_query(const Instance& inst, const ImageData& pixels,
                                 const DistanceStatsParams& params, Vec2* target_out) {
    const bool is_e = kind_of(inst.scene) == ProblemKind::essential;
    const int n = is_e ? 5 : 7;
    CurveQuery q;
    q.kind = is_e ? ProblemKind::essential : ProblemKind::fundamental;
    if (is_e) {
        for (int i = 0; i < 4; ++i)
            q.anchors.emplace_back(inst.K.to_normalized(pixels.pairs[size_t(i)].first),
                                   inst.K.to_normalized(pixels.pairs[size_t(i)].second));
        q.x_last = inst.K.to_normalized(pixels.pairs[size_t(n - 1)].first);
        q.step = params.step_px / inst.K.fx;
        q.jump_cap = 3.0 / inst.K.fx;
        *target_out = inst.K.to_normalized(pixels.pairs[size_t(n - 1)].second);
    } else {
        for (int i = 0; i < 6; ++i) q.anchors.push_back(pixels.pairs[size_t(i)]);
        q.x_last = pixels.pairs[size_t(n - 1)].first;
        q.step = params.step_px;
        q.jump_cap = 3.0;
        *target_out = pixels.pairs[size_t(n - 1)].second;
    }
    return q;
}

double instance_curve_distance(const Instance& inst, const ImageData& pixels,
                               const DistanceStatsParams& params) {
    const bool is_e = kind_of(inst.scene) == ProblemKind::essential;
    Vec2 target;
    CurveQuery q = instance_query(inst, pixels, params, &target);
    double unit = is_e ? inst.K.fx : 1.0;
    try {
        double d = distance_to_curve(q, target, params.scan_halfwidth_px / unit);
        double dpx = d * unit;
        return std::min(dpx, params.scan_halfwidth_px);
    } catch (const std::exception&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

double DistanceStats::mean(StabilityClass c) const {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
        if (r.cls == c) {
            sum += r.distance_px;
            ++n;
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

int DistanceStats::count(StabilityClass c) const {
    int n = 0;
    for (const auto& r : rows)
        if (r.cls == c) ++n;
    return n;
}

double DistanceStats::separation_auc() const {
    std::vector<double> stable, unstable;
    for (const auto& r : rows) {
        if (r.cls == StabilityClass::stable) stable.push_back(r.distance_px);
        if (r.cls == StabilityClass::unstable) unstable.push_back(r.distance_px);
    }
    if (stable.empty() || unstable.empty()) return std::numeric_limits<double>::quiet_NaN();
    double wins = 0;
    for (double u : unstable)
        for (double s : stable) wins += (u < s) ? 1.0 : (u == s ? 0.5 : 0.0);
    return wins / (double(stable.size()) * double(unstable.size()));
}

DistanceStats run_distance_stats(ProblemKind kind, int instances, const SyntheticConfig& config,
                                 const DistanceStatsParams& params, int threads) {
    DistanceStats stats;
    stats.rows.assign(size_t(instances), {});
    std::vector<char> fail(size_t(instances), 0);
    parallel_for(instances, threads, [&](int i) {
        std::uint64_t seed = mix_seed(config.rng_seed, std::uint64_t(i));
        auto& row = stats.rows[size_t(i)];
        row.instance = i;
        try {
            Instance inst = generate_instance(kind, config, seed);
            row.cls = classify_stability(inst, params.n, params.sigma, params.tau, mix_seed(seed, 77)).cls;
            row.distance_px = instance_curve_distance(inst, inst.pixels, params);
            if (std::isnan(row.distance_px)) fail[size_t(i)] = 1;
        } catch (const std::exception&) {
            fail[size_t(i)] = 1;
            row.distance_px = std::numeric_limits<double>::quiet_NaN();
        }
    });
    DistanceStats out;
    for (int i = 0; i < instances; ++i) {
        if (fail[size_t(i)])
            ++out.curve_failures;
        else
            out.rows.push_back(stats.rows[size_t(i)]);
    }
    return out;
}

double CurveStabilityResult::median() const {
    if (differences.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> d = differences;
    std::sort(d.begin(), d.end());
    size_t n = d.size();
    return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

CurveStabilityResult run_curve_stability(ProblemKind kind, int instances, double sigma,
                                         const SyntheticConfig& config,
                                         const DistanceStatsParams& params, int threads) {
    CurveStabilityResult result;
    std::vector<double> diffs(size_t(instances), std::numeric_limits<double>::quiet_NaN());
    parallel_for(instances, threads, [&](int i) {
        std::uint64_t seed = mix_seed(config.rng_seed, std::uint64_t(i) + 31);
        try {
            Instance inst = generate_instance(kind, config, seed);
            double d0 = instance_curve_distance(inst, inst.pixels, params);
            // perturb the anchors (and the half-point x), keep the target fixed
            ImageData noisy = perturb(inst.pixels, sigma, mix_seed(seed, 5));
            noisy.pairs.back().second = inst.pixels.pairs.back().second;
            double d1 = instance_curve_distance(inst, noisy, params);
            if (!std::isnan(d0) && !std::isnan(d1)) diffs[size_t(i)] = std::abs(d0 - d1);
        } catch (const std::exception&) {
        }
    });
    for (double d : diffs) {
        if (std::isnan(d))
            ++result.failures;
        else
            result.differences.push_back(d);
    }
    return result;
}

std::vector<PairXY> extend_correspondences(const Instance& inst, int total, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    std::vector<PairXY> out = inst.pixels.pairs;
    const bool is_e = kind_of(inst.scene) == ProblemKind::essential;
    const double W = 2 * inst.K.cx, H = 2 * inst.K.cy;
    int guard = 0;
    while (int(out.size()) < total && ++guard < 100000) {
        Vec2 p1(rand_uniform(rng, 0, W), rand_uniform(rng, 0, H));
        double depth = rand_uniform(rng, 1.0, 20.0);
        Vec2 p2;
        if (is_e) {
            const auto& s = std::get<WorldSceneE>(inst.scene);
            Vec3 X = depth * inst.K.to_normalized(p1).homogeneous();
            Vec3 X2 = s.R.matrix() * X + s.t.vector();
            if (X2.z() < 1e-3) continue;
            p2 = inst.K.to_pixels(X2.hnormalized());
        } else {
            const auto& s = std::get<WorldSceneF>(inst.scene);
            // first camera of the normal form is [I 0]: pixel p1 lifts directly
            Vec3 X = depth * Vec3(p1.x(), p1.y(), 1.0);
            Vec3 X2 = s.M() * X.homogeneous();
            if (std::abs(X2.z()) < 1e-9) continue;
            p2 = X2.hnormalized();
        }
        if (p2.x() < 0 || p2.x() > W || p2.y() < 0 || p2.y() > H) continue;
        out.emplace_back(p1, p2);
    }
    if (int(out.size()) < total) throw NumericalError("extend_correspondences: sampling exhausted");
    return out;
}

RansacResult run_ransac(const std::vector<PairXY>& pixel_pairs, ProblemKind kind,
                        const RansacConfig& config, const Intrinsics& K, const EpipolarModel* truth) {
    const int n = int(pixel_pairs.size());
    const int k = minimal_count(kind);
    if (n < k) throw InvariantError("run_ransac: not enough correspondences");
    if (config.iterations <= 0) throw InvariantError("run_ransac: iterations must be positive");

    Rng rng(config.rng_seed);
    RansacResult result;
    int best_count = -1;

    auto sampson_px = [&](const EpipolarModel& m, const PairXY& pr) {
        if (kind == ProblemKind::fundamental) return sampson_distance(m, pr);
        // score essential models in pixels through K
        Mat3 Km;
        Km << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
        Mat3 Fpix = Km.inverse().transpose() * m.m * Km.inverse();
        EpipolarModel fm;
        fm.kind = ProblemKind::fundamental;
        fm.m = Fpix / Fpix.norm();
        return sampson_distance(fm, pr);
    };
    auto count_inliers = [&](const EpipolarModel& m, std::vector<int>* idx) {
        int count = 0;
        for (int i = 0; i < n; ++i) {
            if (sampson_px(m, pixel_pairs[size_t(i)]) < config.inlier_threshold_px2) {
                ++count;
                if (idx) idx->push_back(i);
            }
        }
        return count;
    };

    std::vector<int> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);

    for (int iter = 0; iter < config.iterations; ++iter) {
        // partial Fisher-Yates minimal sample
        for (int j = 0; j < k; ++j) {
            int r = j + int(rand_uniform(rng, 0, double(n - j)));
            r = std::min(r, n - 1);
            std::swap(pool[size_t(j)], pool[size_t(r)]);
        }
        std::vector<PairXY> sample;
        for (int j = 0; j < k; ++j) sample.push_back(pixel_pairs[size_t(pool[size_t(j)])]);

        RansacResult::Hypothesis hyp;
        hyp.iteration = iter;

        if (config.filter_min_curve_distance > 0) {
            CurveQuery q;
            double unit = 1.0;
            Vec2 target;
            q.kind = kind;
            if (kind == ProblemKind::fundamental) {
                for (int j = 0; j < k - 1; ++j) q.anchors.push_back(sample[size_t(j)]);
                q.x_last = sample[size_t(k - 1)].first;
                q.step = 1.0;
                q.jump_cap = 3.0;
                target = sample[size_t(k - 1)].second;
            } else {
                for (int j = 0; j < k - 1; ++j)
                    q.anchors.emplace_back(K.to_normalized(sample[size_t(j)].first),
                                           K.to_normalized(sample[size_t(j)].second));
                q.x_last = K.to_normalized(sample[size_t(k - 1)].first);
                q.step = 1.0 / K.fx;
                q.jump_cap = 3.0 / K.fx;
                unit = K.fx;
                target = K.to_normalized(sample[size_t(k - 1)].second);
            }
            try {
                double d = distance_to_curve(q, target, config.filter_scan_halfwidth_px / unit) * unit;
                hyp.curve_distance = std::min(d, config.filter_scan_halfwidth_px);
            } catch (const std::exception&) {
                hyp.curve_distance = std::numeric_limits<double>::quiet_NaN();
            }
            if (hyp.curve_distance < config.filter_min_curve_distance) {
                hyp.filtered = true;
                result.log.push_back(hyp);
                continue;
            }
        }

        SolverOutput out;
        try {
            if (kind == ProblemKind::fundamental) {
                out = solve_seven_point(sample);
            } else {
                std::vector<PairXY> norm;
                for (const auto& [x, y] : sample)
                    norm.emplace_back(K.to_normalized(x), K.to_normalized(y));
                out = solve_five_point(norm);
            }
        } catch (const std::exception&) {
            result.log.push_back(hyp);
            continue;
        }

        ++result.hypotheses_scored;
        for (const auto& m : out.models) {
            int count = count_inliers(m, nullptr);
            hyp.inlier_count = std::max(hyp.inlier_count, count);
            if (truth) {
                double err = model_error(m, *truth);
                if (std::isnan(hyp.model_error) || err < hyp.model_error) hyp.model_error = err;
            }
            if (count > best_count) {
                best_count = count;
                result.best_model = m;
            }
        }
        if (truth && config.target_model_error > 0 && result.hypotheses_to_target < 0 && best_count >= 0 &&
            model_error(result.best_model, *truth) <= config.target_model_error)
            result.hypotheses_to_target = result.hypotheses_scored;
        result.log.push_back(hyp);
    }
    if (best_count < 0) throw NumericalError("run_ransac: no valid hypothesis found");

    if (config.local_optimization) {
        std::vector<int> inl;
        count_inliers(result.best_model, &inl);
        if (int(inl.size()) >= k + 1) {
            Eigen::MatrixXd rows(inl.size(), 9);
            for (size_t i = 0; i < inl.size(); ++i) {
                const auto& pr = pixel_pairs[size_t(inl[i])];
                if (kind == ProblemKind::fundamental)
                    rows.row(int(i)) = epipolar_row(pr.first, pr.second).transpose();
                else
                    rows.row(int(i)) =
                        epipolar_row(K.to_normalized(pr.first), K.to_normalized(pr.second)).transpose();
            }
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeFullV);
            Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
            Mat3 M = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(f.data());
            Eigen::JacobiSVD<Mat3> ms(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
            Vec3 s = ms.singularValues();
            if (kind == ProblemKind::fundamental)
                s(2) = 0;
            else {
                double avg = 0.5 * (s(0) + s(1));
                s = Vec3(avg, avg, 0);
            }
            Mat3 refit = ms.matrixU() * s.asDiagonal() * ms.matrixV().transpose();
            try {
                EpipolarModel rm = EpipolarModel::make(kind, refit);
                if (count_inliers(rm, nullptr) >= best_count) result.best_model = rm;
            } catch (const std::exception&) {
            }
        }
    }
    count_inliers(result.best_model, &result.inliers);
    return result;
}

} // namespace epicond
