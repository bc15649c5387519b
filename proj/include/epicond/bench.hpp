#pragma once

#include "epicond/curves.hpp"
#include "epicond/solvers.hpp"

#include <map>

namespace epicond {

struct Intrinsics {
    double fx = 525, fy = 525, cx = 320, cy = 240;
    Vec2 to_normalized(const Vec2& px) const { return Vec2((px.x() - cx) / fx, (px.y() - cy) / fy); }
    Vec2 to_pixels(const Vec2& n) const { return Vec2(fx * n.x() + cx, fy * n.y() + cy); }
};

struct SyntheticConfig {
    double image_width = 640, image_height = 480;
    double focal = 525;
    double depth_min = 1, depth_max = 20;
    double noise_sigma = 0;
    double error_threshold = 0.5;
    int instances = 1;
    std::uint64_t rng_seed = 0;

    Intrinsics intrinsics() const { return {focal, focal, image_width / 2, image_height / 2}; }
    void validate() const;
};

struct Instance {
    WorldScene scene;
    ImageData pixels;
    Intrinsics K;
};

/// Random synthetic minimal-problem instance with every projection inside the
/// image; F instances are re-expressed in the b normal form.
Instance generate_instance(ProblemKind kind, const SyntheticConfig& config, std::uint64_t rng_seed);

/// Adds i.i.d. spherical Gaussian N(0, sigma^2 I2) noise per image point.
ImageData perturb(const ImageData& data, double sigma, std::uint64_t rng_seed);

/// Entrywise ratio error mean(| |Mbar_ij / M_ij| - 1 |) on normalized,
/// sign-canonicalized models; entries of M below 1e-12 are excluded.
double model_error(const EpipolarModel& estimate, const EpipolarModel& truth);

/// Criterion (i): min model_error over noisy models vs truth exceeds tau, OR
/// criterion (ii): the real solution count changed.
bool is_erroneous(const SolverOutput& outputs_clean, const SolverOutput& outputs_noisy,
                  const EpipolarModel& truth, double tau);

/// Solves the instance's minimal problem on the given pixel pairs (normalized
/// internally for E).
SolverOutput solve_instance(const Instance& inst, const ImageData& pixels);

struct RevelationTable {
    std::vector<double> sigmas;
    std::vector<double> taus;
    // ratios[si][ti] = erroneous fraction at (sigma, tau); solver_failures
    // counted separately per sigma
    std::vector<std::vector<double>> ratios;
    std::vector<int> failures;
};

RevelationTable run_revelation(ProblemKind kind, const std::vector<double>& sigma_list,
                               const std::vector<double>& tau_list, int instances,
                               const SyntheticConfig& config, int threads = 1);

enum class StabilityClass { stable, borderline, unstable };

/// Closed thresholds: stable iff n_hat <= n/3, unstable iff n_hat >= 2n/3.
StabilityClass stability_class(int n, int n_hat);

struct StabilityVerdict {
    int n = 20;
    int n_hat = 0;
    StabilityClass cls = StabilityClass::stable;
};

/// n perturbation trials at (sigma, tau); stable iff n_hat <= n/3 (closed),
/// unstable iff n_hat >= 2n/3, else borderline.
StabilityVerdict classify_stability(const Instance& inst, int n, double sigma, double tau,
                                    std::uint64_t rng_seed);

struct DistanceStats {
    struct Row {
        int instance = 0;
        StabilityClass cls = StabilityClass::stable;
        double distance_px = 0;  // clamped at the scan radius
    };
    std::vector<Row> rows;
    int curve_failures = 0;
    double mean(StabilityClass c) const;
    int count(StabilityClass c) const;
    /// AUC of (smaller distance -> unstable) as a stable/unstable classifier.
    double separation_auc() const;
};

struct DistanceStatsParams {
    int n = 20;
    double sigma = 0.3;
    double tau = 0.5;
    double scan_halfwidth_px = 24;
    double step_px = 1.0;
};

DistanceStats run_distance_stats(ProblemKind kind, int instances, const SyntheticConfig& config,
                                 const DistanceStatsParams& params, int threads = 1);

/// Distance from the target point to the curve from the instance's own
/// anchors, in pixels, clamped at the scan radius; quiet NaN on curve failure.
double instance_curve_distance(const Instance& inst, const ImageData& pixels,
                               const DistanceStatsParams& params);

struct CurveStabilityResult {
    std::vector<double> differences;  // |d(clean anchors) - d(noisy anchors)| per instance, px
    int failures = 0;
    double median() const;
};

CurveStabilityResult run_curve_stability(ProblemKind kind, int instances, double sigma,
                                         const SyntheticConfig& config,
                                         const DistanceStatsParams& params, int threads = 1);

struct RansacConfig {
    int iterations = 1000;
    double inlier_threshold_px2 = 2.0;  // Sampson, squared pixels
    double filter_min_curve_distance = 0;  // 0 = filter off
    bool local_optimization = false;
    std::uint64_t rng_seed = 0;
    double filter_scan_halfwidth_px = 12;
    double target_model_error = 0;  // when > 0, log when the best model first reaches it
};

struct RansacResult {
    EpipolarModel best_model;
    std::vector<int> inliers;
    struct Hypothesis {
        int iteration = 0;
        int inlier_count = 0;
        double curve_distance = std::numeric_limits<double>::quiet_NaN();
        double model_error = std::numeric_limits<double>::quiet_NaN();
        bool filtered = false;
    };
    std::vector<Hypothesis> log;
    int hypotheses_scored = 0;
    int hypotheses_to_target = -1;  // scored hypotheses until target error reached
};

/// Additional correspondences sampled from the instance's scene geometry
/// (for RANSAC data sets larger than the minimal count).
std::vector<PairXY> extend_correspondences(const Instance& inst, int total, std::uint64_t rng_seed);

/// Plain hypothesize-and-verify RANSAC with an optional conditioning filter
/// that rejects minimal samples whose held-out point lies too close to the
/// degenerate curve of the other anchors.
RansacResult run_ransac(const std::vector<PairXY>& pixel_pairs, ProblemKind kind,
                        const RansacConfig& config, const Intrinsics& K,
                        const EpipolarModel* truth = nullptr);

} // namespace epicond
