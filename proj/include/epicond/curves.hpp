#pragma once

#include "epicond/polysys.hpp"
#include "epicond/solvers.hpp"

#include <memory>

namespace epicond {

struct Window {
    double umin = 0, umax = 0, vmin = 0, vmax = 0;
};

/// Anchor data for an X.5-point degenerate curve: 4 (E) or 6 (F) full
/// correspondences plus the first-image half of the last one.  Coordinates
/// are whatever units the correspondences are in (pixels for F bench scenes,
/// normalized for E).
struct CurveQuery {
    ProblemKind kind = ProblemKind::fundamental;
    std::vector<PairXY> anchors;
    Vec2 x_last = Vec2::Zero();
    Window window;
    double step = 1.0;
    double jump_cap = 3.0;  // max |dv| for linking roots of adjacent columns

    void validate() const;
};

struct CurveSlice {
    double u = 0;
    std::vector<double> roots;      // sorted real v values
    std::vector<double> residuals;  // on the full (unsquared) defining system
};

struct CurveSweep {
    struct Segment {
        int col_a = 0, root_a = 0, col_b = 0, root_b = 0;
        int branch = 0;
    };
    std::vector<CurveSlice> slices;
    std::vector<Segment> segments;
    std::vector<double> failed_columns;
};

/// Column-by-column solver holding the tracking state for one query
/// (for E, solutions are continued from a process-level generic seed and
/// between adjacent columns, with periodic independent revalidation).
class CurveTracer {
  public:
    explicit CurveTracer(const CurveQuery& query, int threads = 1);
    ~CurveTracer();
    CurveTracer(CurveTracer&&) noexcept;

    CurveSlice slice(double u);
    const CurveQuery& query() const;

    /// Columns solved since the last independent solve (E bookkeeping).
    int columns_since_revalidation() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

CurveSlice curve_column_F(const CurveQuery& query, double u);
CurveSlice curve_column_E(const CurveQuery& query, double u);

/// Cubic discriminant of det(s F1 + t F2) for the 2-dim nullspace of the
/// completed 7x9 epipolar matrix, normalized by ||coeffs||^4.
double disc_oracle_F(const CurveQuery& query, double u, double v);

CurveSweep curve_sweep(const CurveQuery& query, int threads = 1);

/// Min Euclidean distance from `point` to the curve in a local sweep of
/// +- scan_halfwidth columns around it (polyline interpolation); +infinity
/// when the local window contains no curve point.
double distance_to_curve(const CurveQuery& query, const Vec2& point, double scan_halfwidth);
double distance_to_curve(CurveTracer& tracer, const Vec2& point, double scan_halfwidth);

/// Distance from a point to an assembled sweep polyline.
double distance_to_sweep(const CurveSweep& sweep, const Vec2& point);

/// The 36 maximal minors of a rank-7 7x9 matrix in lexicographic column-subset
/// order, normalized to unit norm.
Eigen::Matrix<double, 36, 1> plucker_minors(const Eigen::Matrix<double, 7, 9>& M);

/// Assembles nearest-neighbor polyline segments between adjacent slices.
void link_slices(CurveSweep& sweep, double jump_cap);

} // namespace epicond
