#pragma once

#include "epicond/bench.hpp"

#include <filesystem>
#include <iosfwd>

namespace epicond {

struct SceneFile {
    WorldScene scene;
    std::optional<Intrinsics> intrinsics;
};

SceneFile load_scene(const std::filesystem::path& path);
void save_scene(const SceneFile& scene, const std::filesystem::path& path);

/// Correspondence CSV: header "x1,y1,x2,y2", 17 significant digits.
std::vector<PairXY> load_pairs_csv(const std::filesystem::path& path);
void save_pairs_csv(const std::vector<PairXY>& pairs, const std::filesystem::path& path);

/// Curve CSV: header "u,v,residual,branch_id", rows sorted by (u, v).
void export_curve_csv(const CurveSweep& sweep, const std::filesystem::path& path);
CurveSweep import_curve_csv(const std::filesystem::path& path);

/// Minimal SVG rendering: image-boundary rectangle, red curve polyline(s),
/// green anchor points, red target dot; viewBox = the query window.
void render_svg(const CurveSweep& sweep, const Window& window, const std::vector<Vec2>& anchors,
                const std::optional<Vec2>& target, const std::filesystem::path& path);

/// Shortest-round-trip decimal formatting used by every exporter.
std::string format_double(double v);

int cli_dispatch(int argc, const char* const* argv);

} // namespace epicond
