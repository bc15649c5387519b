#include "epicond/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace epicond {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

static json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

void save_scene(const SceneFile& sf, const std::filesystem::path& path) {
    json j;
    if (auto* e = std::get_if<WorldSceneE>(&sf.scene)) {
        j["problem"] = "E";
        json pose;
        json Rj = json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) Rj.push_back(e->R.matrix()(r, c));
        pose["R"] = Rj;
        pose["t"] = vec_to_json(e->t.vector());
        j["pose"] = pose;
        json pts = json::array();
        for (const auto& X : e->X) pts.push_back(vec_to_json(X));
        j["points"] = pts;
    } else {
        const auto& f = std::get<WorldSceneF>(sf.scene);
        j["problem"] = "F";
        j["pose"] = {{"b", vec_to_json(f.b)}};
        json pts = json::array();
        for (const auto& X : f.X) pts.push_back(vec_to_json(X));
        j["points"] = pts;
    }
    if (sf.intrinsics) {
        j["intrinsics"] = {{"fx", sf.intrinsics->fx},
                           {"fy", sf.intrinsics->fy},
                           {"cx", sf.intrinsics->cx},
                           {"cy", sf.intrinsics->cy}};
    }
    std::ofstream out(path);
    if (!out) throw NumericalError("save_scene: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

static Vec3 parse_vec3(const json& a, const std::string& where) {
    if (!a.is_array() || a.size() != 3) throw InvariantError("scene file: \"" + where + "\" must be a 3-vector");
    return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
}

SceneFile load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NumericalError("load_scene: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvariantError("scene file: malformed JSON: " + std::string(e.what()));
    }
    for (const char* key : {"problem", "pose", "points"})
        if (!j.contains(key)) throw InvariantError(std::string("scene file: missing \"") + key + "\" key");

    SceneFile sf;
    std::string problem = j["problem"].get<std::string>();
    const json& pts = j["points"];
    if (problem == "E") {
        const json& pose = j["pose"];
        if (!pose.contains("R") || !pose.contains("t"))
            throw InvariantError("scene file: E pose requires \"R\" and \"t\"");
        const json& Rj = pose["R"];
        if (!Rj.is_array() || Rj.size() != 9) throw InvariantError("scene file: \"R\" must hold 9 numbers");
        Mat3 R;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) R(r, c) = Rj[size_t(3 * r + c)].get<double>();
        WorldSceneE s;
        s.R = Rotation::from_matrix(R);
        Vec3 t = parse_vec3(pose["t"], "pose.t");
        if (std::abs(t.norm() - 1.0) > 1e-8) throw InvariantError("scene file: \"t\" must be a unit vector");
        s.t = UnitTranslation::from_vector(t);
        if (!pts.is_array() || pts.size() != 5) throw InvariantError("scene file: E scene requires 5 points");
        for (int i = 0; i < 5; ++i) s.X[size_t(i)] = parse_vec3(pts[size_t(i)], "points[" + std::to_string(i) + "]");
        s.validate();
        sf.scene = s;
    } else if (problem == "F") {
        const json& pose = j["pose"];
        if (!pose.contains("b")) throw InvariantError("scene file: F pose requires \"b\"");
        const json& bj = pose["b"];
        if (!bj.is_array() || bj.size() != 7) throw InvariantError("scene file: \"b\" must hold 7 numbers");
        WorldSceneF s;
        for (int i = 0; i < 7; ++i) s.b[i] = bj[size_t(i)].get<double>();
        if (!pts.is_array() || pts.size() != 7) throw InvariantError("scene file: F scene requires 7 points");
        for (int i = 0; i < 7; ++i) s.X[size_t(i)] = parse_vec3(pts[size_t(i)], "points[" + std::to_string(i) + "]");
        s.validate();
        sf.scene = s;
    } else {
        throw InvariantError("scene file: \"problem\" must be \"E\" or \"F\"");
    }
    if (j.contains("intrinsics")) {
        const json& K = j["intrinsics"];
        for (const char* key : {"fx", "fy", "cx", "cy"})
            if (!K.contains(key)) throw InvariantError(std::string("scene file: intrinsics missing \"") + key + "\"");
        sf.intrinsics = Intrinsics{K["fx"].get<double>(), K["fy"].get<double>(), K["cx"].get<double>(),
                                   K["cy"].get<double>()};
    }
    return sf;
}

std::vector<PairXY> load_pairs_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NumericalError("load_pairs_csv: cannot open " + path.string());
    std::string line;
    std::vector<PairXY> pairs;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("x1", 0) == 0) continue;  // header
        }
        std::istringstream ss(line);
        double v[4];
        char comma;
        for (int i = 0; i < 4; ++i) {
            if (!(ss >> v[i])) throw InvariantError("pairs CSV: malformed row: " + line);
            if (i < 3 && !(ss >> comma)) throw InvariantError("pairs CSV: malformed row: " + line);
        }
        pairs.emplace_back(Vec2(v[0], v[1]), Vec2(v[2], v[3]));
    }
    return pairs;
}

void save_pairs_csv(const std::vector<PairXY>& pairs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("save_pairs_csv: cannot open " + path.string());
    out << "x1,y1,x2,y2\n";
    for (const auto& [x, y] : pairs)
        out << format_double(x.x()) << "," << format_double(x.y()) << "," << format_double(y.x()) << ","
            << format_double(y.y()) << "\n";
}

void export_curve_csv(const CurveSweep& sweep, const std::filesystem::path& path) {
    // collect (u, v, residual, branch) rows sorted by (u, v)
    struct Row {
        double u, v, res;
        int branch;
    };
    std::vector<Row> rows;
    std::vector<std::vector<int>> branch(sweep.slices.size());
    for (size_t c = 0; c < sweep.slices.size(); ++c) branch[c].assign(sweep.slices[c].roots.size(), -1);
    for (const auto& seg : sweep.segments) {
        branch[size_t(seg.col_a)][size_t(seg.root_a)] = seg.branch;
        branch[size_t(seg.col_b)][size_t(seg.root_b)] = seg.branch;
    }
    int next = 0;
    for (const auto& col : branch)
        for (int b : col) next = std::max(next, b + 1);
    for (auto& col : branch)
        for (auto& b : col)
            if (b < 0) b = next++;
    for (size_t c = 0; c < sweep.slices.size(); ++c)
        for (size_t r = 0; r < sweep.slices[c].roots.size(); ++r)
            rows.push_back({sweep.slices[c].u, sweep.slices[c].roots[r], sweep.slices[c].residuals[r],
                            branch[c][r]});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.u != b.u) return a.u < b.u;
        return a.v < b.v;
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("export_curve_csv: cannot open " + path.string());
    out << "u,v,residual,branch_id\n";
    for (const auto& r : rows)
        out << format_double(r.u) << "," << format_double(r.v) << "," << format_double(r.res) << ","
            << r.branch << "\n";
}

CurveSweep import_curve_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NumericalError("import_curve_csv: cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "u,v,residual,branch_id") throw InvariantError("curve CSV: bad header");
    CurveSweep sweep;
    std::map<double, CurveSlice> slices;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double u, v, res;
        int branch;
        char comma;
        if (!(ss >> u >> comma >> v >> comma >> res >> comma >> branch))
            throw InvariantError("curve CSV: malformed row: " + line);
        auto& s = slices[u];
        s.u = u;
        s.roots.push_back(v);
        s.residuals.push_back(res);
    }
    for (auto& [u, s] : slices) sweep.slices.push_back(std::move(s));
    return sweep;
}

void render_svg(const CurveSweep& sweep, const Window& window, const std::vector<Vec2>& anchors,
                const std::optional<Vec2>& target, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("render_svg: cannot open " + path.string());
    double w = window.umax - window.umin, h = window.vmax - window.vmin;
    double mark = std::max(w, h) / 160.0;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << format_double(window.umin) << " "
        << format_double(window.vmin) << " " << format_double(w) << " " << format_double(h) << "\">\n";
    out << "  <rect x=\"" << format_double(window.umin) << "\" y=\"" << format_double(window.vmin)
        << "\" width=\"" << format_double(w) << "\" height=\"" << format_double(h)
        << "\" fill=\"white\" stroke=\"black\" stroke-width=\"" << format_double(mark / 4) << "\"/>\n";

    // group segments into per-branch polylines
    std::map<int, std::vector<std::pair<Vec2, Vec2>>> branches;
    auto clampw = [&](const Vec2& p) {
        return p.x() >= window.umin && p.x() <= window.umax && p.y() >= window.vmin && p.y() <= window.vmax;
    };
    for (const auto& seg : sweep.segments) {
        Vec2 a(sweep.slices[size_t(seg.col_a)].u, sweep.slices[size_t(seg.col_a)].roots[size_t(seg.root_a)]);
        Vec2 b(sweep.slices[size_t(seg.col_b)].u, sweep.slices[size_t(seg.col_b)].roots[size_t(seg.root_b)]);
        if (clampw(a) && clampw(b)) branches[seg.branch].emplace_back(a, b);
    }
    for (const auto& [id, segs] : branches) {
        out << "  <path fill=\"none\" stroke=\"red\" stroke-width=\"" << format_double(mark / 2) << "\" d=\"";
        for (size_t i = 0; i < segs.size(); ++i) {
            out << "M " << format_double(segs[i].first.x()) << " " << format_double(segs[i].first.y()) << " L "
                << format_double(segs[i].second.x()) << " " << format_double(segs[i].second.y()) << " ";
        }
        out << "\"/>\n";
    }
    for (const auto& a : anchors)
        if (clampw(a))
            out << "  <circle cx=\"" << format_double(a.x()) << "\" cy=\"" << format_double(a.y()) << "\" r=\""
                << format_double(mark) << "\" fill=\"green\"/>\n";
    if (target && clampw(*target))
        out << "  <circle cx=\"" << format_double(target->x()) << "\" cy=\"" << format_double(target->y())
            << "\" r=\"" << format_double(mark) << "\" fill=\"red\"/>\n";
    out << "</svg>\n";
}

} // namespace epicond
