#include "epicond/condition.hpp"
#include "epicond/illposed.hpp"
#include "epicond/io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace epicond {

using nlohmann::json;

namespace {

ProblemKind parse_problem(const std::string& p) {
    if (p == "E" || p == "e") return ProblemKind::essential;
    if (p == "F" || p == "f") return ProblemKind::fundamental;
    throw CLI::ValidationError("--problem", "must be E or F");
}

void apply_tol_overrides(const std::string& spec) {
    if (spec.empty()) return;
    auto& tol = Tolerances::global();
    std::map<std::string, double*> keys = {
        {"orthogonality", &tol.orthogonality},
        {"manifold", &tol.manifold_membership},
        {"solver-residual", &tol.solver_residual},
        {"sentinel", &tol.sentinel_rel},
        {"degeneracy", &tol.degeneracy_rel},
        {"path-residual", &tol.path_residual},
        {"curve-residual", &tol.curve_root_residual},
    };
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--tol-overrides", "expected key=value");
        std::string key = item.substr(0, eq);
        auto it = keys.find(key);
        if (it == keys.end()) throw CLI::ValidationError("--tol-overrides", "unknown tolerance " + key);
        *it->second = std::stod(item.substr(eq + 1));
    }
}

json model_to_json(const EpipolarModel& m) {
    json out;
    out["kind"] = m.kind == ProblemKind::essential ? "E" : "F";
    json mm = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) mm.push_back(m.m(r, c));
    out["m"] = mm;
    return out;
}

std::optional<Intrinsics> parse_intrinsics(const std::string& s) {
    if (s.empty()) return std::nullopt;
    Intrinsics K;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf", &K.fx, &K.fy, &K.cx, &K.cy) != 4)
        throw CLI::ValidationError("--intrinsics", "expected fx,fy,cx,cy");
    return K;
}

Window parse_window(const std::string& s) {
    Window w;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf:%lf", &w.umin, &w.umax, &w.vmin, &w.vmax) != 4)
        throw CLI::ValidationError("--window", "expected umin:umax:vmin:vmax");
    return w;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("cannot open " + path.string());
    out << text;
}

// Sweep in pixel units for an E query given in normalized units.
CurveSweep pixel_sweep(CurveSweep sweep, const Intrinsics& K) {
    for (auto& s : sweep.slices) {
        s.u = K.fx * s.u + K.cx;
        for (auto& v : s.roots) v = K.fy * v + K.cy;
    }
    for (auto& u : sweep.failed_columns) u = K.fx * u + K.cx;
    return sweep;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
    CLI::App app{"Conditioning, degenerate curves, and instability experiments for the 5-/7-point relative-pose problems"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string tol_overrides;
    app.add_option("--seed", seed, "global RNG seed");
    app.add_option("--threads", threads, "worker threads for experiments");
    app.add_option("--tol-overrides", tol_overrides, "comma-separated key=value tolerance overrides");

    // ---- gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic minimal-problem instance");
    std::string gen_problem = "F", gen_out = "instance";
    gen->add_option("--problem", gen_problem, "E or F")->required();
    gen->add_option("--out", gen_out, "output prefix (writes <out>.scene.json and <out>.pairs.csv)");

    // ---- cond
    auto* cond = app.add_subcommand("cond", "condition report for a scene");
    std::string cond_scene, cond_out;
    cond->add_option("--scene", cond_scene, "scene JSON path")->required();
    cond->add_option("--out", cond_out, "write report to file instead of stdout");

    // ---- illposed
    auto* illp = app.add_subcommand("illposed", "construct or check ill-posed scenes");
    std::string ill_construct, ill_check, ill_out = "illposed.scene.json";
    illp->add_option("--construct", ill_construct, "construct an ill-posed scene for problem E or F");
    illp->add_option("--check", ill_check, "check a scene JSON file");
    illp->add_option("--out", ill_out, "output scene path for --construct");

    // ---- solve5 / solve7
    auto* s5 = app.add_subcommand("solve5", "five-point essential solver");
    auto* s7 = app.add_subcommand("solve7", "seven-point fundamental solver");
    std::string s5_pairs, s7_pairs, s5_intr, s57_out;
    s5->add_option("--pairs", s5_pairs, "correspondence CSV")->required();
    s5->add_option("--intrinsics", s5_intr, "fx,fy,cx,cy (normalizes pixel pairs)");
    s5->add_option("--out", s57_out, "write models JSON to file");
    s7->add_option("--pairs", s7_pairs, "correspondence CSV")->required();
    s7->add_option("--out", s57_out, "write models JSON to file");

    // ---- curve
    auto* curve = app.add_subcommand("curve", "X.5-point degenerate curve sweep");
    std::string cv_problem, cv_pairs, cv_window, cv_out = "curve.csv", cv_svg, cv_intr;
    double cv_step = 1.0, cv_neighborhood = 0.0;
    curve->add_option("--problem", cv_problem, "E or F")->required();
    curve->add_option("--pairs", cv_pairs, "CSV with the anchors; last row = half pair (x known, y = target)")
        ->required();
    curve->add_option("--window", cv_window, "umin:umax:vmin:vmax sweep window");
    curve->add_option("--step", cv_step, "column step");
    curve->add_option("--neighborhood", cv_neighborhood, "scan only +-W columns around the target point");
    curve->add_option("--out", cv_out, "curve CSV output");
    curve->add_option("--svg", cv_svg, "optional SVG rendering");
    curve->add_option("--intrinsics", cv_intr, "fx,fy,cx,cy (pixel data for problem E)");

    // ---- experiment
    auto* exp = app.add_subcommand("experiment", "synthetic experiments");
    std::string ex_kind, ex_problem, ex_out = "experiment.csv";
    int ex_instances = 100;
    std::string ex_sigmas = "0,0.1,0.3,0.5,1", ex_taus = "0.1,0.25,0.5,1";
    double ex_sigma = 0.5;
    exp->add_option("--kind", ex_kind, "revelation | distance | curve-stability")->required();
    exp->add_option("--problem", ex_problem, "E or F")->required();
    exp->add_option("--instances", ex_instances, "instance count");
    exp->add_option("--sigma-list", ex_sigmas, "noise levels for revelation");
    exp->add_option("--tau-list", ex_taus, "error thresholds for revelation");
    exp->add_option("--sigma", ex_sigma, "anchor noise for curve-stability");
    exp->add_option("--out", ex_out, "CSV output path");

    // ---- ransac
    auto* ransac = app.add_subcommand("ransac", "RANSAC with optional conditioning filter");
    std::string rs_pairs, rs_intr, rs_truth, rs_out = "ransac.model.json", rs_log;
    std::string rs_problem = "F";
    int rs_iters = 1000;
    double rs_thresh = 2.0, rs_filter = 0.0;
    bool rs_lo = false;
    ransac->add_option("--pairs", rs_pairs, "correspondence CSV")->required();
    ransac->add_option("--problem", rs_problem, "E or F");
    ransac->add_option("--iterations", rs_iters, "hypothesis count");
    ransac->add_option("--threshold", rs_thresh, "Sampson inlier threshold (px^2)");
    ransac->add_option("--filter-distance", rs_filter, "min curve distance (px); 0 disables the filter");
    ransac->add_flag("--local-optimization", rs_lo, "refit on the best inlier set");
    ransac->add_option("--intrinsics", rs_intr, "fx,fy,cx,cy (required for E)");
    ransac->add_option("--truth", rs_truth, "scene JSON with ground truth (enables error logging)");
    ransac->add_option("--out", rs_out, "best model JSON");
    ransac->add_option("--log", rs_log, "per-hypothesis log CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        apply_tol_overrides(tol_overrides);

        if (gen->parsed()) {
            SyntheticConfig config;
            config.rng_seed = seed;
            Instance inst = generate_instance(parse_problem(gen_problem), config, seed);
            SceneFile sf{inst.scene, inst.K};
            save_scene(sf, gen_out + ".scene.json");
            save_pairs_csv(inst.pixels.pairs, gen_out + ".pairs.csv");
            std::cout << gen_out << ".scene.json\n" << gen_out << ".pairs.csv\n";
        } else if (cond->parsed()) {
            SceneFile sf = load_scene(cond_scene);
            ConditionReport rep = condition_number(sf.scene);
            json j;
            j["finite"] = rep.finite();
            j["cond"] = rep.finite() ? json(rep.cond) : json("inf");
            j["sigma_min_forward"] = rep.sigma_min_forward;
            j["sigma_max_forward"] = rep.sigma_max_forward;
            std::string text = j.dump(2) + "\n";
            if (cond_out.empty())
                std::cout << text;
            else
                write_text(cond_out, text);
        } else if (illp->parsed()) {
            if (!ill_construct.empty()) {
                WorldScene s = construct_ill_posed(parse_problem(ill_construct), seed);
                save_scene(SceneFile{s, std::nullopt}, ill_out);
                std::cout << ill_out << "\n";
            } else if (!ill_check.empty()) {
                SceneFile sf = load_scene(ill_check);
                auto cert = degeneracy_matrix(sf.scene);
                auto verdict = is_ill_posed(sf.scene, Tolerances::global().degeneracy_rel);
                json j;
                j["normalized_det"] = cert.normalized_det();
                j["sigma_margin"] = verdict.margin;
                j["ill_posed"] = verdict.ill_posed;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cerr << "illposed: need --construct or --check\n";
                return 1;
            }
        } else if (s5->parsed() || s7->parsed()) {
            bool five = s5->parsed();
            auto pairs = load_pairs_csv(five ? s5_pairs : s7_pairs);
            if (five) {
                if (auto K = parse_intrinsics(s5_intr)) {
                    for (auto& [x, y] : pairs) {
                        x = K->to_normalized(x);
                        y = K->to_normalized(y);
                    }
                }
            }
            SolverOutput out = five ? solve_five_point(pairs) : solve_seven_point(pairs);
            json j;
            j["real_count"] = out.real_count;
            j["residual_max"] = out.residual_max;
            j["near_degenerate"] = out.near_degenerate;
            j["models"] = json::array();
            for (const auto& m : out.models) j["models"].push_back(model_to_json(m));
            std::string text = j.dump(2) + "\n";
            if (s57_out.empty())
                std::cout << text;
            else
                write_text(s57_out, text);
        } else if (curve->parsed()) {
            ProblemKind kind = parse_problem(cv_problem);
            auto pairs = load_pairs_csv(cv_pairs);
            const int need = kind == ProblemKind::essential ? 5 : 7;
            if (int(pairs.size()) != need)
                throw InvariantError("curve: expected " + std::to_string(need) + " rows in --pairs");
            auto K = parse_intrinsics(cv_intr);
            if (kind == ProblemKind::essential && K)
                for (auto& [x, y] : pairs) {
                    x = K->to_normalized(x);
                    y = K->to_normalized(y);
                }
            CurveQuery q;
            q.kind = kind;
            for (int i = 0; i < need - 1; ++i) q.anchors.push_back(pairs[size_t(i)]);
            q.x_last = pairs[size_t(need - 1)].first;
            Vec2 target = pairs[size_t(need - 1)].second;
            double unit = (kind == ProblemKind::essential && K) ? K->fx : 1.0;
            q.step = cv_step / unit;
            q.jump_cap = 3.0 * cv_step / unit;
            Window win_px = cv_window.empty() ? Window{0, 640, 0, 480} : parse_window(cv_window);
            if (cv_neighborhood > 0) {
                Vec2 t_px = (kind == ProblemKind::essential && K) ? K->to_pixels(target) : target;
                win_px.umin = t_px.x() - cv_neighborhood;
                win_px.umax = t_px.x() + cv_neighborhood;
            }
            q.window = win_px;
            if (kind == ProblemKind::essential && K) {
                q.window.umin = (win_px.umin - K->cx) / K->fx;
                q.window.umax = (win_px.umax - K->cx) / K->fx;
                q.window.vmin = (win_px.vmin - K->cy) / K->fy;
                q.window.vmax = (win_px.vmax - K->cy) / K->fy;
            }
            CurveSweep sweep = curve_sweep(q, threads);
            if (kind == ProblemKind::essential && K) sweep = pixel_sweep(std::move(sweep), *K);
            export_curve_csv(sweep, cv_out);
            std::cout << cv_out << "\n";
            if (!cv_svg.empty()) {
                std::vector<Vec2> anchor_pts;
                for (int i = 0; i < need - 1; ++i) {
                    Vec2 y = pairs[size_t(i)].second;
                    anchor_pts.push_back(kind == ProblemKind::essential && K ? K->to_pixels(y) : y);
                }
                Vec2 t_draw = (kind == ProblemKind::essential && K) ? K->to_pixels(target) : target;
                render_svg(sweep, win_px, anchor_pts, t_draw, cv_svg);
                std::cout << cv_svg << "\n";
            }
        } else if (exp->parsed()) {
            ProblemKind kind = parse_problem(ex_problem);
            SyntheticConfig config;
            config.rng_seed = seed;
            std::ostringstream csv;
            if (ex_kind == "revelation") {
                auto table = run_revelation(kind, parse_list(ex_sigmas), parse_list(ex_taus), ex_instances,
                                            config, threads);
                csv << "sigma,tau,erroneous_ratio,solver_failures\n";
                for (size_t si = 0; si < table.sigmas.size(); ++si)
                    for (size_t ti = 0; ti < table.taus.size(); ++ti)
                        csv << format_double(table.sigmas[si]) << "," << format_double(table.taus[ti]) << ","
                            << format_double(table.ratios[si][ti]) << "," << table.failures[si] << "\n";
            } else if (ex_kind == "distance") {
                DistanceStatsParams params;
                auto stats = run_distance_stats(kind, ex_instances, config, params, threads);
                csv << "instance,class,distance_px\n";
                for (const auto& r : stats.rows) {
                    const char* cls = r.cls == StabilityClass::stable
                                          ? "stable"
                                          : (r.cls == StabilityClass::unstable ? "unstable" : "borderline");
                    csv << r.instance << "," << cls << "," << format_double(r.distance_px) << "\n";
                }
                std::cerr << "mean stable=" << stats.mean(StabilityClass::stable)
                          << " unstable=" << stats.mean(StabilityClass::unstable)
                          << " auc=" << stats.separation_auc() << " failures=" << stats.curve_failures << "\n";
            } else if (ex_kind == "curve-stability") {
                DistanceStatsParams params;
                auto res = run_curve_stability(kind, ex_instances, ex_sigma, config, params, threads);
                csv << "instance,abs_distance_difference_px\n";
                for (size_t i = 0; i < res.differences.size(); ++i)
                    csv << i << "," << format_double(res.differences[i]) << "\n";
                std::cerr << "median=" << res.median() << " failures=" << res.failures << "\n";
            } else {
                std::cerr << "experiment: unknown --kind " << ex_kind << "\n";
                return 1;
            }
            write_text(ex_out, csv.str());
            std::cout << ex_out << "\n";
        } else if (ransac->parsed()) {
            ProblemKind kind = parse_problem(rs_problem);
            auto pairs = load_pairs_csv(rs_pairs);
            auto K = parse_intrinsics(rs_intr);
            Intrinsics Kv = K ? *K : Intrinsics{};
            if (kind == ProblemKind::essential && !K)
                throw InvariantError("ransac: --intrinsics required for problem E");
            RansacConfig config;
            config.iterations = rs_iters;
            config.inlier_threshold_px2 = rs_thresh;
            config.filter_min_curve_distance = rs_filter;
            config.local_optimization = rs_lo;
            config.rng_seed = seed;
            std::optional<EpipolarModel> truth;
            if (!rs_truth.empty()) truth = epipolar_matrix(load_scene(rs_truth).scene);
            RansacResult res = run_ransac(pairs, kind, config, Kv, truth ? &*truth : nullptr);
            json j = model_to_json(res.best_model);
            j["inliers"] = res.inliers;
            j["hypotheses_scored"] = res.hypotheses_scored;
            write_text(rs_out, j.dump(2) + "\n");
            std::cout << rs_out << "\n";
            if (!rs_log.empty()) {
                std::ostringstream csv;
                csv << "iteration,inlier_count,curve_distance,model_error,filtered\n";
                for (const auto& h : res.log)
                    csv << h.iteration << "," << h.inlier_count << "," << format_double(h.curve_distance)
                        << "," << format_double(h.model_error) << "," << (h.filtered ? 1 : 0) << "\n";
                write_text(rs_log, csv.str());
                std::cout << rs_log << "\n";
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace epicond
