#pragma once

// Job configuration (flat key=value), landmark CSV ingestion and the job runner
// behind the command-line tool.

#include <qcreg/beltrami.hpp>
#include <qcreg/diagnostics.hpp>
#include <qcreg/errors.hpp>
#include <qcreg/hybrid.hpp>
#include <qcreg/intensity.hpp>
#include <qcreg/landmark.hpp>
#include <qcreg/lbs.hpp>
#include <qcreg/mesh.hpp>
#include <qcreg/mesh_io.hpp>
#include <qcreg/render.hpp>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qcreg {

enum class JobMode { Landmark, Hybrid, Validate, Render };

struct JobConfig {
    JobMode mode = JobMode::Landmark;
    /// Mesh (.off/.obj), image (.pgm) or "grid:N" for an N x N grid over the unit square.
    std::string source;
    /// Target image (.pgm) for hybrid runs and for mismatch in validate mode.
    std::string target;
    std::string landmarks;
    /// Map CSV to validate or render; identity when empty.
    std::string map;
    BoundaryKind boundary = BoundaryKind::DirichletFull;
    HybridParams params;
    std::string output_dir = ".";
    /// Gridline spacing of the rendered grid in source units; 0 picks 1/16 of the larger extent.
    double grid_spacing = 0.0;
    int render_size = 512;
};

struct ConfigKey {
    const char* name;
    const char* help;
};

inline const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys{
        {"mode", "landmark | hybrid | validate | render"},
        {"source", "source mesh (.off/.obj), image (.pgm) or grid:N"},
        {"target", "target image (.pgm)"},
        {"landmarks", "landmark CSV: sx,sy,tx,ty or vertex_index,tx,ty"},
        {"map", "map CSV (vertex_index,x,y) for validate/render"},
        {"boundary", "dirichlet | rectangle_free"},
        {"output_dir", "directory for artifacts"},
        {"alpha", "conformality weight"},
        {"p", "conformality exponent (energy report only)"},
        {"gamma", "landmark splitting weight"},
        {"step_t", "descent step in (0, 1]"},
        {"epsilon", "stopping threshold on max |nu_{n+1} - nu_n|"},
        {"max_iters", "iteration cap per level"},
        {"clamp_delta", "coefficients are clamped to |mu| <= 1 - clamp_delta"},
        {"smoothing_form", "variational | literal"},
        {"gamma_i", "intensity weight"},
        {"sigma", "hybrid splitting weight"},
        {"demon_noise", "noise term of the demon force"},
        {"demon_smoothing", "Gaussian sigma (pixels) applied to the demon field"},
        {"max_backtracks", "step halvings per hybrid iteration"},
        {"pyramid_levels", "coarsening steps of the hybrid pyramid"},
        {"grid_spacing", "rendered gridline spacing (0 = automatic)"},
        {"render_size", "longer side of the rendered grid raster"},
    };
    return keys;
}

/// Reads "key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> read_key_value_file(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open config " + path);
    std::map<std::string, std::string> out;
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(n) + ": expected key = value");
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

///
/// Builds a validated configuration from key/value pairs; unknown keys and
/// out-of-range parameters are input errors.
///
inline JobConfig job_config_from(const std::map<std::string, std::string>& kv)
{
    JobConfig cfg;
    for (const auto& [key, value] : kv) {
        const std::string where = "config key '" + key + "'";
        auto real = [&] { return detail::parse_real(value, where); };
        auto integer = [&] { return static_cast<int>(detail::parse_integer(value, where)); };
        if (key == "mode") {
            if (value == "landmark") cfg.mode = JobMode::Landmark;
            else if (value == "hybrid") cfg.mode = JobMode::Hybrid;
            else if (value == "validate") cfg.mode = JobMode::Validate;
            else if (value == "render") cfg.mode = JobMode::Render;
            else throw InputError(where + ": unknown mode '" + value + "'");
        } else if (key == "source") cfg.source = value;
        else if (key == "target") cfg.target = value;
        else if (key == "landmarks") cfg.landmarks = value;
        else if (key == "map") cfg.map = value;
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "boundary") {
            if (value == "dirichlet") cfg.boundary = BoundaryKind::DirichletFull;
            else if (value == "rectangle_free") cfg.boundary = BoundaryKind::RectangleFree;
            else throw InputError(where + ": unknown boundary '" + value + "'");
        } else if (key == "smoothing_form") {
            if (value == "variational") cfg.params.smoothing_form = SmoothingForm::Variational;
            else if (value == "literal") cfg.params.smoothing_form = SmoothingForm::Literal;
            else throw InputError(where + ": unknown smoothing form '" + value + "'");
        } else if (key == "alpha") cfg.params.alpha = real();
        else if (key == "p") cfg.params.p = real();
        else if (key == "gamma") cfg.params.gamma = real();
        else if (key == "step_t") cfg.params.step_t = real();
        else if (key == "epsilon") cfg.params.epsilon = real();
        else if (key == "max_iters") cfg.params.max_iters = integer();
        else if (key == "clamp_delta") cfg.params.clamp_delta = real();
        else if (key == "gamma_i") cfg.params.gamma_i = real();
        else if (key == "sigma") cfg.params.sigma = real();
        else if (key == "demon_noise") cfg.params.demon_noise = real();
        else if (key == "demon_smoothing") cfg.params.demon_smoothing = real();
        else if (key == "max_backtracks") cfg.params.max_backtracks = integer();
        else if (key == "pyramid_levels") cfg.params.pyramid_levels = integer();
        else if (key == "grid_spacing") cfg.grid_spacing = real();
        else if (key == "render_size") cfg.render_size = integer();
        else throw InputError("unknown config key '" + key + "'");
    }
    // Landmark runs keep the landmark defaults for alpha unless it is given.
    if (cfg.mode != JobMode::Hybrid && !kv.contains("alpha")) cfg.params.alpha = RegistrationParams{}.alpha;
    cfg.params.validate();
    if (cfg.grid_spacing < 0.0) throw InputError("grid_spacing must be >= 0");
    if (cfg.render_size < 2) throw InputError("render_size must be >= 2");
    return cfg;
}

struct LandmarkPair {
    int vertex = -1;
    Vec2 target = Vec2::Zero();
    /// Distance from the given source point to the vertex it snapped to; 0 for index rows.
    double snap_distance = 0.0;
    std::size_t line = 0;
};

///
/// Landmark CSV with rows "sx,sy,tx,ty" (source point, snapped to the nearest
/// vertex) or "vertex_index,tx,ty". Blank lines, '#' comments and a
/// non-numeric header row are skipped.
///
inline std::vector<LandmarkPair> load_landmarks(const std::string& path, const TriMesh& mesh)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open landmarks " + path);
    std::vector<LandmarkPair> out;
    std::map<int, std::size_t> seen;
    std::string line;
    bool first_row = true;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) {
            const auto b = cell.find_first_not_of(" \t\r"), e = cell.find_last_not_of(" \t\r");
            cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        }
        const bool header = first_row && !cells.empty() && !cells[0].empty() &&
                            (std::isalpha(static_cast<unsigned char>(cells[0][0])) || cells[0][0] == '_');
        first_row = false;
        if (header) continue;

        const std::string where = path + ":" + std::to_string(n);
        LandmarkPair lp;
        lp.line = n;
        if (cells.size() == 4) {
            const Vec2 p(detail::parse_real(cells[0], where), detail::parse_real(cells[1], where));
            lp.target = Vec2(detail::parse_real(cells[2], where), detail::parse_real(cells[3], where));
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
                const double d = (mesh.vertex(v) - p).squaredNorm();
                if (d < best) {
                    best = d;
                    lp.vertex = static_cast<int>(v);
                }
            }
            lp.snap_distance = std::sqrt(best);
        } else if (cells.size() == 3) {
            const long v = detail::parse_integer(cells[0], where);
            if (v < 0 || v >= static_cast<long>(mesh.vertex_count()))
                throw InputError(where + ": vertex index " + cells[0] + " out of range");
            lp.vertex = static_cast<int>(v);
            lp.target = Vec2(detail::parse_real(cells[1], where), detail::parse_real(cells[2], where));
        } else {
            throw InputError(where + ": expected 3 or 4 comma-separated fields, got " + std::to_string(cells.size()));
        }
        if (const auto it = seen.find(lp.vertex); it != seen.end())
            throw InputError(where + ": source vertex " + std::to_string(lp.vertex) + " already used on line " +
                             std::to_string(it->second));
        seen.emplace(lp.vertex, n);
        out.push_back(lp);
    }
    return out;
}

inline std::vector<Landmark> to_landmarks(const std::vector<LandmarkPair>& pairs)
{
    std::vector<Landmark> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back({p.vertex, p.target});
    return out;
}

/// Writes "vertex_index,tx,ty" rows, readable by load_landmarks.
inline void write_landmarks_csv(const std::string& path, const std::vector<Landmark>& landmarks)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << "vertex_index,tx,ty\n";
    char buf[96];
    for (const auto& lm : landmarks) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", lm.vertex, lm.target.x(), lm.target.y());
        os << buf;
    }
}

struct JobOutcome {
    int exit_code = 0;
    /// "ok", "input" or "numerical".
    std::string category = "ok";
    std::string message;
    std::optional<QualityReport> report;
};

namespace detail {

inline bool is_image_path(const std::string& path) { return lowercase_extension(path) == ".pgm"; }

struct JobDomain {
    TriMesh mesh;
    std::optional<IntensityField> image;
};

inline JobDomain load_domain(const std::string& source)
{
    if (source.empty()) throw InputError("no source given");
    if (source.rfind("grid:", 0) == 0) {
        const long n = parse_integer(source.substr(5), "source '" + source + "'");
        if (n < 2 || n > 4096) throw InputError("grid size must be in [2, 4096]");
        return {make_grid_mesh(static_cast<int>(n), static_cast<int>(n)), std::nullopt};
    }
    if (is_image_path(source)) {
        IntensityField img = read_pgm(source);
        if (img.width() < 2 || img.height() < 2) throw InputError(source + ": image must be at least 2x2");
        TriMesh mesh = make_image_mesh(img.width(), img.height());
        return {std::move(mesh), std::move(img)};
    }
    try {
        return {read_mesh(source), std::nullopt};
    } catch (const DegenerateFaceError& e) {
        throw InputError(source + ": " + e.what());
    }
}

inline double auto_spacing(const TriMesh& mesh)
{
    const auto& b = mesh.bounds();
    return std::max(b.width(), b.height()) / 16.0;
}

/// Grid rendering over the union of the source bounds and the mapped bounds.
inline void write_grid_render(const std::string& path, const TriMesh& mesh, const PiecewiseLinearMap& map,
                              const JobConfig& cfg)
{
    BoundingBox view = mesh.bounds();
    for (const auto& q : map.target) {
        view.min = view.min.cwiseMin(q);
        view.max = view.max.cwiseMax(q);
    }
    const double extent = std::max(view.width(), view.height());
    const int w = std::max(2, static_cast<int>(std::lround(cfg.render_size * view.width() / extent)));
    const int h = std::max(2, static_cast<int>(std::lround(cfg.render_size * view.height() / extent)));
    const double spacing = cfg.grid_spacing > 0.0 ? cfg.grid_spacing : auto_spacing(mesh);
    write_pgm(path, render_deformed_grid(mesh, map, spacing, w, h, view));
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << text;
}

} // namespace detail

///
/// Runs one job and writes its artifacts into cfg.output_dir:
///   landmark  map.csv, deformed.off, nu.csv, trace.csv, grid.pgm, report.txt
///   hybrid    the same plus warped.pgm
///   validate  report.txt
///   render    grid.pgm, plus warped.pgm for image sources
/// Input errors give exit code 2, numerical failures 3. The quality report is
/// also printed to `log`.
///
inline JobOutcome run_job(const JobConfig& cfg, std::ostream& log = std::cout)
{
    namespace fs = std::filesystem;
    JobOutcome outcome;
    try {
        cfg.params.validate();
        const auto t0 = std::chrono::steady_clock::now();
        auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) throw InputError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
        auto out = [&](const char* name) { return (fs::path(cfg.output_dir) / name).string(); };

        detail::JobDomain dom = detail::load_domain(cfg.source);
        const TriMesh& mesh = dom.mesh;
        ConstraintSet cs;
        cs.boundary = cfg.boundary;
        if (!cfg.landmarks.empty()) {
            const auto pairs = load_landmarks(cfg.landmarks, mesh);
            double max_snap = 0.0;
            for (const auto& p : pairs) max_snap = std::max(max_snap, p.snap_distance);
            log << "landmarks: " << pairs.size() << " (max snap distance " << max_snap << ")\n";
            cs.landmarks = to_landmarks(pairs);
        }

        std::optional<IntensityField> target;
        if (!cfg.target.empty()) target = read_pgm(cfg.target);
        if (target && dom.image && (target->width() != dom.image->width() || target->height() != dom.image->height()))
            throw InputError("source and target images differ in size");

        auto finish = [&](const PiecewiseLinearMap& map, std::optional<double> mismatch) {
            QualityReport report = quality_report(mesh, map, cs, mismatch, elapsed());
            detail::write_text(out("report.txt"), to_key_value(report));
            log << to_text(report);
            outcome.report = report;
        };
        auto write_common = [&](const RegistrationResult& r) {
            write_map_csv(out("map.csv"), r.map, cfg.source);
            write_mesh(out("deformed.off"), r.map.target, mesh.faces());
            write_beltrami_csv(out("nu.csv"), r.nu);
            detail::write_grid_render(out("grid.pgm"), mesh, r.map, cfg);
        };

        switch (cfg.mode) {
        case JobMode::Landmark: {
            const RegistrationResult r = register_landmarks(mesh, cs, cfg.params);
            write_common(r);
            write_trace_csv(out("trace.csv"), r.energy_trace);
            finish(r.map, std::nullopt);
            break;
        }
        case JobMode::Hybrid: {
            if (!dom.image) throw InputError("hybrid mode needs a .pgm source image");
            if (!target) throw InputError("hybrid mode needs a .pgm target image");
            const HybridResult r = register_hybrid(mesh, *dom.image, *target, cs, cfg.params);
            write_common(r);
            write_trace_csv(out("trace.csv"), r.energy_trace, true);
            write_pgm(out("warped.pgm"), warp_image(*dom.image, mesh, r.map).image);
            finish(r.map, r.mismatch.relative);
            break;
        }
        case JobMode::Validate:
        case JobMode::Render: {
            PiecewiseLinearMap map = PiecewiseLinearMap::identity(mesh);
            if (!cfg.map.empty()) map = read_map_csv(cfg.map).map;
            check_map(mesh, map);
            if (cfg.mode == JobMode::Validate) {
                std::optional<double> mismatch;
                if (dom.image && target) mismatch = intensity_mismatch(*dom.image, *target, mesh, map).relative;
                finish(map, mismatch);
            } else {
                detail::write_grid_render(out("grid.pgm"), mesh, map, cfg);
                if (dom.image) {
                    const WarpedImage w = warp_image(*dom.image, mesh, map);
                    write_pgm(out("warped.pgm"), w.image);
                    log << "warped image: " << w.uncovered << " uncovered pixels\n";
                }
            }
            break;
        }
        }
    } catch (const InputError& e) {
        outcome = {2, "input", e.what(), std::nullopt};
    } catch (const NumericalError& e) {
        outcome = {3, "numerical", e.what(), std::nullopt};
    }
    return outcome;
}

} // namespace qcreg
