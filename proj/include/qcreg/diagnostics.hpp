#pragma once

#include <qcreg/beltrami.hpp>
#include <qcreg/errors.hpp>
#include <qcreg/lbs.hpp>
#include <qcreg/mesh.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace qcreg {

/// Faces whose image has non-positive signed area.
inline std::size_t count_flips(const TriMesh& mesh, const PiecewiseLinearMap& map)
{
    check_map(mesh, map);
    std::size_t flips = 0;
    for (const auto& tri : mesh.faces())
        if (!(cross2(map[tri[0]], map[tri[1]], map[tri[2]]) > 0.0)) ++flips;
    return flips;
}

/// max_i |f(p_i) - q_i| over the landmarks; 0 without landmarks.
inline double landmark_error(const PiecewiseLinearMap& map, const ConstraintSet& constraints)
{
    double err = 0.0;
    for (const auto& lm : constraints.landmarks) err = std::max(err, (map[lm.vertex] - lm.target).norm());
    return err;
}

struct QualityReport {
    std::size_t flip_count = 0;
    double max_mu = 0.0;
    /// Infinite when max_mu >= 1.
    double dilation_K = 1.0;
    double landmark_error = 0.0;
    std::optional<double> mismatch_relative;
    double wall_time = 0.0;

    bool operator==(const QualityReport&) const = default;
};

///
/// Aggregates flip count, dilation and landmark error of a map. Flipped or
/// collapsed faces make max_mu >= 1; the report then carries K = inf instead of
/// failing. mismatch_relative is filled by callers that have intensities.
///
inline QualityReport quality_report(const TriMesh& mesh, const PiecewiseLinearMap& map, const ConstraintSet& constraints,
                                    std::optional<double> mismatch_relative = std::nullopt, double wall_time = 0.0)
{
    QualityReport r;
    r.flip_count = count_flips(mesh, map);
    const auto grads = face_affine(mesh, map);
    for (const auto& g : grads) {
        const double fz = std::abs(dz(g));
        const double m = fz > kDegenerateModulus ? std::abs(dzbar(g)) / fz : std::numeric_limits<double>::infinity();
        r.max_mu = std::max(r.max_mu, m);
    }
    r.dilation_K = r.max_mu < 1.0 ? (1.0 + r.max_mu) / (1.0 - r.max_mu) : std::numeric_limits<double>::infinity();
    r.landmark_error = landmark_error(map, constraints);
    r.mismatch_relative = mismatch_relative;
    r.wall_time = wall_time;
    return r;
}

/// Machine-readable key=value form; doubles are written with round-trip precision.
inline std::string to_key_value(const QualityReport& r)
{
    std::ostringstream os;
    char buf[64];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << key << '=' << buf << '\n';
    };
    os << "flip_count=" << r.flip_count << '\n';
    put("max_mu", r.max_mu);
    put("dilation_K", r.dilation_K);
    put("landmark_error", r.landmark_error);
    if (r.mismatch_relative) put("mismatch_relative", *r.mismatch_relative);
    put("wall_time", r.wall_time);
    return os.str();
}

inline QualityReport parse_key_value_report(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("report: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw InputError("report: missing key " + key);
        return std::strtod(it->second.c_str(), nullptr);
    };
    QualityReport r;
    r.flip_count = static_cast<std::size_t>(get("flip_count"));
    r.max_mu = get("max_mu");
    r.dilation_K = get("dilation_K");
    r.landmark_error = get("landmark_error");
    if (kv.count("mismatch_relative")) r.mismatch_relative = get("mismatch_relative");
    r.wall_time = get("wall_time");
    return r;
}

/// Human-readable summary.
inline std::string to_text(const QualityReport& r)
{
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "flipped faces    : %zu\n", r.flip_count);
    os << buf;
    std::snprintf(buf, sizeof buf, "max |mu|         : %.6g\nmax dilation K   : %.6g\n", r.max_mu, r.dilation_K);
    os << buf;
    std::snprintf(buf, sizeof buf, "landmark error   : %.3e\n", r.landmark_error);
    os << buf;
    if (r.mismatch_relative) {
        std::snprintf(buf, sizeof buf, "mismatch (rel.)  : %.4f%%\n", 100.0 * *r.mismatch_relative);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "wall time        : %.3f s\n", r.wall_time);
    os << buf;
    return os.str();
}

} // namespace qcreg
