#pragma once

// OFF and OBJ readers/writers for planar triangle meshes, and the map CSV.

#include <qcreg/errors.hpp>
#include <qcreg/mesh.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace qcreg {

namespace detail {

inline std::string lowercase_extension(const std::string& path)
{
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline double parse_real(const std::string& tok, const std::string& where)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InputError(where + ": expected a number, got '" + tok + "'");
    }
}

inline long parse_integer(const std::string& tok, const std::string& where)
{
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InputError(where + ": expected an integer, got '" + tok + "'");
    }
}

inline std::vector<std::string> split_ws(const std::string& line)
{
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) out.push_back(tok);
    return out;
}

/// Polygon -> triangle fan.
inline void add_polygon(std::vector<Face>& faces, const std::vector<int>& poly, const std::string& where)
{
    if (poly.size() < 3) throw InputError(where + ": face with fewer than 3 vertices");
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

/// Rejects meshes with any z coordinate away from 0 (relative to the xy extent).
inline void check_planar(const std::vector<Vec2>& verts, const std::vector<double>& z, const std::string& path)
{
    double extent = 0.0;
    for (const auto& v : verts) extent = std::max({extent, std::abs(v.x()), std::abs(v.y())});
    for (std::size_t i = 0; i < z.size(); ++i)
        if (std::abs(z[i]) > 1e-12 * std::max(extent, 1.0))
            throw InputError(path + ": vertex " + std::to_string(i) + " has z = " + std::to_string(z[i]) +
                             "; only planar meshes are supported");
}

} // namespace detail

inline TriMesh read_off(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open mesh " + path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> linenos;
    std::string line;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto toks = detail::split_ws(line);
        if (toks.empty()) continue;
        rows.push_back(std::move(toks));
        linenos.push_back(n);
    }
    auto where = [&](std::size_t r) { return path + ":" + std::to_string(linenos[r]); };
    if (rows.empty() || rows[0][0] != "OFF") throw InputError(path + ": missing OFF header");
    std::size_t r = 0;
    std::vector<std::string> counts(rows[0].begin() + 1, rows[0].end());
    if (counts.empty()) {
        if (rows.size() < 2) throw InputError(path + ": missing OFF counts");
        counts = rows[++r];
    }
    if (counts.size() < 2) throw InputError(where(r) + ": expected vertex and face counts");
    const long nv = detail::parse_integer(counts[0], where(r));
    const long nf = detail::parse_integer(counts[1], where(r));
    if (nv < 0 || nf < 0) throw InputError(where(r) + ": negative element count");
    if (rows.size() < r + 1 + static_cast<std::size_t>(nv + nf)) throw InputError(path + ": truncated OFF file");

    std::vector<Vec2> verts;
    std::vector<double> z;
    for (long i = 0; i < nv; ++i) {
        const auto& t = rows[++r];
        if (t.size() < 2) throw InputError(where(r) + ": vertex needs x and y");
        verts.emplace_back(detail::parse_real(t[0], where(r)), detail::parse_real(t[1], where(r)));
        z.push_back(t.size() > 2 ? detail::parse_real(t[2], where(r)) : 0.0);
    }
    detail::check_planar(verts, z, path);

    std::vector<Face> faces;
    for (long i = 0; i < nf; ++i) {
        const auto& t = rows[++r];
        const long k = detail::parse_integer(t[0], where(r));
        if (k < 3 || t.size() < static_cast<std::size_t>(k) + 1) throw InputError(where(r) + ": malformed face");
        std::vector<int> poly;
        for (long j = 1; j <= k; ++j) {
            const long idx = detail::parse_integer(t[j], where(r));
            if (idx < 0 || idx >= nv) throw InputError(where(r) + ": vertex index out of range");
            poly.push_back(static_cast<int>(idx));
        }
        detail::add_polygon(faces, poly, where(r));
    }
    return TriMesh(std::move(verts), std::move(faces));
}

inline TriMesh read_obj(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open mesh " + path);
    std::vector<Vec2> verts;
    std::vector<double> z;
    std::vector<Face> faces;
    std::string line;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = detail::split_ws(line);
        if (t.empty()) continue;
        const std::string where = path + ":" + std::to_string(n);
        if (t[0] == "v") {
            if (t.size() < 3) throw InputError(where + ": vertex needs x and y");
            verts.emplace_back(detail::parse_real(t[1], where), detail::parse_real(t[2], where));
            z.push_back(t.size() > 3 ? detail::parse_real(t[3], where) : 0.0);
        } else if (t[0] == "f") {
            std::vector<int> poly;
            for (std::size_t j = 1; j < t.size(); ++j) {
                long idx = detail::parse_integer(t[j].substr(0, t[j].find('/')), where);
                idx = idx < 0 ? static_cast<long>(verts.size()) + idx : idx - 1;
                if (idx < 0 || idx >= static_cast<long>(verts.size()))
                    throw InputError(where + ": vertex index out of range");
                poly.push_back(static_cast<int>(idx));
            }
            detail::add_polygon(faces, poly, where);
        }
    }
    detail::check_planar(verts, z, path);
    return TriMesh(std::move(verts), std::move(faces));
}

/// Dispatches on the file extension (.off or .obj).
inline TriMesh read_mesh(const std::string& path)
{
    const std::string ext = detail::lowercase_extension(path);
    if (ext == ".off") return read_off(path);
    if (ext == ".obj") return read_obj(path);
    throw InputError(path + ": unknown mesh format (expected .off or .obj)");
}

inline void write_off(const std::string& path, std::span<const Vec2> verts, std::span<const Face> faces)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << "OFF\n" << verts.size() << ' ' << faces.size() << " 0\n";
    char buf[96];
    for (const auto& v : verts) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g 0\n", v.x(), v.y());
        os << buf;
    }
    for (const auto& f : faces) os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

inline void write_obj(const std::string& path, std::span<const Vec2> verts, std::span<const Face> faces)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    char buf[96];
    for (const auto& v : verts) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g 0\n", v.x(), v.y());
        os << buf;
    }
    for (const auto& f : faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void write_mesh(const std::string& path, std::span<const Vec2> verts, std::span<const Face> faces)
{
    const std::string ext = detail::lowercase_extension(path);
    if (ext == ".off") return write_off(path, verts, faces);
    if (ext == ".obj") return write_obj(path, verts, faces);
    throw InputError(path + ": unknown mesh format (expected .off or .obj)");
}

inline void write_mesh(const std::string& path, const TriMesh& mesh)
{
    write_mesh(path, mesh.vertices(), mesh.faces());
}

struct MapFile {
    PiecewiseLinearMap map;
    /// Value of the "# source_mesh:" header comment, empty when absent.
    std::string source_mesh;
};

/// CSV "vertex_index,x,y", preceded by "# source_mesh: <path>".
inline void write_map_csv(const std::string& path, const PiecewiseLinearMap& map, const std::string& source_mesh)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << "# source_mesh: " << source_mesh << "\nvertex_index,x,y\n";
    char buf[96];
    for (std::size_t v = 0; v < map.size(); ++v) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", v, map[v].x(), map[v].y());
        os << buf;
    }
}

inline MapFile read_map_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open map " + path);
    MapFile out;
    const std::string tag = "# source_mesh:";
    std::string line;
    for (std::size_t n = 1; std::getline(is, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind(tag, 0) == 0) {
            out.source_mesh = line.substr(tag.size());
            out.source_mesh.erase(0, out.source_mesh.find_first_not_of(' '));
            continue;
        }
        if (line.empty() || line[0] == '#' || line.rfind("vertex_index", 0) == 0) continue;
        std::size_t idx = 0;
        double x = 0.0, y = 0.0;
        char tail = 0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf%c", &idx, &x, &y, &tail) != 3 || idx != out.map.size())
            throw InputError(path + ":" + std::to_string(n) + ": malformed map row");
        out.map.target.emplace_back(x, y);
    }
    return out;
}

} // namespace qcreg
