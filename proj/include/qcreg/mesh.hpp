#pragma once

#include <qcreg/errors.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qcreg {

using Vec2 = Eigen::Vector2d;
using Face = std::array<int, 3>;

/// Twice the signed area of the triangle (p0, p1, p2); positive when counter-clockwise.
inline double cross2(const Vec2& p0, const Vec2& p1, const Vec2& p2)
{
    return (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
}

struct BoundingBox {
    Vec2 min{0.0, 0.0};
    Vec2 max{0.0, 0.0};

    double width() const { return max.x() - min.x(); }
    double height() const { return max.y() - min.y(); }
    double area() const { return width() * height(); }
};

///
/// Planar triangulation with counter-clockwise faces.
///
/// Construction validates the connectivity: indices in range, no degenerate
/// triangles (area below 1e-12 of the bounding-box area), and every edge shared
/// by at most two faces. Clockwise input faces are re-oriented by swapping two
/// indices; the number of such repairs is available from flipped_input_faces().
///
class TriMesh {
public:
    TriMesh() = default;

    TriMesh(std::vector<Vec2> vertices, std::vector<Face> faces)
        : m_vertices(std::move(vertices)), m_faces(std::move(faces))
    {
        validate();
    }

    std::size_t vertex_count() const { return m_vertices.size(); }
    std::size_t face_count() const { return m_faces.size(); }

    const std::vector<Vec2>& vertices() const { return m_vertices; }
    const std::vector<Face>& faces() const { return m_faces; }
    const Vec2& vertex(std::size_t v) const { return m_vertices[v]; }
    const Face& face(std::size_t f) const { return m_faces[f]; }

    double area(std::size_t f) const { return m_areas[f]; }
    double total_area() const
    {
        double sum = 0.0;
        for (double a : m_areas) sum += a;
        return sum;
    }

    /// Faces incident to vertex v, in ascending face order.
    std::span<const int> star(std::size_t v) const
    {
        return {m_star_faces.data() + m_star_offsets[v],
                m_star_faces.data() + m_star_offsets[v + 1]};
    }

    bool is_boundary(std::size_t v) const { return m_is_boundary[v] != 0; }
    const std::vector<int>& boundary_vertices() const { return m_boundary; }

    const BoundingBox& bounds() const { return m_bounds; }
    std::size_t flipped_input_faces() const { return m_flipped_input; }

    /// Undirected edges (i < j) with the faces on either side; second face is -1 on the boundary.
    const std::map<std::pair<int, int>, std::array<int, 2>>& edges() const { return m_edges; }

private:
    void validate()
    {
        const auto n = static_cast<int>(m_vertices.size());
        if (m_faces.empty()) throw InputError("mesh has no faces");

        m_bounds.min = m_bounds.max = m_vertices.empty() ? Vec2::Zero() : m_vertices.front();
        for (const auto& p : m_vertices) {
            if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
                throw InputError("mesh has a non-finite vertex coordinate");
            m_bounds.min = m_bounds.min.cwiseMin(p);
            m_bounds.max = m_bounds.max.cwiseMax(p);
        }
        const double min_area = 1e-12 * std::max(m_bounds.area(), 1e-300);

        m_areas.resize(m_faces.size());
        for (std::size_t f = 0; f < m_faces.size(); ++f) {
            auto& tri = m_faces[f];
            for (int idx : tri) {
                if (idx < 0 || idx >= n)
                    throw InputError("face " + std::to_string(f) + " references vertex " +
                                     std::to_string(idx) + " out of range");
            }
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
                throw DegenerateFaceError("face repeats a vertex", f);
            double twice = cross2(m_vertices[tri[0]], m_vertices[tri[1]], m_vertices[tri[2]]);
            if (twice < 0.0) {
                std::swap(tri[1], tri[2]);
                twice = -twice;
                ++m_flipped_input;
            }
            if (0.5 * twice < min_area) throw DegenerateFaceError("degenerate triangle", f);
            m_areas[f] = 0.5 * twice;
        }

        // Directed edges must be unique once faces are consistently oriented.
        for (std::size_t f = 0; f < m_faces.size(); ++f) {
            const auto& tri = m_faces[f];
            for (int k = 0; k < 3; ++k) {
                int a = tri[k], b = tri[(k + 1) % 3];
                auto key = std::minmax(a, b);
                auto [it, inserted] =
                    m_edges.try_emplace({key.first, key.second}, std::array<int, 2>{static_cast<int>(f), -1});
                if (!inserted) {
                    if (it->second[1] != -1)
                        throw InputError("non-manifold edge (" + std::to_string(key.first) + ", " +
                                         std::to_string(key.second) + ") shared by more than two faces");
                    it->second[1] = static_cast<int>(f);
                }
            }
        }

        m_is_boundary.assign(m_vertices.size(), 0);
        for (const auto& [edge, adj] : m_edges) {
            if (adj[1] == -1) {
                m_is_boundary[edge.first] = 1;
                m_is_boundary[edge.second] = 1;
            }
        }
        for (int v = 0; v < n; ++v)
            if (m_is_boundary[v]) m_boundary.push_back(v);

        m_star_offsets.assign(m_vertices.size() + 1, 0);
        for (const auto& tri : m_faces)
            for (int idx : tri) ++m_star_offsets[idx + 1];
        for (std::size_t v = 0; v < m_vertices.size(); ++v) m_star_offsets[v + 1] += m_star_offsets[v];
        m_star_faces.resize(m_star_offsets.back());
        std::vector<std::size_t> cursor(m_star_offsets.begin(), m_star_offsets.end() - 1);
        for (std::size_t f = 0; f < m_faces.size(); ++f)
            for (int idx : m_faces[f]) m_star_faces[cursor[idx]++] = static_cast<int>(f);
    }

    std::vector<Vec2> m_vertices;
    std::vector<Face> m_faces;
    std::vector<double> m_areas;
    std::vector<std::size_t> m_star_offsets;
    std::vector<int> m_star_faces;
    std::vector<char> m_is_boundary;
    std::vector<int> m_boundary;
    std::map<std::pair<int, int>, std::array<int, 2>> m_edges;
    BoundingBox m_bounds;
    std::size_t m_flipped_input = 0;
};

///
/// Regular triangulation of [x0, x1] x [y0, y1] with nx by ny vertices.
/// Vertex (i, j) has index j * nx + i; each cell is split along its
/// (i, j)-(i+1, j+1) diagonal.
///
inline TriMesh make_grid_mesh(int nx, int ny, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0,
                              double y1 = 1.0)
{
    if (nx < 2 || ny < 2) throw InputError("grid mesh needs at least 2x2 vertices");
    std::vector<Vec2> verts;
    verts.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            verts.emplace_back(x0 + (x1 - x0) * i / (nx - 1), y0 + (y1 - y0) * j / (ny - 1));
    std::vector<Face> faces;
    faces.reserve(2 * static_cast<std::size_t>(nx - 1) * (ny - 1));
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            int v00 = j * nx + i, v10 = v00 + 1, v01 = v00 + nx, v11 = v01 + 1;
            faces.push_back({v00, v10, v11});
            faces.push_back({v00, v11, v01});
        }
    }
    return TriMesh(std::move(verts), std::move(faces));
}

/// Per-vertex image positions f(v_i) of a piecewise-linear map on a TriMesh.
struct PiecewiseLinearMap {
    std::vector<Vec2> target;

    static PiecewiseLinearMap identity(const TriMesh& mesh) { return {mesh.vertices()}; }

    std::size_t size() const { return target.size(); }
    const Vec2& operator[](std::size_t v) const { return target[v]; }
    Vec2& operator[](std::size_t v) { return target[v]; }
};

inline void check_map(const TriMesh& mesh, const PiecewiseLinearMap& map)
{
    if (map.size() != mesh.vertex_count())
        throw InputError("map has " + std::to_string(map.size()) + " positions but mesh has " +
                         std::to_string(mesh.vertex_count()) + " vertices");
}

/// Real derivatives of the map restricted to one face: a = u_x, b = u_y, c = v_x, d = v_y.
struct FaceAffine {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;

    double jacobian() const { return a * d - b * c; }
};

///
/// Per-face derivatives of a piecewise-linear map.
///
/// Solves the 2x2 edge-difference system
///   [v1 - v0; v2 - v0] (D_x f, D_y f)^T = (f(v1) - f(v0), f(v2) - f(v0))
/// for both components. Rows are not normalized by edge length; the solution
/// is the same. `domain` and `image` hold one position per vertex.
///
inline std::vector<FaceAffine> face_affine(std::span<const Vec2> domain, std::span<const Face> faces,
                                           std::span<const Vec2> image)
{
    std::vector<FaceAffine> out(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& tri = faces[f];
        const Vec2 e1 = domain[tri[1]] - domain[tri[0]];
        const Vec2 e2 = domain[tri[2]] - domain[tri[0]];
        const double det = e1.x() * e2.y() - e1.y() * e2.x();
        if (!(std::abs(det) > 0.0)) throw DegenerateFaceError("degenerate triangle", f);
        const Vec2 du = image[tri[1]] - image[tri[0]];
        const Vec2 dv = image[tri[2]] - image[tri[0]];
        // inverse of [[e1x, e1y], [e2x, e2y]] applied to (du, dv)
        auto solve = [&](double r1, double r2) {
            return Vec2((e2.y() * r1 - e1.y() * r2) / det, (-e2.x() * r1 + e1.x() * r2) / det);
        };
        const Vec2 gu = solve(du.x(), dv.x());
        const Vec2 gv = solve(du.y(), dv.y());
        out[f] = {gu.x(), gu.y(), gv.x(), gv.y()};
    }
    return out;
}

inline std::vector<FaceAffine> face_affine(const TriMesh& mesh, const PiecewiseLinearMap& map)
{
    check_map(mesh, map);
    return face_affine(mesh.vertices(), mesh.faces(), map.target);
}

///
/// Gradient weights of the hat functions on every face.
///
/// For face T = [v_i, v_j, v_k] with v = g + i h, the weights are
///   A_i = (h_j - h_k) / (2 Area(T)),  B_i = (g_k - g_j) / (2 Area(T))
/// (and cyclically), so that D_x s = sum A_I s_I and D_y s = sum B_I s_I for any
/// vertex field s. The discrete divergence pairs these weights with the face area.
///
struct DivergenceCoeffs {
    struct FaceWeights {
        std::array<double, 3> A{};
        std::array<double, 3> B{};
        double area = 0.0;
    };

    std::size_t vertex_count = 0;
    std::vector<Face> faces;
    std::vector<FaceWeights> weights;
};

inline DivergenceCoeffs divergence_coeffs(const TriMesh& mesh)
{
    DivergenceCoeffs out;
    out.vertex_count = mesh.vertex_count();
    out.faces = mesh.faces();
    out.weights.resize(mesh.face_count());
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const auto& tri = mesh.face(f);
        const double area = mesh.area(f);
        if (!(area > 0.0)) throw DegenerateFaceError("degenerate triangle", f);
        auto& w = out.weights[f];
        w.area = area;
        for (int k = 0; k < 3; ++k) {
            const Vec2& pj = mesh.vertex(tri[(k + 1) % 3]);
            const Vec2& pk = mesh.vertex(tri[(k + 2) % 3]);
            w.A[k] = (pj.y() - pk.y()) / (2.0 * area);
            w.B[k] = (pk.x() - pj.x()) / (2.0 * area);
        }
    }
    return out;
}

///
/// Discrete divergence of a per-face vector field:
///   Div(V)(v_i) = sum_{T in N_i} Area(T) (A_i^T V_1(T) + B_i^T V_2(T)).
/// With the area factor the rotated gradient (-D_y u, D_x u) of any vertex field
/// has zero divergence at interior vertices of an arbitrary mesh.
///
inline std::vector<double> discrete_divergence(const DivergenceCoeffs& coeffs, std::span<const Vec2> field)
{
    if (field.size() != coeffs.faces.size())
        throw InputError("field has " + std::to_string(field.size()) + " entries but mesh has " +
                         std::to_string(coeffs.faces.size()) + " faces");
    std::vector<double> out(coeffs.vertex_count, 0.0);
    for (std::size_t f = 0; f < coeffs.faces.size(); ++f) {
        const auto& w = coeffs.weights[f];
        for (int k = 0; k < 3; ++k)
            out[coeffs.faces[f][k]] += w.area * (w.A[k] * field[f].x() + w.B[k] * field[f].y());
    }
    return out;
}

} // namespace qcreg
