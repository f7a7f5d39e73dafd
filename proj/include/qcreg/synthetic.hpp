#pragma once

// Generators for synthetic registration problems: smooth warps of the unit
// square, landmark sets sampled from them, and analytic test rasters.

#include <qcreg/intensity.hpp>
#include <qcreg/lbs.hpp>
#include <qcreg/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace qcreg::synthetic {

using Warp = std::function<Vec2(const Vec2&)>;

///
/// Rotation about `center` by angle * exp(-r^2 / radius^2). A diffeomorphism
/// for any angle; the displacement vanishes away from the center.
///
inline Warp swirl(Vec2 center, double angle, double radius)
{
    return [=](const Vec2& p) {
        const Vec2 d = p - center;
        const double theta = angle * std::exp(-d.squaredNorm() / (radius * radius));
        const double c = std::cos(theta), s = std::sin(theta);
        return Vec2(center.x() + c * d.x() - s * d.y(), center.y() + s * d.x() + c * d.y());
    };
}

/// Translation by `shift` weighted by a Gaussian bump exp(-r^2 / radius^2) at `center`.
inline Warp bump(Vec2 center, Vec2 shift, double radius)
{
    return [=](const Vec2& p) {
        const double w = std::exp(-(p - center).squaredNorm() / (radius * radius));
        return Vec2(p + w * shift);
    };
}

/// Largest |warp(p) - p| over the given points.
inline double max_displacement(const Warp& warp, const std::vector<Vec2>& points)
{
    double m = 0.0;
    for (const auto& p : points) m = std::max(m, (warp(p) - p).norm());
    return m;
}

/// Landmarks at the given vertices with targets warp(vertex).
inline std::vector<Landmark> landmarks_from_warp(const TriMesh& mesh, const std::vector<int>& vertices, const Warp& warp)
{
    std::vector<Landmark> out;
    out.reserve(vertices.size());
    for (int v : vertices) out.push_back({v, warp(mesh.vertex(v))});
    return out;
}

/// Index of the grid vertex nearest to p on an n x n grid over the unit square.
inline int nearest_grid_vertex(int n, const Vec2& p)
{
    const int i = static_cast<int>(std::lround(std::clamp(p.x(), 0.0, 1.0) * (n - 1)));
    const int j = static_cast<int>(std::lround(std::clamp(p.y(), 0.0, 1.0) * (n - 1)));
    return j * n + i;
}

///
/// Landmark sites on concentric rings around (0.5, 0.5) of an n x n unit grid:
/// rings of radius 0.08 k (k = 1..rings) carrying 6 k sites each, snapped to
/// grid nodes and de-duplicated. rings = 4 gives 6 + 12 + 18 + 24 = 60 sites,
/// with 18 more on a fifth partial ring for 78 in total when count = 78.
///
inline std::vector<int> ring_sites(int n, std::size_t count)
{
    std::vector<int> sites;
    for (int k = 1; sites.size() < count && k < 7; ++k) {
        const double r = 0.08 * k;
        const int m = 6 * k;
        for (int s = 0; s < m && sites.size() < count; ++s) {
            const double phi = 2.0 * std::numbers::pi * (s + 0.5 * (k % 2)) / m;
            const int v = nearest_grid_vertex(n, Vec2(0.5 + r * std::cos(phi), 0.5 + r * std::sin(phi)));
            if (std::find(sites.begin(), sites.end(), v) == sites.end()) sites.push_back(v);
        }
    }
    return sites;
}

/// Landmark problem on an n x n grid of the unit square.
struct LandmarkCase {
    TriMesh mesh;
    ConstraintSet constraints;
    /// Largest landmark displacement |q_i - p_i|.
    double max_displacement = 0.0;
};

/// Landmarks at `sites` ring sites moved by a centred swirl, free rectangle boundary.
inline LandmarkCase swirl_case(int n, std::size_t sites, double angle, double radius = 0.4)
{
    LandmarkCase out{make_grid_mesh(n, n), {}, 0.0};
    out.constraints.boundary = BoundaryKind::RectangleFree;
    out.constraints.landmarks = landmarks_from_warp(out.mesh, ring_sites(n, sites), swirl({0.5, 0.5}, angle, radius));
    for (const auto& lm : out.constraints.landmarks)
        out.max_displacement = std::max(out.max_displacement, (lm.target - out.mesh.vertex(lm.vertex)).norm());
    return out;
}

/// Edge profile: 1 inside, 0 outside, linear over `soft` pixels across the signed distance 0.
inline double soft_step(double signed_distance, double soft)
{
    return std::clamp(0.5 - signed_distance / soft, 0.0, 1.0);
}

/// Bright disk on a dark background with a soft edge.
inline IntensityField disk_image(int width, int height, Vec2 center, double radius, double soft = 2.0)
{
    IntensityField img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) img(x, y) = soft_step((Vec2(x, y) - center).norm() - radius, soft);
    return img;
}

struct Segment {
    Vec2 a, b;
};

inline double segment_distance(const Vec2& p, const Segment& s)
{
    const Vec2 d = s.b - s.a;
    const double len2 = d.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - s.a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (p - (s.a + t * d)).norm();
}

/// Union of round-capped strokes of the given half width, bright on dark.
inline IntensityField stroke_image(int width, int height, const std::vector<Segment>& strokes, double half_width,
                                   double soft = 2.0)
{
    IntensityField img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double d = std::numeric_limits<double>::infinity();
            for (const auto& s : strokes) d = std::min(d, segment_distance(Vec2(x, y), s));
            img(x, y) = soft_step(d - half_width, soft);
        }
    return img;
}

/// Image pair with corresponding feature points in pixel coordinates.
struct ImagePair {
    IntensityField source;
    IntensityField target;
    std::vector<Vec2> source_points;
    std::vector<Vec2> target_points;
};

///
/// Disk of radius 12/64 of the side, centred at (28, 30)/64 of the side, and the
/// same disk translated by `shift` pixels. The four feature points are the
/// disk's axis extremes, rounded to pixel nodes.
///
inline ImagePair translated_disk(int size, Vec2 shift)
{
    const double s = (size - 1) / 64.0;
    const Vec2 c(std::round(28 * s), std::round(30 * s));
    const double r = std::round(12 * s);
    ImagePair out{disk_image(size, size, c, r), disk_image(size, size, c + shift, r), {}, {}};
    for (const Vec2 d : {Vec2(r, 0), Vec2(-r, 0), Vec2(0, r), Vec2(0, -r)}) {
        out.source_points.push_back(c + d);
        out.target_points.push_back(c + d + shift);
    }
    return out;
}

///
/// Block letters 'A' and 'R' on a 65 x 65 canvas (y pointing down) with eight
/// corresponding feature points: apex / top-left corner, the two feet, both
/// crossbar ends / bowl junctions, two points on the upper right stroke / bowl
/// (its midpoint / the top right corner, its lower end / the bowl extreme) and
/// the centre of the enclosed hole. Feature points sit on pixel centres.
///
inline ImagePair letter_pair_a_r(double half_width = 3.0)
{
    const Vec2 apex(32, 8), left_foot(18, 56), right_foot(46, 56);
    const Vec2 bar_l(24.5, 37), bar_r(39.5, 37);
    const std::vector<Segment> a{{left_foot, apex}, {apex, right_foot}, {bar_l, bar_r}};

    const Vec2 top_l(20, 8), stem_foot(20, 56), bowl_l(20, 32), bowl_r(34, 32), leg_foot(46, 56);
    const std::vector<Segment> r{{top_l, stem_foot},        {top_l, Vec2(36, 8)},     {Vec2(36, 8), Vec2(44, 15)},
                                 {Vec2(44, 15), Vec2(44, 25)}, {Vec2(44, 25), bowl_r}, {bowl_r, bowl_l},
                                 {bowl_r, leg_foot}};

    ImagePair out{stroke_image(65, 65, a, half_width), stroke_image(65, 65, r, half_width), {}, {}};
    out.source_points = {apex, left_foot, right_foot, Vec2(25, 37), Vec2(40, 37), Vec2(36, 23), Vec2(32, 29), Vec2(34, 15)};
    out.target_points = {top_l, stem_foot, leg_foot, bowl_l, bowl_r, Vec2(44, 20), Vec2(32, 20), Vec2(36, 8)};
    return out;
}

} // namespace qcreg::synthetic
