#pragma once

#include <qcreg/errors.hpp>
#include <qcreg/intensity.hpp>
#include <qcreg/mesh.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace qcreg {

///
/// Raster of the images of the gridlines x = x0 + k s and y = y0 + k s of the
/// source domain (x0, y0 its lower corner), drawn with value 1 on 0. Each line
/// is clipped to every triangle and its piece mapped affinely. Pixel (i, j)
/// shows the point view.min + (i, j) * (view extent) / (size - 1); the view
/// defaults to the bounding box of the source mesh.
///
inline IntensityField render_deformed_grid(const TriMesh& mesh, const PiecewiseLinearMap& map, double spacing,
                                           int width, int height, std::optional<BoundingBox> view = std::nullopt)
{
    check_map(mesh, map);
    if (!(spacing > 0.0)) throw InputError("grid spacing must be > 0");
    if (width < 2 || height < 2) throw InputError("render size must be at least 2x2");
    const BoundingBox box = view.value_or(mesh.bounds());
    if (!(box.width() > 0.0 && box.height() > 0.0)) throw InputError("empty render view");
    const Vec2 origin = mesh.bounds().min;
    const double sx = (width - 1) / box.width(), sy = (height - 1) / box.height();

    IntensityField out(width, height);
    auto draw = [&](const Vec2& p, const Vec2& q) {
        const Vec2 a((p.x() - box.min.x()) * sx, (p.y() - box.min.y()) * sy);
        const Vec2 b((q.x() - box.min.x()) * sx, (q.y() - box.min.y()) * sy);
        const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * (b - a).lpNorm<Eigen::Infinity>())));
        for (int s = 0; s <= steps; ++s) {
            const Vec2 c = a + (b - a) * (static_cast<double>(s) / steps);
            const long x = std::lround(c.x()), y = std::lround(c.y());
            if (x >= 0 && y >= 0 && x < width && y < height) out(static_cast<int>(x), static_cast<int>(y)) = 1.0;
        }
    };

    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const Face& tri = mesh.face(f);
        const std::array<Vec2, 3> src{mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])};
        const std::array<Vec2, 3> dst{map[tri[0]], map[tri[1]], map[tri[2]]};
        for (int axis = 0; axis < 2; ++axis) {
            double lo = src[0][axis], hi = lo;
            for (const auto& p : src) {
                lo = std::min(lo, p[axis]);
                hi = std::max(hi, p[axis]);
            }
            for (long k = static_cast<long>(std::ceil((lo - origin[axis]) / spacing - 1e-9));
                 origin[axis] + k * spacing <= hi + 1e-9 * spacing; ++k) {
                const double level = origin[axis] + k * spacing;
                // Points of the triangle boundary on the line, as mapped positions.
                std::vector<Vec2> hits;
                for (int e = 0; e < 3; ++e) {
                    const int i = e, j = (e + 1) % 3;
                    const double di = src[i][axis] - level, dj = src[j][axis] - level;
                    if (di == dj) {
                        if (di == 0.0) draw(dst[i], dst[j]);
                        continue;
                    }
                    if ((di < 0.0 && dj < 0.0) || (di > 0.0 && dj > 0.0)) continue;
                    const double t = di / (di - dj);
                    hits.push_back(dst[i] + t * (dst[j] - dst[i]));
                }
                if (hits.size() >= 2) draw(hits.front(), hits.back());
            }
        }
    }
    return out;
}

struct WarpedImage {
    IntensityField image;
    /// Output pixels not covered by any mapped triangle (left at 0).
    std::size_t uncovered = 0;
};

///
/// Backward warp of i1 through the map: every mapped triangle is rasterized and
/// each covered pixel takes i1 at the barycentrically pulled-back source point.
/// Mesh and map coordinates are pixel coordinates of i1 and of the output.
///
inline WarpedImage warp_image(const IntensityField& i1, const TriMesh& mesh, const PiecewiseLinearMap& map,
                              int out_width = 0, int out_height = 0)
{
    check_map(mesh, map);
    if (out_width <= 0) out_width = i1.width();
    if (out_height <= 0) out_height = i1.height();
    WarpedImage out{IntensityField(out_width, out_height), 0};
    std::vector<char> covered(out.image.size(), 0);
    constexpr double kInsideTol = 1e-9;

    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const Face& tri = mesh.face(f);
        const Vec2 &q0 = map[tri[0]], &q1 = map[tri[1]], &q2 = map[tri[2]];
        const double det = cross2(q0, q1, q2);
        if (std::abs(det) < 1e-300) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({q0.x(), q1.x(), q2.x()}))));
        const int x1 = std::min(out_width - 1, static_cast<int>(std::ceil(std::max({q0.x(), q1.x(), q2.x()}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({q0.y(), q1.y(), q2.y()}))));
        const int y1 = std::min(out_height - 1, static_cast<int>(std::ceil(std::max({q0.y(), q1.y(), q2.y()}))));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Vec2 p(x, y);
                const double l0 = cross2(p, q1, q2) / det, l1 = cross2(q0, p, q2) / det, l2 = 1.0 - l0 - l1;
                if (l0 < -kInsideTol || l1 < -kInsideTol || l2 < -kInsideTol) continue;
                const Vec2 src = l0 * mesh.vertex(tri[0]) + l1 * mesh.vertex(tri[1]) + l2 * mesh.vertex(tri[2]);
                out.image(x, y) = i1.sample(src);
                covered[static_cast<std::size_t>(y) * out_width + x] = 1;
            }
    }
    out.uncovered = static_cast<std::size_t>(std::count(covered.begin(), covered.end(), 0));
    return out;
}

} // namespace qcreg
