#pragma once

#include <qcreg/beltrami.hpp>
#include <qcreg/mesh.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace qcreg::test {

inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::path(QCREG_TEST_TMP) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Uniform sample of the disk of radius r.
inline Complex random_in_disk(std::mt19937_64& rng, double r)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::polar(r * std::sqrt(u(rng)), 2.0 * std::numbers::pi * u(rng));
}

inline BeltramiField random_mu(std::mt19937_64& rng, std::size_t n, double r, Support s = Support::Face)
{
    BeltramiField mu = BeltramiField::zeros(s, n);
    for (auto& z : mu.values) z = random_in_disk(rng, r);
    return mu;
}

/// Unit-square grid with interior vertices jittered by up to `amount` of a cell.
inline TriMesh jittered_grid(std::mt19937_64& rng, int n, double amount = 0.3)
{
    const TriMesh base = make_grid_mesh(n, n);
    std::uniform_real_distribution<double> u(-amount / (n - 1), amount / (n - 1));
    std::vector<Vec2> verts = base.vertices();
    for (std::size_t v = 0; v < verts.size(); ++v)
        if (!base.is_boundary(v)) verts[v] += Vec2(u(rng), u(rng));
    return TriMesh(verts, base.faces());
}

/// Patch of equilateral triangles with unit edges, n x n vertices.
inline TriMesh equilateral_patch(int n)
{
    std::vector<Vec2> verts;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) verts.emplace_back(i + 0.5 * j, j * std::sqrt(3.0) / 2.0);
    std::vector<Face> faces;
    for (int j = 0; j + 1 < n; ++j)
        for (int i = 0; i + 1 < n; ++i) {
            const int v = j * n + i;
            faces.push_back({v, v + 1, v + n});
            faces.push_back({v + 1, v + n + 1, v + n});
        }
    return TriMesh(verts, faces);
}

/// Arbitrary (not necessarily injective) map with positions displaced by up to `amp`.
inline PiecewiseLinearMap random_map(std::mt19937_64& rng, const TriMesh& mesh, double amp = 0.5)
{
    std::uniform_real_distribution<double> u(-amp, amp);
    PiecewiseLinearMap f = PiecewiseLinearMap::identity(mesh);
    for (auto& p : f.target) p += Vec2(u(rng), u(rng));
    return f;
}

///
/// Smooth diffeomorphism of the unit square: identity plus a few random sine
/// modes that vanish on the boundary, scaled so that J > 0 everywhere.
///
inline PiecewiseLinearMap smooth_random_map(std::mt19937_64& rng, const TriMesh& mesh, double amp = 0.04)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double pi = std::numbers::pi;
    double c[2][3][3];
    for (auto& comp : c)
        for (auto& row : comp)
            for (auto& x : row) x = u(rng);
    PiecewiseLinearMap f = PiecewiseLinearMap::identity(mesh);
    for (auto& p : f.target) {
        Vec2 d = Vec2::Zero();
        for (int comp = 0; comp < 2; ++comp)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    d[comp] += c[comp][k][l] * std::sin(pi * (k + 1) * p.x()) * std::sin(pi * (l + 1) * p.y()) /
                               ((k + 1) * (l + 1));
        p += amp * d;
    }
    return f;
}

} // namespace qcreg::test
