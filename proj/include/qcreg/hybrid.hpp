#pragma once

#include <qcreg/beltrami.hpp>
#include <qcreg/diagnostics.hpp>
#include <qcreg/errors.hpp>
#include <qcreg/intensity.hpp>
#include <qcreg/landmark.hpp>
#include <qcreg/lbs.hpp>
#include <qcreg/mesh.hpp>
#include <qcreg/smoothing.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace qcreg {

struct HybridParams : RegistrationParams {
    HybridParams() { alpha = 0.01; }

    /// Weight of the intensity descent direction.
    double gamma_i = 1.0;
    /// Splitting weight between mu and the smoothed nu, held constant. The
    /// update mu + sigma dmu2 = (1 - 2 sigma) mu + 2 sigma nu overshoots for sigma > 1/2.
    double sigma = 0.25;
    /// Noise term of the demon-force denominator.
    double demon_noise = 1.0;
    /// Number of coarsening steps; 0 registers at full resolution only.
    int pyramid_levels = 3;
    /// Standard deviation, in pixels, of the Gaussian applied to the demon field; 0 disables it.
    double demon_smoothing = 1.0;
    /// Halvings of the update tried before a level stops for lack of descent.
    int max_backtracks = 4;

    void validate() const
    {
        RegistrationParams::validate();
        if (!(gamma_i > 0.0)) throw InputError("gamma_i must be > 0");
        if (!(sigma > 0.0)) throw InputError("sigma must be > 0");
        if (!(demon_noise > 0.0)) throw InputError("demon_noise must be > 0");
        if (pyramid_levels < 0) throw InputError("pyramid_levels must be >= 0");
        if (!(demon_smoothing >= 0.0)) throw InputError("demon_smoothing must be >= 0");
        if (max_backtracks < 0) throw InputError("max_backtracks must be >= 0");
    }
};

///
/// Symmetric demon displacement at one point:
///   u = diff grad2 / (|grad2|^2 + k^2 diff^2) + diff grad1 / (|grad1|^2 + k^2 diff^2),
/// diff = i1 - i2, k = demon_noise. A term with zero denominator contributes zero.
///
inline Vec2 demon_displacement(double i1, double i2, const Vec2& grad1, const Vec2& grad2, double demon_noise)
{
    const double diff = i1 - i2;
    const double noise = demon_noise * demon_noise * diff * diff;
    Vec2 u = Vec2::Zero();
    const double d2 = grad2.squaredNorm() + noise;
    if (d2 > 0.0) u += diff * grad2 / d2;
    const double d1 = grad1.squaredNorm() + noise;
    if (d1 > 0.0) u += diff * grad1 / d1;
    return u;
}

/// Demon force at every vertex v, comparing i1 at v with i2 at f(v).
inline std::vector<Vec2> demon_force(const IntensityField& i1, const IntensityField& i2, const TriMesh& mesh,
                                     const PiecewiseLinearMap& map, double demon_noise)
{
    check_map(mesh, map);
    if (!(demon_noise > 0.0)) throw InputError("demon_noise must be > 0");
    std::vector<Vec2> u(mesh.vertex_count());
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const Vec2& p = mesh.vertex(v);
        const Vec2& q = map[v];
        u[v] = demon_displacement(i1.sample(p), i2.sample(q), i1.gradient(p), i2.gradient(q), demon_noise);
    }
    return u;
}

///
/// Separable Gaussian filter of a vector field stored on a width x height
/// raster (index y * width + x), with clamped borders.
///
inline std::vector<Vec2> gaussian_smooth(std::span<const Vec2> field, int width, int height, double sigma)
{
    if (field.size() != static_cast<std::size_t>(width) * height)
        throw InputError("field does not match its raster");
    std::vector<Vec2> out(field.begin(), field.end());
    if (!(sigma > 0.0)) return out;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) total += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    for (auto& w : kernel) w /= total;
    std::vector<Vec2> tmp(out.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            Vec2 acc = Vec2::Zero();
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * out[static_cast<std::size_t>(y) * width + std::clamp(x + k, 0, width - 1)];
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            Vec2 acc = Vec2::Zero();
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, height - 1)) * width + x];
            out[static_cast<std::size_t>(y) * width + x] = acc;
        }
    return out;
}

/// Beltrami coefficient of Id + u over the triangles spanned by `positions`.
inline BeltramiField demon_beltrami(std::span<const Vec2> positions, std::span<const Face> faces,
                                    std::span<const Vec2> u)
{
    if (u.size() != positions.size()) throw InputError("displacement size does not match vertex count");
    std::vector<Vec2> moved(positions.size());
    for (std::size_t v = 0; v < positions.size(); ++v) moved[v] = positions[v] + u[v];
    const auto grads = face_affine(positions, faces, moved);
    BeltramiField mu = BeltramiField::zeros(Support::Face, faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Complex fz = dz(grads[f]);
        const Complex fzb = dzbar(grads[f]);
        mu[f] = std::abs(fz) < kDegenerateModulus ? (std::abs(fzb) > 0.0 ? fzb / std::abs(fzb) : Complex(0.0))
                                                  : fzb / fz;
    }
    return mu;
}

inline BeltramiField demon_beltrami(const TriMesh& mesh, std::span<const Vec2> u)
{
    return demon_beltrami(mesh.vertices(), mesh.faces(), u);
}

struct Mismatch {
    double absolute = 0.0;
    double relative = 0.0;
};

///
/// sum_v w_v (I1(v) - I2(f(v)))^2 with w_v one third of the incident face area,
/// and the same sum divided by sum_v w_v I1(v)^2.
///
inline Mismatch intensity_mismatch(const IntensityField& i1, const IntensityField& i2, const TriMesh& mesh,
                                   const PiecewiseLinearMap& map)
{
    check_map(mesh, map);
    std::vector<double> weight(mesh.vertex_count(), 0.0);
    for (std::size_t f = 0; f < mesh.face_count(); ++f)
        for (int v : mesh.face(f)) weight[v] += mesh.area(f) / 3.0;
    Mismatch m;
    double norm = 0.0;
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const double a = i1.sample(mesh.vertex(v));
        const double diff = a - i2.sample(map[v]);
        m.absolute += weight[v] * diff * diff;
        norm += weight[v] * a * a;
    }
    m.relative = norm > 0.0 ? m.absolute / norm : (m.absolute > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return m;
}

///
/// Level 0 is the input; level j + 1 has ceil(w / 2) x ceil(h / 2) pixels, each
/// the mean of the (up to) 2x2 block of level j pixels it covers.
///
inline std::vector<IntensityField> build_pyramid(const IntensityField& img, int levels)
{
    if (levels < 0) throw InputError("pyramid depth must be >= 0");
    const int need = (1 << levels) + 1;
    if (img.width() < need || img.height() < need)
        throw InputError("raster " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                         " too small for " + std::to_string(levels) + " pyramid levels");
    std::vector<IntensityField> out{img};
    for (int l = 0; l < levels; ++l) {
        const IntensityField& fine = out.back();
        const int w = (fine.width() + 1) / 2, h = (fine.height() + 1) / 2;
        IntensityField coarse(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double sum = 0.0;
                int count = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int fx = 2 * x + dx, fy = 2 * y + dy;
                        if (fx < fine.width() && fy < fine.height()) {
                            sum += fine(fx, fy);
                            ++count;
                        }
                    }
                coarse(x, y) = sum / count;
            }
        }
        out.push_back(std::move(coarse));
    }
    return out;
}

///
/// Carries a map on a coarse image grid to the next finer grid: coarse node
/// (i, j) coincides with fine node (2i, 2j), and f_fine(x) = 2 f_coarse(x / 2)
/// with f_coarse interpolated bilinearly (linearly extrapolated past the last
/// coarse node when the fine size is even).
///
inline PiecewiseLinearMap prolongate_map(const PiecewiseLinearMap& coarse, int coarse_w, int coarse_h, int fine_w,
                                         int fine_h)
{
    if (coarse.size() != static_cast<std::size_t>(coarse_w) * coarse_h)
        throw InputError("coarse map does not match its grid");
    if ((fine_w + 1) / 2 != coarse_w || (fine_h + 1) / 2 != coarse_h || coarse_w < 2 || coarse_h < 2)
        throw InputError("grid mismatch: " + std::to_string(fine_w) + "x" + std::to_string(fine_h) +
                         " is not the parent of " + std::to_string(coarse_w) + "x" + std::to_string(coarse_h));
    PiecewiseLinearMap fine;
    fine.target.resize(static_cast<std::size_t>(fine_w) * fine_h);
    auto at = [&](int i, int j) -> const Vec2& { return coarse[static_cast<std::size_t>(j) * coarse_w + i]; };
    for (int y = 0; y < fine_h; ++y) {
        const double cy = 0.5 * y;
        const int j0 = std::min(static_cast<int>(cy), coarse_h - 2);
        const double ty = cy - j0;
        for (int x = 0; x < fine_w; ++x) {
            const double cx = 0.5 * x;
            const int i0 = std::min(static_cast<int>(cx), coarse_w - 2);
            const double tx = cx - i0;
            const Vec2 v = (1 - ty) * ((1 - tx) * at(i0, j0) + tx * at(i0 + 1, j0)) +
                           ty * ((1 - tx) * at(i0, j0 + 1) + tx * at(i0 + 1, j0 + 1));
            fine[static_cast<std::size_t>(y) * fine_w + x] = 2.0 * v;
        }
    }
    return fine;
}

///
/// Constraints for a coarser image grid: landmark sources snap to the nearest
/// coarse node, which keeps the displacement scaled by 1 / 2^level. Landmarks that collide after
/// snapping, or that would contradict the coarse boundary condition, are dropped
/// at that level; the finest level always keeps them all.
///
inline ConstraintSet coarsen_constraints(const ConstraintSet& fine, const TriMesh& fine_mesh, int fine_w,
                                         const TriMesh& coarse_mesh, int coarse_w, int coarse_h, int level)
{
    const double scale = std::ldexp(1.0, -level);
    ConstraintSet out;
    out.boundary = fine.boundary;
    if (fine.dirichlet_values) {
        std::vector<Vec2> by_vertex(fine_mesh.vertex_count());
        for (std::size_t v = 0; v < fine_mesh.vertex_count(); ++v) by_vertex[v] = fine_mesh.vertex(v);
        const auto& fb = fine_mesh.boundary_vertices();
        for (std::size_t b = 0; b < fb.size(); ++b) by_vertex[fb[b]] = (*fine.dirichlet_values)[b];
        const int fine_h = static_cast<int>(fine_mesh.vertex_count()) / fine_w;
        std::vector<Vec2> values;
        for (int v : coarse_mesh.boundary_vertices()) {
            const int i = v % coarse_w, j = v / coarse_w;
            const int fi = std::min(i << level, fine_w - 1), fj = std::min(j << level, fine_h - 1);
            values.push_back(scale * by_vertex[static_cast<std::size_t>(fj) * fine_w + fi]);
        }
        out.dirichlet_values = std::move(values);
    }
    const ResolvedConstraints boundary_only = resolve_constraints(coarse_mesh, ConstraintSet{out.boundary, out.dirichlet_values, {}});
    const double tol = 1e-9 * std::max(coarse_w, coarse_h);
    std::vector<char> taken(coarse_mesh.vertex_count(), 0);
    for (const auto& lm : fine.landmarks) {
        const Vec2 p = scale * fine_mesh.vertex(lm.vertex);
        const int i = std::clamp(static_cast<int>(std::lround(p.x())), 0, coarse_w - 1);
        const int j = std::clamp(static_cast<int>(std::lround(p.y())), 0, coarse_h - 1);
        const int v = j * coarse_w + i;
        const Vec2 q = coarse_mesh.vertex(v) + scale * (lm.target - fine_mesh.vertex(lm.vertex));
        bool ok = !taken[v];
        for (int c = 0; c < 2 && ok; ++c)
            if (boundary_only.fixed[c][v] && std::abs(boundary_only.value[c][v] - q[c]) > tol) ok = false;
        if (!ok) continue;
        taken[v] = 1;
        out.landmarks.push_back({v, q});
    }
    return out;
}

struct HybridResult : RegistrationResult {
    Mismatch mismatch;
    /// Iterations spent on each pyramid level, coarsest first.
    std::vector<int> level_iterations;
};

///
/// Landmark and intensity matching registration, coarse to fine.
///
/// On every level, with mu the coefficient of the current map f and nu its
/// smoothed companion:
///   u        = demon force of (I1, I2 o f) at the vertices, Gaussian filtered
///   dmu1     = compose(f, mu(Id + u)) - mu(f)
///   dmu2     = -2 (mu - nu)
///   mu~      = clamp(mu + s (gamma_i dmu1 + sigma dmu2))
///   f        = LBS(mu~),  mu' = mu(f)
///   nu       = smooth(mu', alpha, sigma), then nu += t (mu(LBS(nu)) - nu)
/// The step s starts at 1 and is halved (up to max_backtracks times) until the
/// new map has no more flips and no larger mismatch than the current one; a
/// level ends when no step qualifies or max |mu' - mu| < epsilon. Otherwise the
/// level keeps its best iterate. The finer level starts from the prolongated
/// coarse map, re-solved through LBS so that its constraints hold exactly.
///
inline HybridResult register_hybrid(const TriMesh& mesh, const IntensityField& i1, const IntensityField& i2,
                                    const ConstraintSet& constraints, const HybridParams& params)
{
    params.validate();
    if (i1.width() != i2.width() || i1.height() != i2.height())
        throw InputError("source and target images differ in size");
    if (mesh.vertex_count() != i1.size()) throw InputError("mesh is not the image grid of the source raster");
    resolve_constraints(mesh, constraints);

    const auto pyr1 = build_pyramid(i1, params.pyramid_levels);
    const auto pyr2 = build_pyramid(i2, params.pyramid_levels);
    const double delta = params.clamp_delta;

    HybridResult result;
    PiecewiseLinearMap f;
    int prev_w = 0, prev_h = 0;

    for (int level = params.pyramid_levels; level >= 0; --level) {
        const IntensityField& a = pyr1[level];
        const IntensityField& b = pyr2[level];
        const bool finest = level == 0;
        const TriMesh level_mesh = finest ? mesh : make_image_mesh(a.width(), a.height());
        const ConstraintSet level_cs =
            finest ? constraints
                   : coarsen_constraints(constraints, mesh, i1.width(), level_mesh, a.width(), a.height(), level);

        LinearBeltramiSolver lbs(level_mesh, level_cs);
        CoefficientSmoother smoother(level_mesh, params.alpha, params.sigma, params.smoothing_form);

        BeltramiField mu;
        BeltramiField nu;
        if (level == params.pyramid_levels) {
            f = lbs.solve(BeltramiField::zeros(Support::Face, level_mesh.face_count()));
            mu = beltrami_or_clamped(level_mesh, f, delta);
            nu = BeltramiField::zeros(Support::Vertex, level_mesh.vertex_count());
        } else {
            const PiecewiseLinearMap init = prolongate_map(f, prev_w, prev_h, a.width(), a.height());
            f = lbs.solve(beltrami_or_clamped(level_mesh, init, delta));
            mu = beltrami_or_clamped(level_mesh, f, delta);
            nu = face_to_vertex(level_mesh, mu);
        }

        auto record = [&](int it) {
            TraceRow row;
            row.iteration = it;
            row.level = level;
            row.energy = energy_lm(level_mesh, nu, params.alpha, params.p);
            row.landmark_error = landmark_error(f, level_cs);
            row.max_mu = mu.max_abs();
            row.flips = count_flips(level_mesh, f);
            row.mismatch = intensity_mismatch(a, b, level_mesh, f).relative;
            result.energy_trace.push_back(row);
            return row;
        };
        TraceRow row = record(0);

        PiecewiseLinearMap best_f = f;
        BeltramiField best_nu = nu;
        std::size_t best_flips = row.flips;
        double best_mismatch = row.mismatch;
        bool converged = false;
        int steps = 0;
        for (int it = 1; it <= params.max_iters; ++it) {
            const std::vector<Vec2> u = gaussian_smooth(demon_force(a, b, level_mesh, f, params.demon_noise),
                                                        a.width(), a.height(), params.demon_smoothing);
            const BeltramiField mu_d = clamp_to_disk(demon_beltrami(f.target, level_mesh.faces(), u), delta);
            const BeltramiField composed = compose_beltrami(level_mesh, f, mu_d);
            const BeltramiField nu_faces = vertex_to_face(level_mesh, nu);

            std::vector<Complex> direction(mu.size());
            for (std::size_t t = 0; t < mu.size(); ++t)
                direction[t] = params.gamma_i * (composed[t] - mu[t]) - params.sigma * 2.0 * (mu[t] - nu_faces[t]);

            bool accepted = false;
            double step = 1.0;
            for (int attempt = 0; attempt <= params.max_backtracks && !accepted; ++attempt, step *= 0.5) {
                BeltramiField mu_tilde = mu;
                for (std::size_t t = 0; t < mu.size(); ++t) mu_tilde[t] += step * direction[t];
                PiecewiseLinearMap candidate = lbs.solve(clamp_to_disk(std::move(mu_tilde), delta));
                const std::size_t flips = count_flips(level_mesh, candidate);
                const double mismatch = intensity_mismatch(a, b, level_mesh, candidate).relative;
                if (flips <= row.flips && mismatch <= row.mismatch) {
                    f = std::move(candidate);
                    accepted = true;
                }
            }
            if (!accepted) {
                converged = true;
                break;
            }
            BeltramiField mu_next = beltrami_or_clamped(level_mesh, f, delta);

            nu = clamp_to_disk(smoother.apply(face_to_vertex(level_mesh, mu_next)), delta);
            const PiecewiseLinearMap f_tilde = lbs.solve(vertex_to_face(level_mesh, nu));
            const BeltramiField mu_f_tilde = face_to_vertex(level_mesh, beltrami_or_clamped(level_mesh, f_tilde, delta));
            for (std::size_t v = 0; v < nu.size(); ++v) nu[v] += params.step_t * (mu_f_tilde[v] - nu[v]);
            nu = clamp_to_disk(std::move(nu), delta);

            const double change = max_abs_difference(mu_next, mu);
            mu = std::move(mu_next);
            row = record(it);
            steps = it;
            if (row.flips < best_flips || (row.flips == best_flips && row.mismatch <= best_mismatch)) {
                best_flips = row.flips;
                best_mismatch = row.mismatch;
                best_f = f;
                best_nu = nu;
            }
            if (change < params.epsilon) {
                converged = true;
                break;
            }
        }
        result.level_iterations.push_back(steps);
        if (!converged) {
            f = std::move(best_f);
            nu = std::move(best_nu);
        }
        if (finest) {
            result.converged = converged;
            result.iterations = result.level_iterations.back();
            result.nu = nu;
        }
        prev_w = a.width();
        prev_h = a.height();
    }

    result.map = std::move(f);
    result.flip_count = count_flips(mesh, result.map);
    result.landmark_error = landmark_error(result.map, constraints);
    result.mismatch = intensity_mismatch(i1, i2, mesh, result.map);
    return result;
}

} // namespace qcreg
