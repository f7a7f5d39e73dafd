// Acceptance gate: one PASS/FAIL line per primary criterion; exit status is the
// number of failed criteria.

#include <qcreg/beltrami.hpp>
#include <qcreg/diagnostics.hpp>
#include <qcreg/hybrid.hpp>
#include <qcreg/landmark.hpp>
#include <qcreg/lbs.hpp>
#include <qcreg/smoothing.hpp>
#include <qcreg/synthetic.hpp>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace qcreg;

namespace {

int failures = 0;

void report(const char* name, bool pass, const std::string& detail)
{
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <class... Args>
std::string format(const char* fmt, Args... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Complex random_in_disk(std::mt19937_64& rng, double r)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::polar(r * std::sqrt(u(rng)), 2.0 * std::numbers::pi * u(rng));
}

TriMesh jittered_grid(std::mt19937_64& rng, int n)
{
    const TriMesh base = make_grid_mesh(n, n);
    std::uniform_real_distribution<double> u(-0.3 / (n - 1), 0.3 / (n - 1));
    std::vector<Vec2> verts = base.vertices();
    for (std::size_t v = 0; v < verts.size(); ++v)
        if (!base.is_boundary(v)) verts[v] += Vec2(u(rng), u(rng));
    return TriMesh(verts, base.faces());
}

/// Identity plus random boundary-vanishing sine modes.
PiecewiseLinearMap smooth_random_map(std::mt19937_64& rng, const TriMesh& mesh, double amp)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double c[2][3][3];
    for (auto& comp : c)
        for (auto& row : comp)
            for (auto& x : row) x = u(rng);
    PiecewiseLinearMap f = PiecewiseLinearMap::identity(mesh);
    const double pi = std::numbers::pi;
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

ConstraintSet pixel_landmarks(int width, const synthetic::ImagePair& pair)
{
    ConstraintSet cs;
    cs.boundary = BoundaryKind::RectangleFree;
    for (std::size_t k = 0; k < pair.source_points.size(); ++k) {
        const Vec2& p = pair.source_points[k];
        cs.landmarks.push_back({static_cast<int>(std::lround(p.y()) * width + std::lround(p.x())), pair.target_points[k]});
    }
    return cs;
}

void bijectivity()
{
    struct Case {
        const char* name;
        std::size_t sites;
        double angle;
        double lo, hi;
    };
    const Case cases[] = {{"tiny", 12, 0.14, 0.0, 0.02}, {"moderate", 24, 0.9, 0.14, 0.16}, {"large", 78, 2.6, 0.38, 0.42}};
    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        const auto lc = synthetic::swirl_case(65, c.sites, c.angle);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = register_landmarks(lc.mesh, lc.constraints, {});
        const double dt = seconds_since(t0);
        const bool ok = r.flip_count == 0 && r.landmark_error < 1e-9 && dt < 30.0 &&
                        lc.max_displacement >= c.lo && lc.max_displacement <= c.hi;
        pass = pass && ok;
        detail += format("%s%s %zu landmarks, displacement %.3f: flips %zu, landmark error %.1e, %.2f s",
                         detail.empty() ? "" : "; ", c.name, lc.constraints.landmarks.size(), lc.max_displacement,
                         r.flip_count, r.landmark_error, dt);
    }
    report("Bijectivity", pass, detail);
}

void lbs_reconstruction()
{
    std::mt19937_64 rng(2024);
    const TriMesh m = make_grid_mesh(17, 17);
    double worst = 0.0;
    bool flip_free = true;
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = smooth_random_map(rng, m, 0.04);
        flip_free = flip_free && count_flips(m, g) == 0;
        ConstraintSet cs;
        std::vector<Vec2> values;
        for (int v : m.boundary_vertices()) values.push_back(g[v]);
        cs.dirichlet_values = values;
        const auto f = solve_lbs(m, beltrami_from_map(m, g), cs);
        for (std::size_t v = 0; v < f.size(); ++v) worst = std::max(worst, (f[v] - g[v]).norm());
    }
    report("LBS reconstruction", flip_free && worst < 1e-6,
           format("10 smooth flip-free maps on 17x17, max vertex error %.2e (< 1e-6)", worst));
}

void diffeomorphism_identity()
{
    std::mt19937_64 rng(7);
    const TriMesh m = make_grid_mesh(17, 17);
    LinearBeltramiSolver lbs(m, {});
    int folded = 0;
    std::size_t worst_flips = 0;
    double identity_error = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        BeltramiField mu = BeltramiField::zeros(Support::Face, m.face_count());
        for (auto& z : mu.values) z = random_in_disk(rng, 0.95);
        const auto f = lbs.solve(mu);
        const auto grads = face_affine(m, f);
        const auto jac = jacobian(m, f);
        std::size_t flips = 0;
        for (std::size_t t = 0; t < grads.size(); ++t) {
            const Complex fz = dz(grads[t]);
            const double mu_f2 = std::norm(dzbar(grads[t])) / std::norm(fz);
            const double err = std::abs(jac[t] - std::norm(fz) * (1.0 - mu_f2)) / std::max(1.0, std::norm(fz));
            identity_error = std::max(identity_error, err);
            if (!(jac[t] > 0.0)) ++flips;
        }
        if (flips > 0) ++folded;
        worst_flips = std::max(worst_flips, flips);
    }
    report("Diffeomorphism identity", folded == 0 && identity_error < 1e-10,
           format("1000 i.i.d. per-face mu with |mu| <= 0.95 on 17x17: J > 0 on all faces in %d/1000 solves "
                  "(worst %zu of %zu faces flipped); J = |f_z|^2 (1 - |mu_f|^2) max error %.1e (< 1e-10)",
                  1000 - folded, worst_flips, m.face_count(), identity_error));
}

void energy_descent()
{
    const auto lc = synthetic::swirl_case(65, 24, 0.9);
    const auto r = register_landmarks(lc.mesh, lc.constraints, {});
    const auto& t = r.energy_trace;
    double worst_rise = 0.0;
    for (std::size_t i = 3; i < t.size(); ++i) worst_rise = std::max(worst_rise, t[i].energy - t[i - 1].energy);
    report("Energy descent", r.converged && r.iterations <= 200 && worst_rise <= 1e-8,
           format("moderate case: converged %s after %d iterations, E %.6g -> %.6g, largest rise from iteration 2 "
                  "on %.1e (<= 1e-8)",
                  r.converged ? "yes" : "no", r.iterations, t[2].energy, t.back().energy, worst_rise));
}

void hybrid_accuracy()
{
    const auto disk = synthetic::translated_disk(65, Vec2(8, 6));
    const TriMesh mesh = make_image_mesh(65, 65);
    auto t0 = std::chrono::steady_clock::now();
    const auto rd = register_hybrid(mesh, disk.source, disk.target, pixel_landmarks(65, disk), {});
    const double td = seconds_since(t0);

    const auto letters = synthetic::letter_pair_a_r();
    t0 = std::chrono::steady_clock::now();
    const auto rl = register_hybrid(mesh, letters.source, letters.target, pixel_landmarks(65, letters), {});
    const double tl = seconds_since(t0);

    const bool disk_ok = rd.mismatch.relative < 0.01 && rd.flip_count == 0 && td < 60.0;
    const bool letters_ok = rl.mismatch.relative < 0.05 && rl.landmark_error < 1e-9 && tl < 60.0;
    report("Hybrid accuracy", disk_ok && letters_ok,
           format("disk (4 landmarks, 3 levels): mismatch %.3f%% (< 1%%), flips %zu, %.2f s; letters (8 landmarks): "
                  "mismatch %.2f%% (< 5%%), landmark error %.1e, flips %zu, %.2f s",
                  100.0 * rd.mismatch.relative, rd.flip_count, td, 100.0 * rl.mismatch.relative, rl.landmark_error,
                  rl.flip_count, tl));
}

void operator_sanity()
{
    std::mt19937_64 rng(99);
    const TriMesh m = jittered_grid(rng, 17);
    const auto lap = cot_laplacian(m).matrix;
    const double row_sum = (lap * Eigen::VectorXd::Ones(lap.rows())).cwiseAbs().maxCoeff();

    std::vector<Vec2> verts;
    std::vector<Face> faces;
    const int n = 6;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) verts.emplace_back(i + 0.5 * j, j * std::sqrt(3.0) / 2.0);
    for (int j = 0; j + 1 < n; ++j)
        for (int i = 0; i + 1 < n; ++i) {
            const int v = j * n + i;
            faces.push_back({v, v + 1, v + n});
            faces.push_back({v + 1, v + n + 1, v + n});
        }
    const TriMesh eq(verts, faces);
    const auto eq_lap = cot_laplacian(eq);
    double eq_error = 0.0;
    for (const auto& [edge, adj] : eq.edges())
        if (adj[1] >= 0) eq_error = std::max(eq_error, std::abs(eq_lap.weight(edge.first, edge.second) - 1.0 / std::sqrt(3.0)));

    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto dc = divergence_coeffs(m);
    double div_error = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        PiecewiseLinearMap s;
        for (std::size_t v = 0; v < m.vertex_count(); ++v) s.target.emplace_back(u(rng), 0.0);
        std::vector<Vec2> field;
        for (const auto& g : face_affine(m, s)) field.emplace_back(-g.b, g.a);
        const auto div = discrete_divergence(dc, field);
        for (std::size_t v = 0; v < m.vertex_count(); ++v)
            if (!m.is_boundary(v)) div_error = std::max(div_error, std::abs(div[v]));
    }

    BeltramiField mu = BeltramiField::zeros(Support::Face, 1000);
    for (auto& z : mu.values) z = random_in_disk(rng, 0.95);
    const auto a = alpha_coeffs(mu);
    int spd = 0;
    for (std::size_t t = 0; t < mu.size(); ++t) {
        Eigen::Matrix2d mat;
        mat << a.a1[t], a.a2[t], a.a2[t], a.a3[t];
        if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(mat).eigenvalues().minCoeff() > 0.0) ++spd;
    }
    report("Operator sanity", row_sum < 1e-10 && eq_error <= 1e-12 && div_error < 1e-10 && spd == 1000,
           format("cot row sums %.1e, equilateral weight error %.1e, Div(-D_y u, D_x u) %.1e over 100 fields, "
                  "SPD alpha matrices %d/1000",
                  row_sum, eq_error, div_error, spd));
}

void smoothing_limits()
{
    std::mt19937_64 rng(5);
    const TriMesh m = jittered_grid(rng, 17);
    double closed_form = 0.0;
    for (const auto [alpha, gamma] : {std::pair{0.0, 1.0}, {1.0, 1.0}, {1.0, 10.0}, {0.5, 3.0}}) {
        BeltramiField c = BeltramiField::zeros(Support::Vertex, m.vertex_count());
        for (auto& z : c.values) z = Complex(0.4, -0.1);
        for (const auto& z : smooth_coefficient(m, c, alpha, gamma).values)
            closed_form = std::max(closed_form, std::abs(z - Complex(0.4, -0.1) * gamma / (alpha + gamma)));
    }
    BeltramiField target = BeltramiField::zeros(Support::Vertex, m.vertex_count());
    for (auto& z : target.values) z = random_in_disk(rng, 0.9);
    std::vector<double> errors;
    for (double gamma : {1.0, 10.0, 100.0, 1000.0})
        errors.push_back(max_abs_difference(smooth_coefficient(m, target, 1.0, gamma), target));
    const bool monotone = errors[1] < errors[0] && errors[2] < errors[1] && errors[3] < errors[2];
    report("Smoothing limits", closed_form < 1e-10 && monotone && errors[3] < 0.01,
           format("constant closed form error %.1e; |nu - mu| at gamma 1, 10, 100, 1000: %.3g, %.3g, %.3g, %.3g",
                  closed_form, errors[0], errors[1], errors[2], errors[3]));
}

} // namespace

int main()
{
    const std::pair<const char*, std::function<void()>> criteria[] = {
        {"Bijectivity", bijectivity},
        {"LBS reconstruction", lbs_reconstruction},
        {"Diffeomorphism identity", diffeomorphism_identity},
        {"Energy descent", energy_descent},
        {"Hybrid accuracy", hybrid_accuracy},
        {"Operator sanity", operator_sanity},
        {"Smoothing limits", smoothing_limits},
    };
    for (const auto& [name, run] : criteria) {
        try {
            run();
        } catch (const std::exception& e) {
            report(name, false, std::string("exception: ") + e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
    return failures;
}
