#pragma once

#include <qcreg/beltrami.hpp>
#include <qcreg/diagnostics.hpp>
#include <qcreg/errors.hpp>
#include <qcreg/lbs.hpp>
#include <qcreg/mesh.hpp>
#include <qcreg/smoothing.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace qcreg {

struct RegistrationParams {
    /// Weight of the alpha * int |nu|^p conformality term.
    double alpha = 1.0;
    /// Exponent of the conformality term; only the energy report uses p != 2.
    double p = 2.0;
    /// Splitting weight coupling nu to mu(f), held constant.
    double gamma = 10.0;
    /// Fixed step of the nu <- nu + t d correction.
    double step_t = 0.5;
    /// Stop once max_v |nu_{n+1}(v) - nu_n(v)| < epsilon.
    double epsilon = 1e-4;
    int max_iters = 200;
    double clamp_delta = 0.02;
    SmoothingForm smoothing_form = SmoothingForm::Variational;

    void validate() const
    {
        if (!(alpha >= 0.0)) throw InputError("alpha must be >= 0");
        if (!(p >= 1.0)) throw InputError("p must be >= 1");
        if (!(gamma > 0.0)) throw InputError("gamma must be > 0");
        if (!(step_t > 0.0 && step_t <= 1.0)) throw InputError("step_t must be in (0, 1]");
        if (!(epsilon > 0.0)) throw InputError("epsilon must be > 0");
        if (max_iters < 1) throw InputError("max_iters must be >= 1");
        if (!(clamp_delta > 0.0 && clamp_delta < 1.0)) throw InputError("clamp_delta must be in (0, 1)");
    }
};

struct TraceRow {
    int iteration = 0;
    double energy = 0.0;
    double landmark_error = 0.0;
    double max_mu = 0.0;
    std::size_t flips = 0;
    /// Relative intensity mismatch; NaN for landmark-only runs.
    double mismatch = std::numeric_limits<double>::quiet_NaN();
    /// Pyramid level, 0 being the finest.
    int level = 0;
};

struct RegistrationResult {
    PiecewiseLinearMap map;
    BeltramiField nu;
    std::vector<TraceRow> energy_trace;
    std::size_t flip_count = 0;
    double landmark_error = 0.0;
    int iterations = 0;
    bool converged = false;
};

///
/// Discrete E_LM of a per-vertex coefficient:
///   sum_T Area(T) |grad_T nu|^2 + alpha sum_T Area(T) |nu(T)|^p,
/// with grad_T from the piecewise-linear interpolant of Re nu and Im nu and
/// nu(T) the mean of the three vertex values.
///
inline double energy_lm(const TriMesh& mesh, const BeltramiField& nu, double alpha, double p)
{
    if (nu.support != Support::Vertex || nu.size() != mesh.vertex_count())
        throw InputError("energy_lm expects one value per vertex");
    if (!(p >= 1.0)) throw InputError("energy_lm: p must be >= 1");
    PiecewiseLinearMap as_map;
    as_map.target.resize(nu.size());
    for (std::size_t v = 0; v < nu.size(); ++v) as_map[v] = Vec2(nu[v].real(), nu[v].imag());
    const auto grads = face_affine(mesh, as_map);
    const BeltramiField on_faces = vertex_to_face(mesh, nu);
    double energy = 0.0;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const auto& g = grads[f];
        const double grad2 = g.a * g.a + g.b * g.b + g.c * g.c + g.d * g.d;
        energy += mesh.area(f) * (grad2 + alpha * std::pow(std::abs(on_faces[f]), p));
    }
    return energy;
}

inline double max_abs_difference(const BeltramiField& a, const BeltramiField& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

///
/// Beltrami coefficient of the map, with flipped or collapsed faces mapped onto
/// the clamp circle instead of failing. Used inside the iterations, where a
/// landmark-constrained solve may briefly fold a face.
///
inline BeltramiField beltrami_or_clamped(const TriMesh& mesh, const PiecewiseLinearMap& map, double delta)
{
    const auto grads = face_affine(mesh, map);
    BeltramiField mu = BeltramiField::zeros(Support::Face, grads.size());
    for (std::size_t f = 0; f < grads.size(); ++f) {
        const Complex fz = dz(grads[f]);
        const Complex fzb = dzbar(grads[f]);
        if (std::abs(fz) < kDegenerateModulus)
            mu[f] = std::abs(fzb) > 0.0 ? fzb / std::abs(fzb) : Complex(0.0);
        else
            mu[f] = fzb / fz;
    }
    return clamp_to_disk(std::move(mu), delta);
}

///
/// Landmark-matching registration by penalty splitting.
///
///   nu_0 = 0, f_0 = LBS(nu_0)
///   repeat:
///     f_n      = LBS(vertex_to_face(nu_n))
///     nu_{n+1} = smooth(face_to_vertex(mu(f_n)))
///     f~       = LBS(vertex_to_face(nu_{n+1}))
///     nu_{n+1} = clamp(nu_{n+1} + t (face_to_vertex(mu(f~)) - nu_{n+1}))
///   until max |nu_{n+1} - nu_n| < epsilon
///
/// The returned map is LBS(nu*), so the landmarks hold exactly.
///
inline RegistrationResult register_landmarks(const TriMesh& mesh, const ConstraintSet& constraints,
                                             const RegistrationParams& params)
{
    params.validate();
    LinearBeltramiSolver lbs(mesh, constraints);
    CoefficientSmoother smoother(mesh, params.alpha, params.gamma, params.smoothing_form);
    const double delta = params.clamp_delta;

    RegistrationResult result;
    BeltramiField nu = BeltramiField::zeros(Support::Vertex, mesh.vertex_count());
    PiecewiseLinearMap f = lbs.solve(vertex_to_face(mesh, nu));

    auto record = [&](int it, const PiecewiseLinearMap& map, const BeltramiField& nu_now) {
        TraceRow row;
        row.iteration = it;
        row.energy = energy_lm(mesh, nu_now, params.alpha, params.p);
        row.landmark_error = landmark_error(map, constraints);
        row.max_mu = nu_now.max_abs();
        row.flips = count_flips(mesh, map);
        result.energy_trace.push_back(row);
    };
    record(0, f, nu);

    // Best flip-free iterate, returned if the iteration does not converge.
    BeltramiField best_nu = nu;
    std::size_t best_flips = result.energy_trace.back().flips;
    double best_energy = result.energy_trace.back().energy;

    // f holds LBS(nu_n) on entry to every iteration.
    for (int it = 1; it <= params.max_iters; ++it) {
        BeltramiField next = smoother.apply(face_to_vertex(mesh, beltrami_or_clamped(mesh, f, delta)));
        next = clamp_to_disk(std::move(next), delta);

        const PiecewiseLinearMap f_tilde = lbs.solve(vertex_to_face(mesh, next));
        const BeltramiField mu_tilde = face_to_vertex(mesh, beltrami_or_clamped(mesh, f_tilde, delta));
        for (std::size_t v = 0; v < next.size(); ++v) next[v] += params.step_t * (mu_tilde[v] - next[v]);
        next = clamp_to_disk(std::move(next), delta);

        const double change = max_abs_difference(next, nu);
        nu = std::move(next);
        f = lbs.solve(vertex_to_face(mesh, nu));
        record(it, f, nu);
        result.iterations = it;

        const auto& row = result.energy_trace.back();
        if (row.flips < best_flips || (row.flips == best_flips && row.energy <= best_energy)) {
            best_flips = row.flips;
            best_energy = row.energy;
            best_nu = nu;
        }
        if (change < params.epsilon) {
            result.converged = true;
            break;
        }
    }

    if (!result.converged) nu = best_nu;
    result.map = lbs.solve(vertex_to_face(mesh, nu));
    result.nu = std::move(nu);
    result.flip_count = count_flips(mesh, result.map);
    result.landmark_error = landmark_error(result.map, constraints);
    return result;
}

/// CSV "iteration,energy,landmark_error,max_mu,flips" (plus level and mismatch when present).
inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace, bool with_mismatch = false)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << "iteration,energy,landmark_error,max_mu,flips";
    if (with_mismatch) os << ",level,mismatch";
    os << '\n';
    char buf[256];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%zu", r.iteration, r.energy, r.landmark_error, r.max_mu,
                      r.flips);
        os << buf;
        if (with_mismatch) {
            std::snprintf(buf, sizeof buf, ",%d,%.17g", r.level, r.mismatch);
            os << buf;
        }
        os << '\n';
    }
}

inline std::vector<TraceRow> read_trace_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw InputError(path + ": empty trace file");
    const bool with_mismatch = line.find(",level,mismatch") != std::string::npos;
    std::vector<TraceRow> trace;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        TraceRow r;
        int consumed = 0;
        const int n = std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%zu%n", &r.iteration, &r.energy, &r.landmark_error,
                                  &r.max_mu, &r.flips, &consumed);
        bool ok = n == 5;
        if (ok && with_mismatch) {
            char tail[64] = {};
            ok = std::sscanf(line.c_str() + consumed, ",%d,%63s", &r.level, tail) == 2;
            if (ok) r.mismatch = std::strtod(tail, nullptr);
        }
        if (!ok) throw InputError(path + ":" + std::to_string(lineno) + ": malformed trace row");
        trace.push_back(r);
    }
    return trace;
}

} // namespace qcreg
