#pragma once

#include <qcreg/errors.hpp>
#include <qcreg/mesh.hpp>

#include <algorithm>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace qcreg {

using Complex = std::complex<double>;

enum class Support { Face, Vertex };

/// Complex Beltrami coefficient sampled per face or per vertex.
struct BeltramiField {
    Support support = Support::Face;
    std::vector<Complex> values;

    static BeltramiField zeros(Support s, std::size_t n) { return {s, std::vector<Complex>(n, Complex(0.0))}; }

    std::size_t size() const { return values.size(); }
    const Complex& operator[](std::size_t i) const { return values[i]; }
    Complex& operator[](std::size_t i) { return values[i]; }

    /// ||mu||_inf, the largest modulus over the support.
    double max_abs() const
    {
        double m = 0.0;
        for (const auto& z : values) m = std::max(m, std::abs(z));
        return m;
    }
};

/// f_z = ((a + d) + i (c - b)) / 2
inline Complex dz(const FaceAffine& g) { return Complex(g.a + g.d, g.c - g.b) / 2.0; }

/// f_zbar = ((a - d) + i (c + b)) / 2
inline Complex dzbar(const FaceAffine& g) { return Complex(g.a - g.d, g.c + g.b) / 2.0; }

inline constexpr double kDegenerateModulus = 1e-14;

inline BeltramiField beltrami_from_affine(std::span<const FaceAffine> grads)
{
    BeltramiField mu = BeltramiField::zeros(Support::Face, grads.size());
    for (std::size_t f = 0; f < grads.size(); ++f) {
        const Complex den = 2.0 * dz(grads[f]);
        if (std::abs(den) < kDegenerateModulus)
            throw DegenerateFaceError("degenerate (anti-conformal or collapsed) face", f);
        mu[f] = 2.0 * dzbar(grads[f]) / den;
    }
    return mu;
}

/// Per-face Beltrami coefficient mu = f_zbar / f_z of a piecewise-linear map.
inline BeltramiField beltrami_from_map(const TriMesh& mesh, const PiecewiseLinearMap& map)
{
    const auto grads = face_affine(mesh, map);
    return beltrami_from_affine(grads);
}

/// Per-face Jacobian determinant a d - b c.
inline std::vector<double> jacobian(const TriMesh& mesh, const PiecewiseLinearMap& map)
{
    const auto grads = face_affine(mesh, map);
    std::vector<double> out(grads.size());
    for (std::size_t f = 0; f < grads.size(); ++f) out[f] = grads[f].jacobian();
    return out;
}

/// Maximal dilation K = (1 + ||mu||) / (1 - ||mu||).
inline double max_dilation(const BeltramiField& mu)
{
    const double m = mu.max_abs();
    if (!(m < 1.0)) throw NumericalError("not quasi-conformal: max |mu| = " + std::to_string(m) + " >= 1");
    return (1.0 + m) / (1.0 - m);
}

/// Unweighted mean of the incident face values at every vertex.
inline BeltramiField face_to_vertex(const TriMesh& mesh, const BeltramiField& mu)
{
    if (mu.support != Support::Face || mu.size() != mesh.face_count())
        throw InputError("face_to_vertex expects one value per face");
    BeltramiField out = BeltramiField::zeros(Support::Vertex, mesh.vertex_count());
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
        const auto star = mesh.star(v);
        if (star.empty()) throw InputError("vertex " + std::to_string(v) + " has no incident face");
        Complex sum(0.0);
        for (int f : star) sum += mu[f];
        out[v] = sum / static_cast<double>(star.size());
    }
    return out;
}

/// Mean of the three vertex values on every face.
inline BeltramiField vertex_to_face(const TriMesh& mesh, const BeltramiField& nu)
{
    if (nu.support != Support::Vertex || nu.size() != mesh.vertex_count())
        throw InputError("vertex_to_face expects one value per vertex");
    BeltramiField out = BeltramiField::zeros(Support::Face, mesh.face_count());
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const auto& tri = mesh.face(f);
        out[f] = (nu[tri[0]] + nu[tri[1]] + nu[tri[2]]) / 3.0;
    }
    return out;
}

///
/// Beltrami coefficient of g o f on every face, given mu_d = mu(g) pulled back
/// to the faces of f:
///   mu(g o f) = (mu_f + (conj(f_z) / f_z) mu_d) / (1 + (conj(f_z) / f_z) conj(mu_f) mu_d)
///
inline BeltramiField compose_beltrami(const TriMesh& mesh, const PiecewiseLinearMap& map,
                                      const BeltramiField& mu_d)
{
    if (mu_d.support != Support::Face || mu_d.size() != mesh.face_count())
        throw InputError("compose_beltrami expects one perturbation value per face");
    const auto grads = face_affine(mesh, map);
    const BeltramiField mu_f = beltrami_from_affine(grads);
    BeltramiField out = BeltramiField::zeros(Support::Face, mesh.face_count());
    for (std::size_t f = 0; f < grads.size(); ++f) {
        const Complex fz = dz(grads[f]);
        const Complex rot = std::conj(fz) / fz;
        const Complex den = 1.0 + rot * std::conj(mu_f[f]) * mu_d[f];
        if (std::abs(den) < kDegenerateModulus) throw DegenerateFaceError("degenerate composition", f);
        out[f] = (mu_f[f] + rot * mu_d[f]) / den;
    }
    return out;
}

/// Radially projects values with modulus above 1 - delta onto that circle.
inline BeltramiField clamp_to_disk(BeltramiField mu, double delta)
{
    const double r = 1.0 - delta;
    for (auto& z : mu.values) {
        const double m = std::abs(z);
        if (!(m > r)) continue;
        z *= r / m;
        while (std::abs(z) > r) z *= std::nextafter(1.0, 0.0);
    }
    return mu;
}

/// CSV with header "face_index,re,im" or "vertex_index,re,im", following the support.
inline void write_beltrami_csv(const std::string& path, const BeltramiField& mu)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << (mu.support == Support::Face ? "face_index" : "vertex_index") << ",re,im\n";
    char buf[96];
    for (std::size_t i = 0; i < mu.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, mu[i].real(), mu[i].imag());
        os << buf;
    }
}

inline BeltramiField read_beltrami_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw InputError("cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw InputError(path + ": empty Beltrami file");
    BeltramiField mu;
    mu.support = line.rfind("vertex_index", 0) == 0 ? Support::Vertex : Support::Face;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t idx = 0;
        double re = 0.0, im = 0.0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &idx, &re, &im) != 3 || idx != mu.size())
            throw InputError(path + ":" + std::to_string(lineno) + ": malformed Beltrami row");
        mu.values.emplace_back(re, im);
    }
    return mu;
}

} // namespace qcreg
