#pragma once

#include <qcreg/beltrami.hpp>
#include <qcreg/errors.hpp>
#include <qcreg/mesh.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>
#include <vector>

namespace qcreg {

///
/// Cotangent Laplacian Delta with (Delta f)_i = sum_j w_ij (f_j - f_i),
/// w_ij = (cot alpha_ij + cot beta_ij) / 2 on interior edges and cot alpha_ij / 2
/// on boundary edges. Stored as a symmetric matrix with zero row sums.
///
struct CotLaplacian {
    Eigen::SparseMatrix<double> matrix;

    double weight(int i, int j) const { return matrix.coeff(i, j); }
};

/// cot of the angle at vertex k opposite edge (i, j): (-l_ij^2 + l_jk^2 + l_ki^2) / (4 Area).
inline double cot_opposite(const Vec2& pi, const Vec2& pj, const Vec2& pk, double area)
{
    const double lij2 = (pi - pj).squaredNorm();
    const double ljk2 = (pj - pk).squaredNorm();
    const double lki2 = (pk - pi).squaredNorm();
    return (-lij2 + ljk2 + lki2) / (4.0 * area);
}

inline CotLaplacian cot_laplacian(const TriMesh& mesh)
{
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(12 * mesh.face_count());
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const double area = mesh.area(f);
        if (!(area > 0.0)) throw DegenerateFaceError("degenerate triangle", f);
        const auto& tri = mesh.face(f);
        for (int k = 0; k < 3; ++k) {
            const int i = tri[(k + 1) % 3], j = tri[(k + 2) % 3];
            const double w = 0.5 * cot_opposite(mesh.vertex(i), mesh.vertex(j), mesh.vertex(tri[k]), area);
            trips.emplace_back(i, j, w);
            trips.emplace_back(j, i, w);
            trips.emplace_back(i, i, -w);
            trips.emplace_back(j, j, -w);
        }
    }
    const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
    CotLaplacian out;
    out.matrix.resize(n, n);
    out.matrix.setFromTriplets(trips.begin(), trips.end());
    return out;
}

enum class SmoothingForm {
    /// (-Delta + 2 alpha I + 2 gamma I) nu = 2 gamma mu: constants are fixed points when alpha = 0.
    Variational,
    /// (Delta + 2 alpha I + 2 gamma I) nu = mu, transcribed without sign or scale correction.
    Literal,
};

///
/// Solves the quadratic smoothing step for a per-vertex coefficient, real and
/// imaginary parts against one factorization. Natural boundary: no rows are
/// modified on the boundary. The factorization is built once per (mesh, alpha,
/// gamma) and reused by every apply().
///
class CoefficientSmoother {
public:
    CoefficientSmoother(const TriMesh& mesh, double alpha, double gamma,
                        SmoothingForm form = SmoothingForm::Variational)
        : m_vertex_count(mesh.vertex_count()), m_gamma(gamma), m_form(form)
    {
        if (!(alpha >= 0.0)) throw InputError("smoothing: alpha must be >= 0");
        if (!(gamma > 0.0)) throw InputError("smoothing: gamma must be > 0");
        const auto lap = cot_laplacian(mesh).matrix;
        const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
        Eigen::SparseMatrix<double> id(n, n);
        id.setIdentity();
        if (form == SmoothingForm::Variational) {
            m_matrix = -lap + (2.0 * alpha + 2.0 * gamma) * id;
            m_ldlt.compute(m_matrix);
            if (m_ldlt.info() != Eigen::Success) throw NumericalError("smoothing: factorization failed");
        } else {
            m_matrix = lap + (2.0 * alpha + 2.0 * gamma) * id;
            m_matrix.makeCompressed();
            m_lu.compute(m_matrix);
            if (m_lu.info() != Eigen::Success) throw NumericalError("smoothing: literal operator is singular");
        }
    }

    BeltramiField apply(const BeltramiField& mu_target) const
    {
        if (mu_target.support != Support::Vertex || mu_target.size() != m_vertex_count)
            throw InputError("smooth_coefficient expects one value per vertex");
        const auto n = static_cast<Eigen::Index>(m_vertex_count);
        Eigen::MatrixXd rhs(n, 2);
        const double scale = m_form == SmoothingForm::Variational ? 2.0 * m_gamma : 1.0;
        for (Eigen::Index v = 0; v < n; ++v) {
            rhs(v, 0) = scale * mu_target[v].real();
            rhs(v, 1) = scale * mu_target[v].imag();
        }
        Eigen::MatrixXd sol = m_form == SmoothingForm::Variational ? Eigen::MatrixXd(m_ldlt.solve(rhs))
                                                                   : Eigen::MatrixXd(m_lu.solve(rhs));
        const double rhs_norm = rhs.norm();
        const double res = (m_matrix * sol - rhs).norm();
        const double rel = rhs_norm > 0.0 ? res / rhs_norm : res;
        if (!std::isfinite(rel) || rel > 1e-10)
            throw NumericalError("smoothing: solve did not converge, relative residual " + std::to_string(rel));
        BeltramiField out = BeltramiField::zeros(Support::Vertex, m_vertex_count);
        for (Eigen::Index v = 0; v < n; ++v) out[v] = Complex(sol(v, 0), sol(v, 1));
        return out;
    }

private:
    std::size_t m_vertex_count;
    double m_gamma;
    SmoothingForm m_form;
    Eigen::SparseMatrix<double> m_matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> m_ldlt;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> m_lu;
};

inline BeltramiField smooth_coefficient(const TriMesh& mesh, const BeltramiField& mu_target, double alpha,
                                        double gamma, SmoothingForm form = SmoothingForm::Variational)
{
    return CoefficientSmoother(mesh, alpha, gamma, form).apply(mu_target);
}

} // namespace qcreg
