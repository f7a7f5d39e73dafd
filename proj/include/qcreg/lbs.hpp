#pragma once

#include <qcreg/beltrami.hpp>
#include <qcreg/errors.hpp>
#include <qcreg/mesh.hpp>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qcreg {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Per-face entries of the symmetric coefficient matrix [[a1, a2], [a2, a3]].
struct AlphaCoeffs {
    std::vector<double> a1;
    std::vector<double> a2;
    std::vector<double> a3;

    std::size_t size() const { return a1.size(); }
};

///
/// With mu = rho + i tau:
///   a1 = ((rho - 1)^2 + tau^2) / (1 - rho^2 - tau^2)
///   a2 = -2 tau / (1 - rho^2 - tau^2)
///   a3 = ((1 + rho)^2 + tau^2) / (1 - rho^2 - tau^2)
///
inline AlphaCoeffs alpha_coeffs(const BeltramiField& mu)
{
    if (mu.support != Support::Face) throw InputError("alpha_coeffs expects a per-face field");
    AlphaCoeffs out;
    out.a1.resize(mu.size());
    out.a2.resize(mu.size());
    out.a3.resize(mu.size());
    for (std::size_t f = 0; f < mu.size(); ++f) {
        const double rho = mu[f].real();
        const double tau = mu[f].imag();
        const double den = 1.0 - rho * rho - tau * tau;
        if (!(den >= 1e-12))
            throw DegenerateFaceError("coefficient singular, clamp mu first: |mu| = " +
                                          std::to_string(std::abs(mu[f])),
                                      f);
        out.a1[f] = ((rho - 1.0) * (rho - 1.0) + tau * tau) / den;
        out.a2[f] = -2.0 * tau / den;
        out.a3[f] = ((1.0 + rho) * (1.0 + rho) + tau * tau) / den;
    }
    return out;
}

enum class BoundaryKind { DirichletFull, RectangleFree };

struct Landmark {
    int vertex = -1;
    Vec2 target{0.0, 0.0};
};

///
/// Boundary condition plus hard interior landmarks.
///
/// DirichletFull pins every boundary vertex, to dirichlet_values (aligned with
/// TriMesh::boundary_vertices()) when given, otherwise to its own position.
/// RectangleFree requires an axis-aligned rectangular boundary: each side keeps
/// its normal coordinate, corners are pinned, tangential sliding is free.
///
struct ConstraintSet {
    BoundaryKind boundary = BoundaryKind::DirichletFull;
    std::optional<std::vector<Vec2>> dirichlet_values;
    std::vector<Landmark> landmarks;
};

/// Fixed values of each coordinate of f, per vertex.
struct ResolvedConstraints {
    std::array<std::vector<char>, 2> fixed;
    std::array<std::vector<double>, 2> value;
};

inline ResolvedConstraints resolve_constraints(const TriMesh& mesh, const ConstraintSet& cs)
{
    const std::size_t n = mesh.vertex_count();
    ResolvedConstraints rc;
    for (int c = 0; c < 2; ++c) {
        rc.fixed[c].assign(n, 0);
        rc.value[c].assign(n, 0.0);
    }
    const auto& boundary = mesh.boundary_vertices();
    const BoundingBox& box = mesh.bounds();
    const double tol = 1e-9 * std::max({box.width(), box.height(), 1.0});

    auto fix = [&](int v, int c, double x) {
        rc.fixed[c][v] = 1;
        rc.value[c][v] = x;
    };

    if (cs.boundary == BoundaryKind::DirichletFull) {
        if (cs.dirichlet_values && cs.dirichlet_values->size() != boundary.size())
            throw InputError("dirichlet values: expected " + std::to_string(boundary.size()) +
                             " boundary targets, got " + std::to_string(cs.dirichlet_values->size()));
        for (std::size_t b = 0; b < boundary.size(); ++b) {
            const Vec2 w = cs.dirichlet_values ? (*cs.dirichlet_values)[b] : mesh.vertex(boundary[b]);
            fix(boundary[b], 0, w.x());
            fix(boundary[b], 1, w.y());
        }
    } else {
        int corners = 0;
        for (int v : boundary) {
            const Vec2& p = mesh.vertex(v);
            const bool left = std::abs(p.x() - box.min.x()) <= tol;
            const bool right = std::abs(p.x() - box.max.x()) <= tol;
            const bool bottom = std::abs(p.y() - box.min.y()) <= tol;
            const bool top = std::abs(p.y() - box.max.y()) <= tol;
            if (!(left || right || bottom || top))
                throw InputError("rectangle_free: boundary vertex " + std::to_string(v) +
                                 " is not on the bounding rectangle");
            if (left) fix(v, 0, box.min.x());
            if (right) fix(v, 0, box.max.x());
            if (bottom) fix(v, 1, box.min.y());
            if (top) fix(v, 1, box.max.y());
            if ((left || right) && (bottom || top)) ++corners;
        }
        if (corners != 4) throw InputError("rectangle_free: boundary has " + std::to_string(corners) + " corners, expected 4");
    }

    std::vector<char> seen(n, 0);
    for (const auto& lm : cs.landmarks) {
        if (lm.vertex < 0 || static_cast<std::size_t>(lm.vertex) >= n)
            throw InputError("landmark vertex " + std::to_string(lm.vertex) + " out of range");
        if (seen[lm.vertex]) throw InputError("duplicate landmark at vertex " + std::to_string(lm.vertex));
        seen[lm.vertex] = 1;
        for (int c = 0; c < 2; ++c) {
            const double q = lm.target[c];
            if (rc.fixed[c][lm.vertex] && std::abs(rc.value[c][lm.vertex] - q) > tol)
                throw InputError("over-constrained vertex " + std::to_string(lm.vertex) +
                                 ": landmark target conflicts with the boundary condition");
            fix(lm.vertex, c, q);
        }
    }
    return rc;
}

///
/// Stiffness matrix of Div(A grad s) over all vertices:
///   K_ij = sum_T Area(T) [A_i B_i] [[a1, a2], [a2, a3]] [A_j B_j]^T.
/// Symmetric, and positive semi-definite when every face matrix is SPD.
///
inline SparseMatrix lbs_stiffness(const TriMesh& mesh, const AlphaCoeffs& alphas)
{
    if (alphas.size() != mesh.face_count()) throw InputError("alpha coefficients do not match face count");
    const DivergenceCoeffs dc = divergence_coeffs(mesh);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(9 * mesh.face_count());
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
        const auto& w = dc.weights[f];
        const auto& tri = mesh.face(f);
        const double a1 = alphas.a1[f], a2 = alphas.a2[f], a3 = alphas.a3[f];
        for (int i = 0; i < 3; ++i) {
            const double fx = a1 * w.A[i] + a2 * w.B[i];
            const double fy = a2 * w.A[i] + a3 * w.B[i];
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(tri[i], tri[j], w.area * (fx * w.A[j] + fy * w.B[j]));
        }
    }
    const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
    SparseMatrix k(n, n);
    k.setFromTriplets(trips.begin(), trips.end());
    return k;
}

///
/// Reduced system for one coordinate of the map: rows and columns of the
/// constrained vertices are removed and their known values folded into rhs.
///
struct LbsCoordinateSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
    std::vector<int> free_vertices;
    std::vector<int> reduced_index; // vertex -> row, or -1 when the coordinate is fixed
};

struct LbsSystem {
    std::array<LbsCoordinateSystem, 2> coord;
    ResolvedConstraints constraints;

    /// Both coordinates eliminate the same vertices, so one factorization serves both.
    bool shared_matrix() const { return coord[0].free_vertices == coord[1].free_vertices; }
};

inline LbsCoordinateSystem reduce_coordinate(const SparseMatrix& k, const std::vector<char>& fixed,
                                             const std::vector<double>& value)
{
    LbsCoordinateSystem sys;
    const auto n = static_cast<int>(fixed.size());
    sys.reduced_index.assign(n, -1);
    for (int v = 0; v < n; ++v) {
        if (!fixed[v]) {
            sys.reduced_index[v] = static_cast<int>(sys.free_vertices.size());
            sys.free_vertices.push_back(v);
        }
    }
    const auto m = static_cast<Eigen::Index>(sys.free_vertices.size());
    sys.rhs = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(k.nonZeros());
    for (int col = 0; col < k.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int row = static_cast<int>(it.row());
            const int r = sys.reduced_index[row];
            if (r < 0) continue;
            const int c = sys.reduced_index[col];
            if (c >= 0)
                trips.emplace_back(r, c, it.value());
            else
                sys.rhs[r] -= it.value() * value[col];
        }
    }
    sys.matrix.resize(m, m);
    sys.matrix.setFromTriplets(trips.begin(), trips.end());
    return sys;
}

inline LbsSystem assemble_lbs(const TriMesh& mesh, const AlphaCoeffs& alphas, const ConstraintSet& constraints)
{
    for (std::size_t f = 0; f < alphas.size(); ++f)
        if (!std::isfinite(alphas.a1[f]) || !std::isfinite(alphas.a2[f]) || !std::isfinite(alphas.a3[f]))
            throw DegenerateFaceError("non-finite alpha coefficient", f);
    LbsSystem sys;
    sys.constraints = resolve_constraints(mesh, constraints);
    const SparseMatrix k = lbs_stiffness(mesh, alphas);
    for (int c = 0; c < 2; ++c)
        sys.coord[c] = reduce_coordinate(k, sys.constraints.fixed[c], sys.constraints.value[c]);
    return sys;
}

/// Writes a sparse matrix in MatrixMarket coordinate format (1-based).
inline void write_matrix_market(const std::string& path, const SparseMatrix& m)
{
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    char buf[96];
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row() + 1),
                          static_cast<long>(it.col() + 1), it.value());
            os << buf;
        }
    }
}

struct LbsOptions {
    double relative_tolerance = 1e-10;
    /// When non-empty, the reduced matrices are written to <prefix>_x.mtx and <prefix>_y.mtx.
    std::string dump_prefix;
};

///
/// Linear Beltrami Solver: the piecewise-linear map whose Beltrami coefficient
/// approximates mu, satisfying the boundary condition and landmarks exactly.
///
/// The constraints are resolved once; each solve() assembles and factors the
/// reduced SPD systems with a sparse LDL^T whose symbolic analysis is reused.
///
class LinearBeltramiSolver {
public:
    LinearBeltramiSolver(const TriMesh& mesh, ConstraintSet constraints, LbsOptions options = {})
        : m_mesh(&mesh), m_constraints(std::move(constraints)), m_options(std::move(options))
    {
        m_resolved = resolve_constraints(mesh, m_constraints);
    }

    const TriMesh& mesh() const { return *m_mesh; }
    const ConstraintSet& constraints() const { return m_constraints; }

    PiecewiseLinearMap solve(const BeltramiField& mu)
    {
        const TriMesh& mesh = *m_mesh;
        if (mu.support != Support::Face || mu.size() != mesh.face_count())
            throw InputError("solve_lbs expects one Beltrami value per face");
        const SparseMatrix k = lbs_stiffness(mesh, alpha_coeffs(mu));

        const bool shared = m_resolved.fixed[0] == m_resolved.fixed[1];
        PiecewiseLinearMap out;
        out.target.assign(mesh.vertex_count(), Vec2::Zero());
        for (int c = 0; c < 2; ++c) {
            LbsCoordinateSystem sys = reduce_coordinate(k, m_resolved.fixed[c], m_resolved.value[c]);
            if (!m_options.dump_prefix.empty())
                write_matrix_market(m_options.dump_prefix + (c == 0 ? "_x.mtx" : "_y.mtx"), sys.matrix);
            Eigen::VectorXd x;
            if (sys.matrix.rows() > 0) {
                auto& solver = m_solvers[shared ? 0 : c];
                if (!solver) {
                    solver = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>();
                    solver->analyzePattern(sys.matrix);
                }
                if (c == 0 || !shared) solver->factorize(sys.matrix);
                if (solver->info() != Eigen::Success) throw NumericalError("LBS: singular system");
                x = solver->solve(sys.rhs);
                const double rhs_norm = sys.rhs.norm();
                const double res = (sys.matrix * x - sys.rhs).norm();
                const double rel = rhs_norm > 0.0 ? res / rhs_norm : res;
                if (!std::isfinite(rel) || rel > m_options.relative_tolerance)
                    throw NumericalError("LBS: solver did not converge, relative residual " + std::to_string(rel));
            }
            for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
                const int r = sys.reduced_index[v];
                out.target[v][c] = r >= 0 ? x[r] : m_resolved.value[c][v];
            }
        }
        return out;
    }

private:
    const TriMesh* m_mesh;
    ConstraintSet m_constraints;
    LbsOptions m_options;
    ResolvedConstraints m_resolved;
    std::array<std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>>, 2> m_solvers;
};

inline PiecewiseLinearMap solve_lbs(const TriMesh& mesh, const BeltramiField& mu, const ConstraintSet& constraints,
                                    const LbsOptions& options = {})
{
    LinearBeltramiSolver solver(mesh, constraints, options);
    return solver.solve(mu);
}

} // namespace qcreg
