#include "test_support.hpp"

#include <qcreg/landmark.hpp>
#include <qcreg/smoothing.hpp>

#include <gtest/gtest.h>

using namespace qcreg;

namespace {

BeltramiField constant_vertex_field(std::size_t n, Complex c)
{
    BeltramiField mu = BeltramiField::zeros(Support::Vertex, n);
    for (auto& z : mu.values) z = c;
    return mu;
}

double interior_angle(const Vec2& at, const Vec2& p, const Vec2& q)
{
    const Vec2 a = p - at, b = q - at;
    return std::atan2(std::abs(a.x() * b.y() - a.y() * b.x()), a.dot(b));
}

} // namespace

TEST(CotLaplacian, EquilateralInteriorWeights)
{
    const TriMesh m = test::equilateral_patch(6);
    const CotLaplacian lap = cot_laplacian(m);
    int interior_edges = 0;
    for (const auto& [edge, adj] : m.edges()) {
        const double w = lap.weight(edge.first, edge.second);
        if (adj[1] >= 0) {
            EXPECT_NEAR(w, 1.0 / std::sqrt(3.0), 1e-12);
            ++interior_edges;
        } else {
            EXPECT_NEAR(w, 0.5 / std::sqrt(3.0), 1e-12);
        }
    }
    EXPECT_GT(interior_edges, 0);
}

TEST(CotLaplacian, RightTriangleDiagonalHasZeroWeight)
{
    const TriMesh m = make_grid_mesh(2, 2);
    const CotLaplacian lap = cot_laplacian(m);
    EXPECT_NEAR(lap.weight(0, 3), 0.0, 1e-15);
    EXPECT_NEAR(lap.weight(0, 1), 0.5, 1e-15);
}

TEST(CotLaplacian, MatchesAngleFormulaOnRandomMeshes)
{
    std::mt19937_64 rng(20);
    const TriMesh m = test::jittered_grid(rng, 8, 0.35);
    const CotLaplacian lap = cot_laplacian(m);
    for (const auto& [edge, adj] : m.edges()) {
        double expected = 0.0;
        for (int t : adj) {
            if (t < 0) continue;
            const auto& tri = m.face(t);
            int opposite = -1;
            for (int v : tri)
                if (v != edge.first && v != edge.second) opposite = v;
            expected +=
                0.5 / std::tan(interior_angle(m.vertex(opposite), m.vertex(edge.first), m.vertex(edge.second)));
        }
        EXPECT_NEAR(lap.weight(edge.first, edge.second), expected, 1e-10);
        EXPECT_EQ(lap.weight(edge.first, edge.second), lap.weight(edge.second, edge.first));
    }
}

TEST(CotLaplacian, ZeroRowSumsAndLinearPrecision)
{
    std::mt19937_64 rng(21);
    const TriMesh m = test::jittered_grid(rng, 10, 0.35);
    const auto& l = cot_laplacian(m).matrix;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(l.rows());
    EXPECT_LT((l * ones).cwiseAbs().maxCoeff(), 1e-10);
    Eigen::VectorXd lin(l.rows());
    for (std::size_t v = 0; v < m.vertex_count(); ++v) lin[v] = 2.0 * m.vertex(v).x() - 3.0 * m.vertex(v).y() + 1.0;
    const Eigen::VectorXd out = l * lin;
    for (std::size_t v = 0; v < m.vertex_count(); ++v)
        if (!m.is_boundary(v)) EXPECT_NEAR(out[v], 0.0, 1e-10);
}

TEST(SmoothCoefficient, ZeroTargetGivesZero)
{
    const TriMesh m = make_grid_mesh(6, 6);
    for (double alpha : {0.0, 1.0})
        EXPECT_EQ(smooth_coefficient(m, BeltramiField::zeros(Support::Vertex, m.vertex_count()), alpha, 3.0).max_abs(),
                  0.0);
}

TEST(SmoothCoefficient, ConstantClosedForm)
{
    std::mt19937_64 rng(22);
    const TriMesh m = test::jittered_grid(rng, 9);
    const Complex c(0.4, 0.0);
    for (const auto [alpha, gamma] : {std::pair{0.0, 0.5}, {0.0, 7.0}, {1.0, 1.0}, {0.3, 10.0}, {2.0, 0.25}}) {
        const auto nu = smooth_coefficient(m, constant_vertex_field(m.vertex_count(), c), alpha, gamma);
        for (const auto& z : nu.values) ASSERT_NEAR(std::abs(z - c * gamma / (alpha + gamma)), 0.0, 1e-10);
    }
    const auto half = smooth_coefficient(m, constant_vertex_field(m.vertex_count(), c), 1.0, 1.0);
    EXPECT_NEAR(half[0].real(), 0.2, 1e-10);
}

TEST(SmoothCoefficient, Shrinks)
{
    std::mt19937_64 rng(23);
    const TriMesh m = test::jittered_grid(rng, 9);
    for (int trial = 0; trial < 100; ++trial) {
        const auto mu = test::random_mu(rng, m.vertex_count(), 0.95, Support::Vertex);
        const double alpha = trial % 2 == 0 ? 0.0 : 0.5;
        ASSERT_LE(smooth_coefficient(m, mu, alpha, 2.0).max_abs(), mu.max_abs() + 1e-12);
    }
}

TEST(SmoothCoefficient, LargeGammaRecoversTarget)
{
    std::mt19937_64 rng(24);
    const TriMesh m = test::jittered_grid(rng, 9);
    const auto mu = test::random_mu(rng, m.vertex_count(), 0.9, Support::Vertex);
    double previous = std::numeric_limits<double>::infinity();
    for (double gamma : {1.0, 10.0, 100.0, 1000.0}) {
        const double err = max_abs_difference(smooth_coefficient(m, mu, 1.0, gamma), mu);
        EXPECT_LT(err, previous);
        previous = err;
    }
    EXPECT_LT(previous, 0.02);
}

TEST(SmoothCoefficient, SmootherReuseAndRealImaginaryIndependence)
{
    std::mt19937_64 rng(25);
    const TriMesh m = make_grid_mesh(7, 7);
    const CoefficientSmoother s(m, 0.5, 2.0);
    const auto mu = test::random_mu(rng, m.vertex_count(), 0.9, Support::Vertex);
    BeltramiField re = mu, im = mu;
    for (auto& z : re.values) z = z.real();
    for (auto& z : im.values) z = Complex(0.0, z.imag());
    const auto a = s.apply(mu), b = s.apply(re), c = s.apply(im);
    for (std::size_t v = 0; v < mu.size(); ++v) EXPECT_NEAR(std::abs(a[v] - b[v] - c[v]), 0.0, 1e-14);
}

TEST(SmoothCoefficient, LiteralFormConstantSolution)
{
    const TriMesh m = make_grid_mesh(6, 6);
    const Complex c(0.3, -0.2);
    const auto nu =
        smooth_coefficient(m, constant_vertex_field(m.vertex_count(), c), 1.0, 10.0, SmoothingForm::Literal);
    for (const auto& z : nu.values) EXPECT_NEAR(std::abs(z - c / 22.0), 0.0, 1e-12);
}

TEST(SmoothCoefficient, RejectsBadInput)
{
    const TriMesh m = make_grid_mesh(4, 4);
    const auto zero = BeltramiField::zeros(Support::Vertex, m.vertex_count());
    EXPECT_THROW(smooth_coefficient(m, zero, -1.0, 1.0), InputError);
    EXPECT_THROW(smooth_coefficient(m, zero, 1.0, 0.0), InputError);
    EXPECT_THROW(smooth_coefficient(m, BeltramiField::zeros(Support::Face, m.face_count()), 1.0, 1.0), InputError);
}
