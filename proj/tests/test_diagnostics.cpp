#include "test_support.hpp"

#include <qcreg/diagnostics.hpp>
#include <qcreg/landmark.hpp>
#include <qcreg/synthetic.hpp>

#include <gtest/gtest.h>

using namespace qcreg;

TEST(CountFlips, IdentityHasNone)
{
    const TriMesh m = make_grid_mesh(9, 9);
    EXPECT_EQ(count_flips(m, PiecewiseLinearMap::identity(m)), 0u);
}

TEST(CountFlips, VertexPushedPastItsStarFolds)
{
    const TriMesh m = make_grid_mesh(5, 5);
    PiecewiseLinearMap f = PiecewiseLinearMap::identity(m);
    // vertex 12 = (0.5, 0.5); its star reaches 0.25 to the right
    f[12] = Vec2(0.9, 0.5);
    EXPECT_GE(count_flips(m, f), 1u);
    f[12] = Vec2(0.6, 0.5);
    EXPECT_EQ(count_flips(m, f), 0u);
}

TEST(CountFlips, CollapsedFaceCounts)
{
    const TriMesh m = make_grid_mesh(2, 2);
    PiecewiseLinearMap f = PiecewiseLinearMap::identity(m);
    f[3] = f[0]; // both faces contain vertices 0 and 3
    EXPECT_EQ(count_flips(m, f), 2u);
}

TEST(CountFlips, InvariantUnderRigidMotions)
{
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const TriMesh m = make_grid_mesh(9, 9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = test::random_map(rng, m, 0.1);
        const std::size_t flips = count_flips(m, f);
        const double angle = u(rng);
        const Vec2 shift(u(rng), u(rng));
        PiecewiseLinearMap g;
        for (const auto& p : f.target)
            g.target.emplace_back(std::cos(angle) * p.x() - std::sin(angle) * p.y() + shift.x(),
                                  std::sin(angle) * p.x() + std::cos(angle) * p.y() + shift.y());
        EXPECT_EQ(count_flips(m, g), flips);
    }
}

TEST(CountFlips, LbsOfCompatibleCoefficientIsFlipFree)
{
    std::mt19937_64 rng(51);
    const TriMesh m = make_grid_mesh(17, 17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = test::smooth_random_map(rng, m, 0.05);
        ASSERT_EQ(count_flips(m, g), 0u);
        ConstraintSet cs;
        std::vector<Vec2> values;
        for (int v : m.boundary_vertices()) values.push_back(g[v]);
        cs.dirichlet_values = values;
        EXPECT_EQ(count_flips(m, solve_lbs(m, beltrami_from_map(m, g), cs)), 0u);
    }
}

TEST(CountFlips, RegistrationResultIsFlipFree)
{
    const auto c = synthetic::swirl_case(33, 78, 2.6);
    const auto r = register_landmarks(c.mesh, c.constraints, {});
    const auto report = quality_report(c.mesh, r.map, c.constraints);
    EXPECT_EQ(report.flip_count, 0u);
    EXPECT_LT(report.landmark_error, 1e-9);
    EXPECT_LT(report.max_mu, 1.0);
}

TEST(QualityReport, IdentityWithMatchedLandmarks)
{
    const TriMesh m = make_grid_mesh(5, 5);
    ConstraintSet cs;
    cs.landmarks = {{12, Vec2(0.5, 0.5)}};
    const auto r = quality_report(m, PiecewiseLinearMap::identity(m), cs);
    EXPECT_EQ(r.flip_count, 0u);
    EXPECT_EQ(r.max_mu, 0.0);
    EXPECT_EQ(r.dilation_K, 1.0);
    EXPECT_EQ(r.landmark_error, 0.0);
    EXPECT_FALSE(r.mismatch_relative.has_value());
}

TEST(QualityReport, FoldedMapHasInfiniteDilation)
{
    const TriMesh m = make_grid_mesh(5, 5);
    PiecewiseLinearMap f = PiecewiseLinearMap::identity(m);
    f[12] = Vec2(0.9, 0.5);
    ConstraintSet cs;
    cs.landmarks = {{12, Vec2(0.5, 0.5)}};
    const auto r = quality_report(m, f, cs);
    EXPECT_GE(r.flip_count, 1u);
    EXPECT_GE(r.max_mu, 1.0);
    EXPECT_TRUE(std::isinf(r.dilation_K));
    EXPECT_NEAR(r.landmark_error, 0.4, 1e-15);
}

TEST(QualityReport, DoesNotModifyInputs)
{
    std::mt19937_64 rng(52);
    const TriMesh m = make_grid_mesh(5, 5);
    const auto f = test::random_map(rng, m, 0.05);
    const auto copy = f;
    quality_report(m, f, {});
    EXPECT_EQ(f.target, copy.target);
}

TEST(QualityReport, KeyValueRoundtrip)
{
    QualityReport r;
    r.flip_count = 3;
    r.max_mu = 0.123456789012345678;
    r.dilation_K = (1 + r.max_mu) / (1 - r.max_mu);
    r.landmark_error = 1.5e-13;
    r.wall_time = 0.75;
    EXPECT_EQ(parse_key_value_report(to_key_value(r)), r);
    r.mismatch_relative = 0.0042;
    EXPECT_EQ(parse_key_value_report(to_key_value(r)), r);
    r.dilation_K = std::numeric_limits<double>::infinity();
    EXPECT_EQ(parse_key_value_report(to_key_value(r)), r);
    EXPECT_THROW(parse_key_value_report("flip_count=1\n"), InputError);
    EXPECT_THROW(parse_key_value_report("garbage\n"), InputError);
}

TEST(QualityReport, TextSummary)
{
    QualityReport r;
    r.mismatch_relative = 0.01;
    const std::string text = to_text(r);
    EXPECT_NE(text.find("flipped faces"), std::string::npos);
    EXPECT_NE(text.find("1.0000%"), std::string::npos);
}
