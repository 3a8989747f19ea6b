#include <gtest/gtest.h>

#include <cmath>

#include "test_helpers.hpp"

using namespace halfheat;
using testutil::rel;

namespace {
double max_abs(const Field& u) { return lp_norm(u, INFINITY); }
double min_of(const Field& u) {
    double m = INFINITY;
    for (double v : u.values()) m = std::min(m, v);
    return m;
}
} // namespace

TEST(CylinderMean, ConstantAndLinear) {
    const Grid g = make_grid(1, 64, {64}, 1.0, {1.0});
    const Cylinder q = Cylinder::parabolic({0.0, 0.0}, 0.25);
    EXPECT_EQ(mean_oscillation(Field::constant(g, 2.5), q), 0.0);
    const Field x = field_from_expression(g, "x1");
    EXPECT_LT(std::abs(cylinder_mean(x, q)), 1e-15);
    EXPECT_NEAR(mean_oscillation(x, q), 0.125, g.h(0));
    const Field shifted = (x + Field::constant(g, 3.0)) - Field::constant(g, 3.0);
    EXPECT_NEAR(cylinder_mean(shifted, q), cylinder_mean(x, q), 1e-15);
}

TEST(CylinderMean, EmptyCylinderRejected) {
    const Grid g = make_grid(1, 8, {8}, 1.0, {1.0});
    EXPECT_THROW((void)cylinder_mean(Field(g), Cylinder::parabolic({0.01, 0.01}, 0.01)), ConfigError);
}

TEST(CylinderMean, OscillationWithinTwiceBestConstant) {
    const Grid g = make_grid(2, 32, {16, 16}, 1.0, {1.0, 1.0});
    const Field f = testutil::noise(g, 6);
    const Cylinder q = Cylinder::parabolic({0.1, 0.0, -0.1}, 0.3);
    const auto pts = cylinder_points(g, q);
    const double osc = mean_oscillation(f, q);
    double best = INFINITY;
    for (int k = -200; k <= 200; ++k) {
        const double c = 0.01 * k;
        double s = 0.0;
        for (auto i : pts) s += std::abs(f[i] - c);
        best = std::min(best, s / static_cast<double>(pts.size()));
    }
    EXPECT_LE(osc, 2.0 * best);
    EXPECT_GE(osc, best - 1e-12);
}

TEST(Maximal, ConstantAndPointwiseBounds) {
    const Grid g = make_grid(1, 32, {32}, 1.0, {1.0});
    EXPECT_LT(max_abs(parabolic_maximal(Field::constant(g, -1.5)) - Field::constant(g, 1.5)), 1e-12);
    const Field f = testutil::noise(g, 2, 1.0);
    const Field af = map(f, [](double v) { return std::abs(v); });
    const Field M = parabolic_maximal(f);
    const Field Ms = strong_maximal(f);
    const Stencil smallest = cylinder_stencil(g, maximal_radii(g).front(), maximal_radii(g).front());
    const Field local = stencil_mean(af, smallest);
    EXPECT_GE(min_of(M - local), -1e-12);
    EXPECT_GE(min_of(Ms - M), -1e-12);
    const Field f2 = testutil::noise(g, 3, 1.0);
    EXPECT_GE(min_of(parabolic_maximal(f) + parabolic_maximal(f2) - parabolic_maximal(f + f2)), -1e-12);
    EXPECT_GE(min_of(strong_maximal(f) + strong_maximal(f2) - strong_maximal(f + f2)), -1e-12);
}

TEST(Dyadic, ConstantAndShiftInvariance) {
    const Grid g = make_grid(1, 64, {64}, 0.5, {1.0});
    EXPECT_LT(max_abs(dyadic_sharp(Field::constant(g, 4.0), 2, 3)), 1e-15);
    const Field f = testutil::noise(g, 8);
    EXPECT_LT(max_abs(dyadic_sharp(f + Field::constant(g, 7.0), 2, 3) - dyadic_sharp(f, 2, 3)), 1e-13);
    for (double c : {-1.0, 0.0, 0.3}) {
        Field bound = Field::constant(g, 0.0);
        for (int n = 2; n <= 3; ++n) {
            const Field dev = dyadic_cell_deviation(f, n, c);
            for (std::size_t i = 0; i < g.size(); ++i) bound[i] = std::max(bound[i], dev[i]);
        }
        EXPECT_GE(min_of(2.0 * bound - dyadic_sharp(f, 2, 3)), -1e-14);
    }
}

TEST(Dyadic, StepFunction) {
    const Grid g = make_grid(1, 64, {64}, 0.5, {1.0});
    const Field f = field_from_expression(g, "step(x1 - 1/3)");
    const Field sh = dyadic_sharp(f, 2, 3);
    // Cells are counted from x1 = -1/2; at level 2 the interface cell is [1/4, 1/2).
    for (std::size_t lin = 0; lin < g.size(); ++lin) {
        const double x = g.coordinate(1, lin % g.spatial_size());
        if (x < 0.25 - 1e-12) {
            EXPECT_EQ(sh[lin], 0.0);
        }
    }
    EXPECT_LE(max_abs(sh), 0.5 + 1e-12);
    EXPECT_GE(max_abs(sh), 0.4);
    EXPECT_THROW((void)dyadic_sharp(f, 6, 6), ConfigError);
}

TEST(Dyadic, CellsComparedWithContainingCylinders) {
    const Grid g = make_grid(2, 64, {32, 32}, 0.5, {1.0, 1.0});
    const Field f = testutil::noise(g, 12);
    const auto rep = compare_cells_with_cylinders(f, 2);
    EXPECT_TRUE(rep.holds);
    EXPECT_GT(rep.cells_checked, 0u);
    EXPECT_LE(rep.worst_ratio, rep.constant_bound);
}

TEST(Tail, ConstantZeroAndMonotone) {
    const Grid g = make_grid(1, 128, {16}, 64.0, {1.0});
    const std::vector<double> X{0.0, 0.0};
    const double r = 0.25;
    const int J = 6;
    const auto t = tail_sum(Field::constant(g, 2.0), r, 1.0, X, J);
    EXPECT_FALSE(t.truncated);
    EXPECT_LT(rel(t.value, 2.0 * (1 - std::pow(2.0, -J / 4.0)) / (1 - std::pow(2.0, -0.25))), 1e-14);
    EXPECT_EQ(tail_sum(Field(g), r, 1.0, X, J).value, 0.0);
    const Field f = testutil::noise(g, 1);
    EXPECT_GE(tail_sum(f, r, 1.0, X, 2 * J).value, tail_sum(f, r, 1.0, X, J).value);
    EXPECT_GE(tail_sum(2.0 * f, r, 1.0, X, J).value, tail_sum(f, r, 1.0, X, J).value);
    const auto big = tail_sum(f, r, 1.0, X, 40);
    EXPECT_TRUE(big.truncated);
    EXPECT_EQ(big.J_used, max_tail_terms(g, r));
}

TEST(LocalEstimate, ZeroDataIsTrivial) {
    const Grid g = make_grid(1, 64, {32}, 4.0, {2.0});
    const auto rep = verify_local_estimate(Coefficients::identity(g), 1.0, DataBundle::zero(g, 1.0), Field(g), 0.5);
    EXPECT_TRUE(rep.trivial);
}

namespace {
LocalEstimateReport manufactured(std::size_t nt, double lt, double lx, double R, double lambda) {
    const Grid g = make_grid(1, nt, {64}, lt, {lx});
    const Coefficients a = Coefficients::identity(g);
    const std::string expr = "bump(x1, 0, " + std::to_string(R) + ")*sin(2*pi*t/" + std::to_string(lt) + ")";
    const Field u = field_from_expression(g, expr);
    DataBundle F = DataBundle::zero(g, lambda);
    F.f = apply_operator(a, lambda, u);
    return verify_local_estimate(a, lambda, F, u, R);
}
} // namespace

TEST(LocalEstimate, StableUnderRefinementAndScaling) {
    const auto base = manufactured(128, 4.0, 2.0, 0.5, 1.0);
    EXPECT_FALSE(base.trivial);
    EXPECT_TRUE(std::isfinite(base.N_emp));
    EXPECT_GT(base.N_emp, 0.0);
    const auto fine = manufactured(256, 4.0, 2.0, 0.5, 1.0);
    EXPECT_LT(std::abs(fine.N_emp / base.N_emp - 1.0), 0.2);
    const auto scaled = manufactured(128, 16.0, 4.0, 1.0, 0.25);
    EXPECT_LT(std::abs(scaled.N_emp / base.N_emp - 1.0), 0.05);
}

TEST(LocalEstimate, RefusesNonSolutionsAndSpreadFields) {
    const Grid g = make_grid(1, 64, {32}, 4.0, {2.0});
    DataBundle F = DataBundle::zero(g, 1.0);
    F.f = testutil::noise(g, 1);
    EXPECT_THROW((void)verify_local_estimate(Coefficients::identity(g), 1.0, F, testutil::noise(g, 2), 0.5), SolverError);
    const Field u = testutil::noise(g, 3);
    F.f = apply_operator(Coefficients::identity(g), 1.0, u);
    EXPECT_THROW((void)verify_local_estimate(Coefficients::identity(g), 1.0, F, u, 0.5), ConfigError);
}

TEST(MeanOscillation, CaloricGradientIsLinearInRadius) {
    // u = t + |x|^2 / (2d) solves u_t = Laplace u; its gradient x / d + h / (2d) is linear.
    const Grid g = make_grid(2, 128, {64, 64}, 0.125, {1.0, 1.0});
    const Field u = field_from_expression(g, "t + (x1^2 + x2^2)/4");
    const VectorField du = gradient_plus(u);
    const std::vector<Field> comps{du[0], du[1]};
    const double o1 = mean_oscillation(comps, Cylinder::parabolic({0.0, 0.0, 0.0}, 0.25));
    const double o2 = mean_oscillation(comps, Cylinder::parabolic({0.0, 0.0, 0.0}, 0.125));
    EXPECT_NEAR(o1 / o2, 2.0, 0.1);

    const Coefficients I = Coefficients::identity(g);
    const auto rep = verify_mean_oscillation(OscillationCase::calU_time_coeffs, I, 0.0, DataBundle::zero(g, 0.0), u,
                                             {4, 8}, 0.25, {0.0, 0.0, 0.0});
    EXPECT_EQ(rep.rows.size(), 2u);
    EXPECT_LE(rep.fitted_slope, -0.9);
    EXPECT_EQ(rep.expected_slope, -1.0);
}

TEST(MeanOscillation, ZeroFieldIsTrivial) {
    const Grid g = make_grid(1, 128, {64}, 0.125, {1.0});
    const auto rep = verify_mean_oscillation(OscillationCase::U_heat, Coefficients::identity(g), 1.0,
                                             DataBundle::zero(g, 1.0), Field(g), {4, 8, 16}, 0.25, {0.0, 0.0});
    EXPECT_TRUE(rep.trivial);
    for (const auto& row : rep.rows) EXPECT_EQ(row.oscillation, 0.0);
    EXPECT_EQ(rep.dropped_kappas.size(), 1u);
    EXPECT_THROW((void)verify_mean_oscillation(OscillationCase::U_heat, Coefficients::identity(g), 1.0,
                                               DataBundle::zero(g, 1.0), Field(g), {2}, 0.25, {0.0, 0.0}),
                 ConfigError);
}

TEST(MeanOscillation, ThetaCaseComponents) {
    const Grid g = make_grid(2, 16, {16, 16}, 1.0, {1.0, 1.0});
    const Field u = testutil::noise(g, 5);
    const auto V = oscillation_components(OscillationCase::calUprime_theta_x1, Coefficients::identity(g), 4.0, u);
    ASSERT_EQ(V.size(), 3u);
    EXPECT_LT(max_abs(V[0] - gradient_plus(u)[1]), 1e-15);
    EXPECT_LT(max_abs(V[1] - 2.0 * u), 1e-15);
    EXPECT_LT(max_abs(V[2] - gradient_plus(u)[0]), 1e-15);
    EXPECT_EQ(oscillation_components(OscillationCase::U_heat, Coefficients::identity(g), 4.0, u).size(), 4u);
}
