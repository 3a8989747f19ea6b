#include <gtest/gtest.h>

#include <cmath>

#include "test_helpers.hpp"

using namespace halfheat;
using testutil::kTwoPi;
using testutil::rel;

namespace {
double max_abs(const Field& u) { return lp_norm(u, INFINITY); }

CoefficientSpec spec(const std::string& kind, double delta, std::uint64_t seed = 1) {
    CoefficientSpec s;
    s.kind = kind;
    s.delta = delta;
    s.seed = seed;
    return s;
}
} // namespace

TEST(Stencils, GradientOfConstantIsZero) {
    const Grid g = make_grid(2, 16, {8, 16}, 1.0, {1.0, 2.0});
    for (const auto& c : gradient_plus(Field::constant(g, 4.2))) EXPECT_EQ(max_abs(c), 0.0);
}

TEST(Stencils, DivergenceIsNegativeAdjoint) {
    const Grid g = make_grid(3, 8, {8, 16, 8}, 1.0, {1.0, 2.0, 0.5});
    for (int seed = 0; seed < 3; ++seed) {
        const Field u = testutil::noise(g, seed, 1.0);
        const VectorField v({testutil::noise(g, seed + 10, 1.0), testutil::noise(g, seed + 20, 1.0),
                             testutil::noise(g, seed + 30, 1.0)});
        const VectorField gu = gradient_plus(u);
        double lhs = 0.0;
        for (std::size_t i = 0; i < 3; ++i) lhs += inner(gu[i], v[i]);
        const double rhs = -inner(u, divergence_minus(v));
        EXPECT_LT(rel(lhs, rhs), 1e-13);
    }
}

TEST(Stencils, ForwardDifferenceOfSine) {
    const Grid g = make_grid(2, 8, {64, 8}, 1.0, {1.0, 1.0});
    const Field u = field_from_expression(g, "sin(2*pi*x1)");
    const VectorField du = gradient_plus(u);
    const double h = g.h(0);
    // Exact at midpoints up to the factor sin(pi h)/(pi h).
    const Field mid = field_from_expression(g, "2*pi*cos(2*pi*(x1 + " + std::to_string(h / 2) + "))");
    EXPECT_LT(max_abs(du[0] - mid), 4.0 * h * h * 40.0);
    EXPECT_LT(max_abs(du[0] - mid), 1e-2);
    EXPECT_EQ(max_abs(du[1]), 0.0);
}

TEST(Operator, ConstantIsAnnihilatedWithoutLambda) {
    const Grid g = make_grid(2, 16, {8, 8}, 1.0, {1.0, 1.0});
    const Coefficients a = generate_coefficients(spec("random_field", 0.5), g);
    EXPECT_LT(max_abs(apply_operator(a, 0.0, Field::constant(g, 3.0))), 1e-13);
}

TEST(Operator, DiscreteLaplacianEigenResponse) {
    const Grid g = make_grid(1, 16, {32}, 1.0, {2.0});
    const Field u = field_from_expression(g, "sin(2*pi*x1/2)");
    const double h = g.h(0);
    const double sym = std::pow(2.0 / h, 2) * std::pow(std::sin(std::numbers::pi * h / 2.0), 2);
    EXPECT_LT(rel(apply_operator(Coefficients::identity(g), 0.0, u), sym * u), 1e-12);
}

TEST(Operator, LambdaEntersLinearly) {
    const Grid g = make_grid(2, 16, {8, 8}, 1.0, {1.0, 1.0});
    const Coefficients a = generate_coefficients(spec("random_field", 0.3), g);
    const Field u = testutil::noise(g, 5, 1.0);
    EXPECT_LT(rel(apply_operator(a, 1.0, u) - apply_operator(a, 0.0, u), u), 1e-13);
}

TEST(Operator, IntegrationByParts) {
    const Grid g = make_grid(2, 32, {16, 8}, 2.0, {1.0, 1.0});
    const Coefficients a = generate_coefficients(spec("random_field", 0.25, 3), g);
    for (int seed = 0; seed < 3; ++seed) {
        const Field u = testutil::noise(g, seed, 1.0);
        const Field phi = testutil::noise(g, seed + 100, 1.0);
        double rhs = inner(time_derivative(u), phi);
        const VectorField du = gradient_plus(u), dphi = gradient_plus(phi);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) rhs += inner(multiply(a.a(i, j), du[static_cast<std::size_t>(j)]), dphi[static_cast<std::size_t>(i)]);
        EXPECT_LT(rel(inner(apply_operator(a, 0.0, u), phi), rhs), 1e-12);
    }
}

TEST(Rhs, Examples) {
    const Grid g = testutil::line_grid(64, kTwoPi, 8, 1.0);
    EXPECT_EQ(max_abs(apply_rhs(DataBundle::zero(g, 1.0))), 0.0);
    DataBundle F = DataBundle::zero(g, 1.0);
    F.h = field_from_expression(g, "cos(3*t)");
    EXPECT_LT(max_abs(apply_rhs(F) + std::sqrt(3.0) * F.h), 1e-12);
    DataBundle G = DataBundle::zero(g, 1.0);
    G.g = VectorField({Field::constant(g, 2.5)});
    EXPECT_EQ(max_abs(apply_rhs(G)), 0.0);
    DataBundle bad = DataBundle::zero(g, 0.0);
    bad.f = Field::constant(g, 1.0);
    EXPECT_THROW((void)apply_rhs(bad), ConfigError);
}

TEST(Generators, StructureTagsHold) {
    const Grid g = make_grid(2, 16, {16, 16}, 1.0, {1.0, 1.0});
    for (const char* kind : {"identity", "constant", "time_piecewise", "x1_piecewise", "checkerboard", "smooth", "random_field"}) {
        auto s = spec(kind, 0.5, 7);
        s.scale = kind == std::string("smooth") ? 0.25 : 0.125;
        const Coefficients c = generate_coefficients(s, g);
        EXPECT_EQ(validate(c), "") << kind;
    }
    const Coefficients tp = generate_coefficients(spec("time_piecewise", 0.5), g);
    EXPECT_EQ(tp.structure(), CoefficientStructure::time_measurable);
    for (int axis : {1, 2}) EXPECT_LE(variation_along(tp.a(0, 1), axis), 1e-14);
    EXPECT_GT(variation_along(tp.a(0, 0), 0), 0.0);
    const Coefficients cc = generate_coefficients(spec("constant", 0.5), g);
    for (int axis : {0, 1, 2}) EXPECT_LE(variation_along(cc.a(1, 1), axis), 1e-14);
}

TEST(Generators, DeterministicPerSeed) {
    const Grid g = make_grid(1, 32, {16}, 1.0, {1.0});
    const auto a = generate_coefficients(spec("x1_piecewise", 0.3, 9), g);
    const auto b = generate_coefficients(spec("x1_piecewise", 0.3, 9), g);
    const auto c = generate_coefficients(spec("x1_piecewise", 0.3, 10), g);
    EXPECT_EQ(a.a(0, 0).raw(), b.a(0, 0).raw());
    EXPECT_NE(a.a(0, 0).raw(), c.a(0, 0).raw());
}

TEST(Generators, CheckerboardEllipticityProbe) {
    const Grid g = make_grid(2, 16, {16, 16}, 1.0, {1.0, 1.0});
    auto s = spec("checkerboard", 0.5);
    s.epsilon = 0.1;
    const Coefficients c = generate_coefficients(s, g);
    Rng rng(42);
    for (int k = 0; k < 100; ++k) {
        const double x = rng.normal(), y = rng.normal();
        for (std::size_t lin = 0; lin < g.size(); lin += 7) {
            const auto m = c.matrix_at(lin);
            const double q = m[0] * x * x + (m[1] + m[2]) * x * y + m[3] * y * y;
            EXPECT_GE(q, 0.5 * (x * x + y * y));
        }
    }
}

TEST(Generators, CheckerboardRejectsLargeEpsilon) {
    const Grid g = make_grid(1, 16, {16}, 1.0, {1.0});
    auto s = spec("checkerboard", 0.5);
    s.epsilon = 0.6;
    try {
        (void)generate_coefficients(s, g);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos);
    }
    EXPECT_THROW((void)generate_coefficients(spec("wobbly", 0.5), g), ConfigError);
}

TEST(Generators, PointwiseCoercivityOfStencilForm) {
    const Grid g = make_grid(3, 8, {8, 8, 8}, 1.0, {1.0, 1.0, 1.0});
    const Coefficients c = generate_coefficients(spec("random_field", 0.25, 2), g);
    EXPECT_GE(min_probe_ellipticity(c), 0.25);
    Rng rng(5);
    for (std::size_t lin = 0; lin < g.size(); lin += 13) {
        const auto m = c.matrix_at(lin);
        std::vector<double> w{rng.normal(), rng.normal(), rng.normal()};
        double q = 0.0, n = 0.0;
        for (int i = 0; i < 3; ++i) {
            n += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
            for (int j = 0; j < 3; ++j) q += m[static_cast<std::size_t>(i * 3 + j)] * w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)];
        }
        EXPECT_GE(q, 0.25 * n);
    }
}

TEST(Assumptions, TimeMeasurableAndConstantGiveZero) {
    const Grid g = make_grid(2, 64, {32, 32}, 1.0, {1.0, 1.0});
    EXPECT_LE(check_assumption_time(generate_coefficients(spec("time_piecewise", 0.3), g), 0.25).gamma_estimate, 1e-12);
    EXPECT_EQ(check_assumption_time(generate_coefficients(spec("constant", 0.3), g), 0.25).gamma_estimate, 0.0);
    EXPECT_LE(check_assumption_x1(generate_coefficients(spec("x1_piecewise", 0.3), g), 0.25).gamma_estimate, 1e-12);
    EXPECT_EQ(check_assumption_x1(generate_coefficients(spec("constant", 0.3), g), 0.25).gamma_estimate, 0.0);
}

TEST(Assumptions, CheckerboardWithinBand) {
    const Grid g = make_grid(2, 128, {64, 64}, 0.5, {1.0, 1.0});
    for (double eps : {0.05, 0.2}) {
        auto s = spec("checkerboard", 0.5);
        s.epsilon = eps;
        s.scale = 1.0 / 16.0;
        const auto rep = check_assumption_time(generate_coefficients(s, g), 0.25);
        EXPECT_GE(rep.gamma_estimate, eps / 4);
        EXPECT_LE(rep.gamma_estimate, 2 * eps);
        EXPECT_EQ(rep.r_grid.size(), 4u);
    }
}

TEST(Assumptions, TimeSlabsBreakTheX1Assumption) {
    const Grid g = make_grid(1, 64, {32}, 1.0, {1.0});
    auto s = spec("time_piecewise", 0.5);
    s.n_jumps = 2;
    EXPECT_GT(check_assumption_x1(generate_coefficients(s, g), 0.25).gamma_estimate, 1e-3);
}

TEST(Assumptions, InvariantUnderConstantShift) {
    const Grid g = make_grid(1, 64, {32}, 1.0, {1.0});
    auto s = spec("checkerboard", 0.5);
    s.epsilon = 0.3;
    const Coefficients c = generate_coefficients(s, g);
    const Coefficients shifted = c.plus_constant({0.7});
    EXPECT_LT(rel(check_assumption_time(c, 0.25).gamma_estimate, check_assumption_time(shifted, 0.25).gamma_estimate), 1e-12);
    EXPECT_LT(rel(check_assumption_x1(c, 0.25).gamma_estimate, check_assumption_x1(shifted, 0.25).gamma_estimate), 1e-12);
}

TEST(Assumptions, RejectsLargeR0) {
    const Grid g = make_grid(1, 64, {32}, 1.0, {1.0});
    EXPECT_THROW((void)check_assumption_time(Coefficients::identity(g), 0.5), ConfigError);
}

TEST(Freezing, ConstantAndStructuredInputsUnchanged) {
    const Grid g = make_grid(2, 32, {16, 16}, 1.0, {1.0, 1.0});
    const Cylinder q = Cylinder::parabolic({0.0, 0.1, -0.1}, 0.25);
    const Coefficients cc = generate_coefficients(spec("constant", 0.4), g);
    const Coefficients tc = generate_coefficients(spec("time_piecewise", 0.4), g);
    const Coefficients xc = generate_coefficients(spec("x1_piecewise", 0.4), g);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            EXPECT_LE(max_abs(freeze_time(cc, q).a(i, j) - cc.a(i, j)), 1e-13);
            EXPECT_LE(max_abs(freeze_time(tc, q).a(i, j) - tc.a(i, j)), 1e-13);
            EXPECT_LE(max_abs(freeze_x1_piecewise(xc, 0.25, 0.0, {0.1}).a(i, j) - xc.a(i, j)), 1e-13);
            EXPECT_LE(max_abs(freeze_x1_piecewise(cc, 0.25, 0.0, {0.1}).a(i, j) - cc.a(i, j)), 1e-13);
        }
    EXPECT_THROW((void)freeze_time(cc, Cylinder::parabolic({0, 0, 0}, 0.9)), ConfigError);
}

TEST(Freezing, X1PiecewiseIsPiecewiseConstantInTime) {
    const Grid g = make_grid(1, 64, {16}, 1.0, {1.0});
    const Coefficients c = generate_coefficients(spec("random_field", 0.5, 4), g);
    const double R = 0.25;  // slabs of width 1/8 = 8 samples
    const Coefficients f = freeze_x1_piecewise(c, R, 0.0, {});
    const std::size_t S = g.spatial_size();
    int changes = 0;
    for (std::size_t m = 1; m < g.nt(); ++m)
        if (f.a(0, 0)[m * S] != f.a(0, 0)[(m - 1) * S]) ++changes;
    EXPECT_LE(changes, 8);
    EXPECT_GE(changes, 6);
}

TEST(Theta, Examples) {
    const Grid g = make_grid(2, 16, {16, 16}, 1.0, {1.0, 1.0});
    const Field u = testutil::noise(g, 3, 1.0);
    EXPECT_LT(max_abs(theta_field(Coefficients::identity(g), u) - gradient_plus(u)[0]), 1e-15);
    EXPECT_EQ(max_abs(theta_field(generate_coefficients(spec("random_field", 0.5), g), field_from_expression(g, "sin(t)"))), 0.0);
    const Coefficients a2 = Coefficients::constant(g, {2.0, 0.0, 0.0, 1.0}, 0.5);
    const Field s = field_from_expression(g, "sin(2*pi*x1)");
    EXPECT_LT(max_abs(theta_field(a2, s) - 2.0 * gradient_plus(s)[0]), 1e-14);
    // Linear in u and in a.
    const Field v = testutil::noise(g, 4, 1.0);
    const Coefficients b = generate_coefficients(spec("random_field", 0.5, 8), g);
    EXPECT_LT(rel(theta_field(b, u + 2.0 * v), theta_field(b, u) + 2.0 * theta_field(b, v)), 1e-14);
}
