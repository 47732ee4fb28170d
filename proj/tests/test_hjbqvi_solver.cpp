#include "optexec/errors.hpp"
#include "optexec/hjbqvi_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace optexec {
namespace {

GridConfig grid_config(double x_bar, double y_bar, int n_x, int n_y, double t = 4.0, int n_t = 0) {
    GridConfig g;
    g.t_horizon = t;
    g.x_bar = x_bar;
    g.y_bar = y_bar;
    g.n_x = n_x;
    g.n_y = n_y;
    g.n_t = n_t;
    return g;
}

MarketModel deterministic_block_book() {
    return MarketModel::make(CoefficientSpec{1.0, 0.0, 0.0, 1.0},
                             RegimeModel::single(LobShape::block(1.0), 0.0));
}

MarketModel model_with(CoefficientSpec spec, LobShape shape, double lambda) {
    return MarketModel::make(spec, RegimeModel::single(std::move(shape), lambda));
}

// Dense Gaussian elimination with partial pivoting on the full (I - dt A) matrix.
std::vector<double> dense_solve(const DiffusionBands& bands, double dt, std::vector<double> rhs) {
    const int n = bands.n_y + 1;
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (int r = 0; r < n; ++r) {
        a[r][r] = 1.0 - dt * bands.diag[r];
        if (r > 0) a[r][r - 1] = -dt * bands.sub[r];
        if (r + 1 < n) a[r][r + 1] = -dt * bands.super[r];
    }
    a[0][2] += -dt * bands.first_row_far;
    a[n - 1][n - 3] += -dt * bands.last_row_far;
    for (int c = 0; c < n; ++c) {
        int p = c;
        for (int r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        std::swap(rhs[c], rhs[p]);
        for (int r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int j = c; j < n; ++j) a[r][j] -= f * a[c][j];
            rhs[r] -= f * rhs[c];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        for (int j = r + 1; j < n; ++j) rhs[r] -= a[r][j] * rhs[j];
        rhs[r] /= a[r][r];
    }
    return rhs;
}

TEST(Diffusion, BandExample) {
    const SolverGrid grid = build_grid(grid_config(4.0, 5.0, 80, 100));
    const auto coef = Coefficients::multiplicative(CoefficientSpec{0.5, 0.1, 0.2, 1.0});
    const DiffusionBands bands = assemble_diffusion(grid, coef);
    // y = 1 sits on row 20.
    EXPECT_NEAR(bands.super[20], -3.0, 1e-12);
    EXPECT_NEAR(bands.diag[20], -4.0, 1e-12);
    EXPECT_NEAR(bands.sub[20], 7.0, 1e-12);
}

TEST(Diffusion, RowsAnnihilateConstants) {
    const SolverGrid grid = build_grid(grid_config(4.0, 5.0, 80, 100));
    for (DriftScheme scheme : {DriftScheme::Centered, DriftScheme::Upwind}) {
        const auto coef = Coefficients::multiplicative(CoefficientSpec{0.5, 0.3, 0.2, 1.0});
        const DiffusionBands b = assemble_diffusion(grid, coef, scheme);
        for (int l = 1; l < grid.n_y; ++l) {
            EXPECT_NEAR(b.sub[l] + b.diag[l] + b.super[l], 0.0, 1e-12 * std::abs(b.diag[l]));
        }
        EXPECT_EQ(b.diag[0] + b.super[0] + b.first_row_far, 0.0);
        EXPECT_NEAR(b.sub[grid.n_y] + b.diag[grid.n_y] + b.last_row_far, 0.0, 1e-12);
        // sigma(0) = 0 for the multiplicative family.
        EXPECT_EQ(b.diag[0], 0.0);
        EXPECT_EQ(b.super[0], 0.0);
        EXPECT_EQ(b.first_row_far, 0.0);
    }
}

TEST(Diffusion, UpwindRowsHaveNonNegativeOffDiagonals) {
    const SolverGrid grid = build_grid(grid_config(4.0, 5.0, 80, 100));
    const auto coef = Coefficients::multiplicative(CoefficientSpec{1.0, 0.0, 0.0, 1.0});
    const DiffusionBands b = assemble_diffusion(grid, coef, DriftScheme::Upwind);
    for (int l = 0; l <= grid.n_y; ++l) {
        EXPECT_GE(b.sub[l], 0.0);
        EXPECT_GE(b.super[l], 0.0);
        EXPECT_LE(b.diag[l], 0.0);
    }
    EXPECT_NEAR(b.sub[20], 20.0, 1e-12);  // h / dy at y = 1
}

TEST(Diffusion, BandedSolverMatchesDenseElimination) {
    const SolverGrid grid = build_grid(grid_config(1.0, 1.0, 10, 10));
    // Constant volatility makes the one-sided bottom row non-trivial.
    const Coefficients coef{[](double y) { return 0.3 * y; }, [](double) { return 0.4; },
                            [](double, double) { return 0.0; }};
    DiffusionBands bands = assemble_diffusion(grid, coef);
    ASSERT_NE(bands.first_row_far, 0.0);
    bands.last_row_far = 0.7;  // exercise the lower corner fold as well
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double dt : {0.001, 0.01, 0.05}) {
        std::vector<double> rhs(grid.y_nodes());
        for (double& r : rhs) r = unit(rng);
        const std::vector<double> expected = dense_solve(bands, dt, rhs);
        BandedSolver solver(bands, dt);
        solver.solve(rhs);
        for (int l = 0; l <= grid.n_y; ++l) EXPECT_NEAR(rhs[l], expected[l], 1e-12);
    }
}

TEST(Terminal, Examples) {
    const SolverGrid grid = build_grid(grid_config(4.0, 4.0, 40, 40));
    const std::vector<LobShape> block{LobShape::block(1.0)};
    const ValueLevel v = terminal_values(grid, block);
    EXPECT_NEAR(v(0, 0, 0), 8.0, 1e-12);
    for (int l = 0; l <= grid.n_y; ++l) EXPECT_EQ(v(0, grid.n_x, l), 0.0);

    const std::vector<LobShape> root{LobShape::power_law(0.8, -1.0)};
    // psi(y) = sqrt(1 + 2.5 y) - 1, integrated by hand.
    const double phi4 = (2.0 / 7.5) * (std::pow(11.0, 1.5) - 1.0) - 4.0;
    EXPECT_NEAR(terminal_values(grid, root)(0, 0, 0), phi4, 1e-12);
    // The scale is attained at the top row, x = 0.
    const LobShape& shape = root.front();
    EXPECT_NEAR(value_scale(terminal_values(grid, root)), shape.impact_cost(8.0) - shape.impact_cost(4.0),
                1e-12);
}

TEST(PdeStep, ZeroStaysZeroAndConstantsArePreserved) {
    const SolverSetup setup = SolverSetup::build(grid_config(4.0, 5.0, 80, 100), default_market_model());
    const GeneratorMatrix q(1);
    const ValueLevel zero(1, setup.grid.x_nodes(), setup.grid.y_nodes(), 0.0);
    for (double v : pde_step(zero, setup.bands, setup.quadrature, q, 0.5, setup.grid.dt).data()) {
        EXPECT_EQ(v, 0.0);
    }
    const ValueLevel constant(1, setup.grid.x_nodes(), setup.grid.y_nodes(), 3.25);
    for (double lambda : {0.0, 0.5}) {
        for (double v : pde_step(constant, setup.bands, setup.quadrature, q, lambda, setup.grid.dt).data()) {
            EXPECT_NEAR(v, 3.25, 1e-12);
        }
    }
}

TEST(PdeStep, JumpHandCalculation) {
    // Three y nodes at 0, 1, 2; no diffusion, jumps y -> y (1 + z / 2) with z in {0, 1}.
    const SolverGrid grid = build_grid(grid_config(2.0, 2.0, 2, 2, 1.0, 10));
    const auto coef = Coefficients::multiplicative(CoefficientSpec{0.0, 0.0, 0.5, 1.0});
    QuadratureTable nodes;
    nodes.nodes = {0.0, 1.0};
    nodes.weights = {0.5, 0.5};
    const QuadratureTable q = build_jump_shift_table(grid, coef, nodes);
    const DiffusionBands bands = assemble_diffusion(grid, coef);
    ValueLevel v(1, 3, 3);
    for (int k = 0; k < 3; ++k) {
        v(0, k, 0) = 1.0;
        v(0, k, 1) = 4.0;
        v(0, k, 2) = 9.0;
    }
    const ValueLevel next = pde_step(v, bands, q, GeneratorMatrix(1), 0.5, 0.1);
    // y = 1 jumps to 1.5 (value 6.5); y = 2 jumps to 3, continued linearly (value 14).
    EXPECT_NEAR(next(0, 1, 0), 1.0, 1e-15);
    EXPECT_NEAR(next(0, 1, 1), 4.0 + 0.1 * 0.5 * 0.5 * 2.5, 1e-14);
    EXPECT_NEAR(next(0, 1, 2), 9.0 + 0.1 * 0.5 * 0.5 * 5.0, 1e-14);
}

TEST(PdeStep, RegimeCouplingHandCalculation) {
    const SolverGrid grid = build_grid(grid_config(2.0, 2.0, 2, 2, 1.0, 10));
    const auto coef = Coefficients::multiplicative(CoefficientSpec{0.0, 0.0, 0.0, 1.0});
    const DiffusionBands bands = assemble_diffusion(grid, coef);
    ValueLevel v(2, 3, 3);
    for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
            v(0, k, l) = 2.0;
            v(1, k, l) = 5.0;
        }
    }
    const ValueLevel next =
        pde_step(v, bands, QuadratureTable{}, GeneratorMatrix::two_state(1.0, 2.0), 0.0, 0.1);
    EXPECT_NEAR(next(0, 1, 1), 2.0 + 0.1 * 1.0 * 3.0, 1e-14);
    EXPECT_NEAR(next(1, 1, 1), 5.0 - 0.1 * 2.0 * 3.0, 1e-14);
    EXPECT_THROW(pde_step(v, bands, QuadratureTable{}, GeneratorMatrix(1), 0.0, 0.1), NumericalError);
}

TEST(Impulse, TerminalLevelIsInvariant) {
    const SolverGrid grid = build_grid(grid_config(4.0, 5.0, 80, 100));
    const std::vector<LobShape> shapes{LobShape::power_law(0.8, -1.0), LobShape::block(1.0)};
    const ValueLevel terminal = terminal_values(grid, shapes);
    const ImpulseResult r = impulse_update(terminal, shapes, grid);
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k <= grid.n_x; ++k) {
            for (int l = 0; l + (grid.n_x - k) <= grid.n_y; ++l) {
                EXPECT_NEAR(r.values(i, k, l), terminal(i, k, l), 1e-12 * (1.0 + terminal(i, k, l)));
            }
        }
    }
}

class ImpulseBruteForce : public ::testing::Test {
protected:
    // Every diagonal stays inside the grid: n_y >= 2 n_x.
    SolverGrid grid = build_grid(grid_config(1.0, 2.0, 10, 20, 1.0));
    std::vector<LobShape> shapes{LobShape::power_law(0.8, -1.0)};

    ValueLevel brute_force(const ValueLevel& level) const {
        ValueLevel out = level;
        for (int k = 0; k <= grid.n_x; ++k) {
            for (int l = 0; l <= grid.n_y - (grid.n_x - k); ++l) {
                double best = level(0, k, l);
                for (int a = 1; k + a <= grid.n_x; ++a) {
                    const double cost =
                        shapes[0].impact_cost(grid.y(l + a)) - shapes[0].impact_cost(grid.y(l));
                    best = std::min(best, level(0, k + a, l + a) + cost);
                }
                out(0, k, l) = best;
            }
        }
        return out;
    }
};

TEST_F(ImpulseBruteForce, SweepEqualsFullInfimum) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 3.0);
    ValueLevel level(1, grid.x_nodes(), grid.y_nodes());
    for (double& v : level.data()) v = unit(rng);
    const ImpulseResult r = impulse_update(level, shapes, grid);
    const ValueLevel expected = brute_force(level);
    for (int k = 0; k <= grid.n_x; ++k) {
        for (int l = 0; l <= grid.n_y - (grid.n_x - k); ++l) {
            EXPECT_NEAR(r.values(0, k, l), expected(0, k, l), 1e-12);
            EXPECT_EQ(r.active(0, k, l) == 1, r.values(0, k, l) < level(0, k, l) * (1.0 - 1e-12));
        }
    }
}

TEST_F(ImpulseBruteForce, InflatedNodeIsRestored) {
    ValueLevel level = terminal_values(grid, shapes);
    const double original = level(0, 4, 6);
    level(0, 4, 6) += 1.0;
    const ImpulseResult r = impulse_update(level, shapes, grid);
    EXPECT_NEAR(r.values(0, 4, 6), original, 1e-12);
    EXPECT_EQ(r.active(0, 4, 6), 1);
    const ValueLevel expected = brute_force(level);
    for (int k = 0; k <= grid.n_x; ++k) {
        for (int l = 0; l <= grid.n_y - (grid.n_x - k); ++l) {
            EXPECT_NEAR(r.values(0, k, l), expected(0, k, l), 1e-12);
        }
    }
}

TEST_F(ImpulseBruteForce, Idempotent) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 3.0);
    ValueLevel level(1, grid.x_nodes(), grid.y_nodes());
    for (double& v : level.data()) v = unit(rng);
    const ImpulseResult once = impulse_update(level, shapes, grid);
    const ImpulseResult twice = impulse_update(once.values, shapes, grid);
    for (std::size_t n = 0; n < once.values.data().size(); ++n) {
        EXPECT_EQ(once.values.data()[n], twice.values.data()[n]);
        EXPECT_EQ(twice.active.data()[n], 0);
    }
}

TEST(Impulse, EdgeColumnUnchanged) {
    const SolverGrid grid = build_grid(grid_config(1.0, 2.0, 10, 20, 1.0));
    const std::vector<LobShape> shapes{LobShape::block(1.0)};
    ValueLevel level(1, grid.x_nodes(), grid.y_nodes(), 5.0);
    const ImpulseResult r = impulse_update(level, shapes, grid);
    for (int l = 0; l <= grid.n_y; ++l) {
        EXPECT_EQ(r.values(0, grid.n_x, l), 5.0);
        EXPECT_EQ(r.active(0, grid.n_x, l), 0);
    }
}

TEST(Classify, Examples) {
    ValueLevel f(1, 1, 3), g(1, 1, 3);
    f(0, 0, 0) = -1.0;
    g(0, 0, 0) = 0.0;
    f(0, 0, 1) = 0.0;
    g(0, 0, 1) = 0.0;
    f(0, 0, 2) = 0.0;
    g(0, 0, 2) = 1e-15;
    const RegionMask mask = classify_regions(f, g, 1e-12);
    EXPECT_EQ(mask(0, 0, 0), 1);
    EXPECT_EQ(mask(0, 0, 1), 0);
    EXPECT_EQ(mask(0, 0, 2), 0);
}

TEST(Classify, GradientResidualOfTerminalLevel) {
    // Block book: v = r y + r^2 / 2 with r = X_bar - x, so the forward differences give G = -dx / 2.
    const SolverGrid grid = build_grid(grid_config(2.0, 4.0, 20, 40));
    const std::vector<LobShape> shapes{LobShape::block(1.0)};
    const ValueLevel terminal = terminal_values(grid, shapes);
    const ValueLevel g = gradient_residual(terminal, shapes, grid);
    for (int k = 0; k < grid.n_x; ++k) {
        for (int l = 0; l < grid.n_y; ++l) EXPECT_NEAR(g(0, k, l), -0.5 * grid.dx, 1e-9);
    }
    EXPECT_TRUE(std::isinf(g(0, grid.n_x, 0)));
}

TEST(Solve, SingleStepIsOneComposition) {
    const GridConfig config = grid_config(2.0, 2.0, 2, 2, 1.0, 1);
    const SolverSetup setup = SolverSetup::build(
        config, model_with(CoefficientSpec{0.5, 0.1, 0.2, 1.0}, LobShape::power_law(0.8, -1.0), 0.5));
    const ValueSurface surface = solve(setup);
    ASSERT_EQ(surface.levels, (std::vector<int>{0, 1}));
    const std::span<const LobShape> shapes = setup.model.regimes.shapes;
    ValueLevel before = pde_step(terminal_values(setup.grid, shapes), setup.bands, setup.quadrature,
                                 GeneratorMatrix(1), 0.5, 1.0);
    for (int l = 0; l <= 2; ++l) before(0, 2, l) = 0.0;
    const ImpulseResult expected = impulse_update(before, shapes, setup.grid);
    for (std::size_t n = 0; n < expected.values.data().size(); ++n) {
        EXPECT_EQ(surface.values_at(0).data()[n], expected.values.data()[n]);
    }
}

TEST(Solve, DeterministicBlockBookClosedForm) {
    const SolverSetup setup = SolverSetup::build(grid_config(4.0, 4.0, 40, 40),
                                                 deterministic_block_book(), DriftScheme::Upwind);
    const ValueSurface surface = solve(setup, SolveOptions{RegionRule::ImpulseActive, 1000, {}, {}});
    EXPECT_NEAR(surface.values_at(0)(0, 0, 0), 16.0 / 6.0, 0.02 * 16.0 / 6.0);
}

TEST(Solve, ScalingPsiScalesValuesAndKeepsRegions) {
    const GridConfig config = grid_config(2.0, 2.5, 20, 25, 1.0);
    const CoefficientSpec spec{0.5, 0.1, 0.2, 1.0};
    const ValueSurface base =
        solve(SolverSetup::build(config, model_with(spec, LobShape::block(1.0), 0.5)));
    const ValueSurface scaled =
        solve(SolverSetup::build(config, model_with(spec, LobShape::block(1e-3), 0.5)));
    ASSERT_EQ(base.levels, scaled.levels);
    int exercise = 0;
    for (std::size_t s = 0; s < base.levels.size(); ++s) {
        const auto a = base.values[s].data();
        const auto b = scaled.values[s].data();
        for (std::size_t n = 0; n < a.size(); ++n) EXPECT_NEAR(b[n], 1e3 * a[n], 1e-9 * (1.0 + b[n]));
        const auto ma = base.exercise[s].data();
        const auto mb = scaled.exercise[s].data();
        for (std::size_t n = 0; n < ma.size(); ++n) {
            EXPECT_EQ(ma[n], mb[n]);
            exercise += ma[n];
        }
    }
    EXPECT_GT(exercise, 0);
}

TEST(Solve, BoundsAndMonotonicity) {
    const SolverSetup setup =
        SolverSetup::build(grid_config(4.0, 5.0, 40, 50), default_market_model());
    const ValueSurface surface = solve(setup);
    const ValueLevel terminal = terminal_values(setup.grid, setup.model.regimes.shapes);
    const double slack = 1e-6 * surface.scale;
    const SolverGrid& g = setup.grid;
    for (std::size_t s = 0; s < surface.levels.size(); ++s) {
        const ValueLevel& v = surface.values[s];
        for (int k = 0; k <= g.n_x; ++k) {
            for (int l = 0; l <= g.n_y; ++l) {
                ASSERT_GE(v(0, k, l), 0.0);
                ASSERT_LE(v(0, k, l), terminal(0, k, l) + 1e-8 * surface.scale);
                if (k < g.n_x) ASSERT_GE(v(0, k, l) + slack, v(0, k + 1, l));
                if (l < g.n_y) ASSERT_LE(v(0, k, l), v(0, k, l + 1) + slack);
                if (s + 1 < surface.levels.size()) {
                    ASSERT_LE(v(0, k, l), surface.values[s + 1](0, k, l) + slack);
                }
            }
            EXPECT_EQ(v(0, g.n_x, 0), 0.0);
        }
    }
    for (std::size_t n = 0; n < terminal.data().size(); ++n) {
        EXPECT_EQ(surface.values.back().data()[n], terminal.data()[n]);
    }
}

TEST(Solve, DuplicatedRegimeMatchesSingleRegime) {
    const GridConfig config = grid_config(2.0, 2.5, 20, 25, 2.0);
    const MarketModel single = default_market_model();
    RegimeModel doubled = single.regimes;
    doubled.shapes.push_back(doubled.shapes.front());
    doubled.generator = PiecewiseConstant<GeneratorMatrix>(GeneratorMatrix::two_state(0.3, 0.7));
    const ValueSurface one = solve(SolverSetup::build(config, single));
    const ValueSurface two =
        solve(SolverSetup::build(config, MarketModel::make(single.spec, doubled)));
    const ValueLevel& a = one.values_at(0);
    const ValueLevel& b = two.values_at(0);
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k < a.x_nodes(); ++k) {
            for (int l = 0; l < a.y_nodes(); ++l) EXPECT_NEAR(b(i, k, l), a(0, k, l), 1e-10);
        }
    }
}

TEST(Solve, WithModelMatchesFreshSetup) {
    const GridConfig config = grid_config(2.0, 2.5, 20, 25, 1.0);
    const SolverSetup base = SolverSetup::build(config, default_market_model());
    const MarketModel changed = model_with(CoefficientSpec{0.25, 0.2, 0.3, 1.5},
                                           LobShape::power_law(0.8, 0.5), 0.25);
    const ValueSurface reused = solve(base.with_model(changed));
    const ValueSurface fresh = solve(SolverSetup::build(config, changed));
    const auto a = reused.values_at(0).data();
    const auto b = fresh.values_at(0).data();
    for (std::size_t n = 0; n < a.size(); ++n) EXPECT_EQ(a[n], b[n]);
}

TEST(Solve, StrideAndObserver) {
    const SolverSetup setup =
        SolverSetup::build(grid_config(2.0, 2.5, 20, 25, 1.0), default_market_model());
    std::vector<int> seen;
    SolveOptions options{RegionRule::ImpulseActive, 50, {7}, {}};
    options.observer = [&](int n, const ValueLevel&, const RegionMask&) { seen.push_back(n); };
    const ValueSurface surface = solve(setup, options);
    ASSERT_EQ(static_cast<int>(seen.size()), setup.grid.n_t + 1);
    EXPECT_EQ(seen.front(), setup.grid.n_t);
    EXPECT_EQ(seen.back(), 0);
    EXPECT_TRUE(surface.has_level(0));
    EXPECT_TRUE(surface.has_level(7));
    EXPECT_TRUE(surface.has_level(50));
    EXPECT_TRUE(surface.has_level(setup.grid.n_t));
    EXPECT_FALSE(surface.has_level(8));
    EXPECT_THROW(surface.values_at(8), NumericalError);
}

TEST(Solve, ResidualRuleAgreesAwayFromTheEdge) {
    const SolverSetup setup =
        SolverSetup::build(grid_config(2.0, 2.5, 20, 25, 1.0), default_market_model());
    const ValueSurface active = solve(setup);
    const ValueSurface residual = solve(setup, SolveOptions{RegionRule::Residual, 1, {}, {}});
    // Same value levels; only the mask rule differs.
    for (std::size_t n = 0; n < active.values_at(0).data().size(); ++n) {
        EXPECT_EQ(active.values_at(0).data()[n], residual.values_at(0).data()[n]);
    }
    EXPECT_EQ(active.exercise_at(0)(0, 0, 0), 1);
    EXPECT_EQ(residual.exercise_at(0)(0, 0, 0), 1);
}

}  // namespace
}  // namespace optexec
