#include "optexec/errors.hpp"
#include "optexec/market_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace optexec {
namespace {

RegimeModel two_state(double q1, double q2, double lambda = 0.5) {
    RegimeModel model;
    model.shapes = {LobShape::power_law(0.8, 0.0), LobShape::power_law(0.8, 0.33)};
    model.generator = PiecewiseConstant<GeneratorMatrix>(GeneratorMatrix::two_state(q1, q2));
    model.intensity = PiecewiseConstant<double>(lambda);
    model.intensity_bound = lambda;
    return model;
}

TEST(MarketModel, EvalCoefficients) {
    const CoefficientSpec spec;
    EXPECT_DOUBLE_EQ(eval_coefficients(spec, 2.0).drift, 1.0);
    const auto zero = eval_coefficients(spec, 0.0);
    EXPECT_EQ(zero.drift, 0.0);
    EXPECT_EQ(zero.vol, 0.0);
    EXPECT_EQ(zero.jump_scale, 0.0);
    const auto top = eval_coefficients(spec, 5.0);
    EXPECT_DOUBLE_EQ(top.drift, 2.5);
    EXPECT_DOUBLE_EQ(top.vol, 0.5);
    EXPECT_DOUBLE_EQ(top.jump_scale, 1.0);

    const Coefficients coef = Coefficients::multiplicative(spec);
    EXPECT_DOUBLE_EQ(coef.jump(5.0, 2.0), 2.0);
}

TEST(MarketModel, SpecValidation) {
    EXPECT_NO_THROW(CoefficientSpec{}.validate());
    EXPECT_THROW((CoefficientSpec{-0.1, 0.1, 0.2, 1.0}.validate()), ConfigError);
    EXPECT_THROW((CoefficientSpec{0.5, 0.1, 0.2, 0.0}.validate()), ConfigError);
}

TEST(MarketModel, GeneratorValidation) {
    EXPECT_NO_THROW(validate_generator(GeneratorMatrix::two_state(0.2, 0.2)));
    EXPECT_NO_THROW(validate_generator(GeneratorMatrix(2)));
    try {
        validate_generator(GeneratorMatrix{{-1.0, 0.5}, {0.2, -0.2}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
    EXPECT_THROW(validate_generator(GeneratorMatrix{{0.1, -0.1}, {0.2, -0.2}}), ConfigError);
}

TEST(MarketModel, PiecewiseConstantSchedule) {
    const PiecewiseConstant<double> f({0.0, 1.0, 2.5}, {3.0, 4.0, 5.0});
    EXPECT_EQ(f.at(-1.0), 3.0);
    EXPECT_EQ(f.at(0.5), 3.0);
    EXPECT_EQ(f.at(1.0), 4.0);
    EXPECT_EQ(f.at(10.0), 5.0);
    EXPECT_THROW(PiecewiseConstant<double>({0.0, 0.0}, {1.0, 2.0}), ConfigError);
}

TEST(MarketModel, RegimeModelValidation) {
    RegimeModel model = two_state(0.2, 0.2);
    EXPECT_NO_THROW(model.validate());
    model.intensity = PiecewiseConstant<double>(0.8);
    EXPECT_THROW(model.validate(), ConfigError);  // above lambda_bar
    RegimeModel wrong = two_state(0.2, 0.2);
    wrong.generator = PiecewiseConstant<GeneratorMatrix>(GeneratorMatrix(3));
    EXPECT_THROW(wrong.validate(), ConfigError);
}

TEST(MarketModel, ZeroGeneratorGivesConstantPath) {
    const RegimeModel model = RegimeModel::single(LobShape::block(1.0), 0.5);
    const RegimePath path = sample_regime_path(model, 0.0, 4.0, 0, 123);
    EXPECT_EQ(path.switches(), 0);
    EXPECT_EQ(path.at(3.9), 0);
}

TEST(MarketModel, MeanSwitchCount) {
    const RegimeModel model = two_state(0.2, 0.2);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < n; ++p) {
        const double s = sample_regime_path(model, 0.0, 4.0, 0, 1000 + p).switches();
        sum += s;
        sq += s * s;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_NEAR(mean, 0.8, 3.0 * se);
}

TEST(MarketModel, StationaryOccupancy) {
    const RegimeModel model = two_state(0.2, 0.6);
    const int n = 400;
    const double horizon = 500.0;
    std::vector<double> fractions;
    for (int p = 0; p < n; ++p) {
        const RegimePath path = sample_regime_path(model, 0.0, horizon, p % 2, 77 + p);
        double in_first = 0.0;
        for (std::size_t s = 0; s < path.states.size(); ++s) {
            const double end = s + 1 < path.times.size() ? path.times[s + 1] : horizon;
            if (path.states[s] == 0) in_first += end - path.times[s];
        }
        fractions.push_back(in_first / horizon);
    }
    const double mean = std::accumulate(fractions.begin(), fractions.end(), 0.0) / n;
    double var = 0.0;
    for (double f : fractions) var += (f - mean) * (f - mean);
    const double se = std::sqrt(var / (n - 1) / n);
    EXPECT_NEAR(mean, 0.75, 3.0 * se);
}

TEST(MarketModel, HoldingTimesAreExponential) {
    // Kolmogorov-Smirnov against Exp(0.2) on first holding times.
    const RegimeModel model = two_state(0.2, 0.2);
    std::vector<double> holding;
    for (int p = 0; holding.size() < 10000; ++p) {
        const RegimePath path = sample_regime_path(model, 0.0, 400.0, 0, 5000 + p);  // P(no switch) = e^-80
        ASSERT_GE(path.times.size(), 2u);
        holding.push_back(path.times[1]);
    }
    std::sort(holding.begin(), holding.end());
    double d = 0.0;
    const double n = static_cast<double>(holding.size());
    for (std::size_t k = 0; k < holding.size(); ++k) {
        const double cdf = 1.0 - std::exp(-0.2 * holding[k]);
        d = std::max({d, std::abs(cdf - k / n), std::abs(cdf - (k + 1) / n)});
    }
    EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(MarketModel, DeterministicDecay) {
    const MarketModel model = MarketModel::make(CoefficientSpec{0.5, 0.0, 0.0, 1.0},
                                                RegimeModel::single(LobShape::block(1.0), 0.0));
    const double dt = 0.01;
    const SimulationPath path = simulate_volume_path(model, 0.0, 2.0, 1.0, 0, {}, dt, 1);
    ASSERT_EQ(path.times.size(), 201u);
    for (std::size_t s = 0; s < path.times.size(); ++s) {
        EXPECT_NEAR(path.y[s], std::pow(1.0 - 0.5 * dt, static_cast<double>(s)), 1e-12);
        EXPECT_NEAR(path.y[s], std::exp(-0.5 * path.times[s]), 0.01);
    }
}

TEST(MarketModel, MeanJumpCount) {
    const MarketModel model = default_market_model();
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < n; ++p) {
        const double c = static_cast<double>(
            simulate_volume_path(model, 0.0, 4.0, 1.0, 0, {}, 0.5, 900 + p).jump_marks.size());
        sum += c;
        sq += c * c;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_NEAR(mean, 2.0, 3.0 * se);
}

TEST(MarketModel, BlockPurchaseShiftsVolume) {
    const MarketModel model = MarketModel::make(CoefficientSpec{0.5, 0.0, 0.0, 1.0},
                                                RegimeModel::single(LobShape::block(1.0), 0.0));
    PurchaseSchedule schedule;
    schedule.blocks.push_back({0.5, 1.0});
    const SimulationPath path = simulate_volume_path(model, 0.0, 1.0, 0.0, 0, schedule, 0.1, 3);
    EXPECT_EQ(path.y[4], 0.0);
    EXPECT_DOUBLE_EQ(path.y[5], 1.0);
    EXPECT_DOUBLE_EQ(path.purchases[5], 1.0);
    EXPECT_DOUBLE_EQ(path.purchases.back(), 1.0);
}

TEST(MarketModel, ReproducibleAndNonNegative) {
    MarketModel model = default_market_model();
    model = MarketModel::make(CoefficientSpec{0.5, 0.8, 0.2, 1.0}, model.regimes);
    const SimulationPath a = simulate_volume_path(model, 0.0, 4.0, 0.5, 0, {}, 0.01, 99);
    const SimulationPath b = simulate_volume_path(model, 0.0, 4.0, 0.5, 0, {}, 0.01, 99);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.jump_marks.size(), b.jump_marks.size());
    for (double y : a.y) EXPECT_GE(y, 0.0);
}

TEST(MarketModel, ComparisonProperty) {
    const MarketModel model = default_market_model();
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const SimulationPath low = simulate_volume_path(model, 0.0, 4.0, 0.5, 0, {}, 0.01, seed);
        const SimulationPath high = simulate_volume_path(model, 0.0, 4.0, 0.9, 0, {}, 0.01, seed);
        for (std::size_t s = 0; s < low.y.size(); ++s) ASSERT_LE(low.y[s], high.y[s]);
    }
}

}  // namespace
}  // namespace optexec
