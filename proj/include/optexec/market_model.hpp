#pragma once

#include "optexec/lob_shape.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace optexec {

/// Multiplicative volume-effect coefficients: h(y) = c y, sigma(y) = d y, q(y, z) = e y z,
/// with jump marks z ~ Exp(eta).
struct CoefficientSpec {
    double c = 0.5;    ///< resilience rate
    double d = 0.1;    ///< volatility scale
    double e = 0.2;    ///< jump scale
    double eta = 1.0;  ///< rate of the exponential jump law

    void validate() const;
};

struct CoefficientValues {
    double drift = 0.0;
    double vol = 0.0;
    double jump_scale = 0.0;
};

CoefficientValues eval_coefficients(const CoefficientSpec& spec, double y);

/// General coefficient set for dY = -h(Y) du + sigma(Y) dW + q(Y, z) M(du, dz).
/// Lipschitz and linear-growth conditions are the caller's responsibility.
struct Coefficients {
    std::function<double(double)> drift;        ///< h
    std::function<double(double)> vol;          ///< sigma
    std::function<double(double, double)> jump; ///< q

    static Coefficients multiplicative(const CoefficientSpec& spec);
};

/// Right-continuous step function on [start, +inf): value k holds on [starts[k], starts[k+1]).
template <class T>
class PiecewiseConstant {
public:
    PiecewiseConstant() = default;
    explicit PiecewiseConstant(T value) : starts_{0.0}, values_{std::move(value)} {}
    PiecewiseConstant(std::vector<double> starts, std::vector<T> values);

    const T& at(double t) const;
    std::span<const double> starts() const noexcept { return starts_; }
    std::span<const T> values() const noexcept { return values_; }
    std::vector<T>& mutable_values() noexcept { return values_; }

private:
    std::vector<double> starts_;
    std::vector<T> values_;
};

/// Dense m x m generator of the liquidity-regime chain.
class GeneratorMatrix {
public:
    GeneratorMatrix() = default;
    explicit GeneratorMatrix(int m) : m_(m), rates_(static_cast<std::size_t>(m) * m, 0.0) {}
    GeneratorMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static GeneratorMatrix two_state(double q1, double q2);

    int size() const noexcept { return m_; }
    double operator()(int i, int j) const { return rates_[static_cast<std::size_t>(i) * m_ + j]; }
    double& operator()(int i, int j) { return rates_[static_cast<std::size_t>(i) * m_ + j]; }
    /// -Q_ii
    double exit_rate(int i) const { return -(*this)(i, i); }

private:
    int m_ = 0;
    std::vector<double> rates_;
};

/// Throws ConfigError naming the first row with a negative off-diagonal or a non-zero row sum.
void validate_generator(const GeneratorMatrix& q, double tol = 1e-12);

struct RegimeModel {
    std::vector<LobShape> shapes;                   ///< one per regime
    PiecewiseConstant<GeneratorMatrix> generator;
    PiecewiseConstant<double> intensity;            ///< jump arrival rate lambda_t
    double intensity_bound = 0.0;                   ///< lambda_bar

    int regimes() const noexcept { return static_cast<int>(shapes.size()); }
    void validate() const;

    static RegimeModel single(LobShape shape, double lambda);
};

struct MarketModel {
    CoefficientSpec spec;
    Coefficients coefficients;
    RegimeModel regimes;

    /// Multiplicative coefficients built from `spec`.
    static MarketModel make(const CoefficientSpec& spec, RegimeModel regimes);
    void validate() const;
};

/// Default single-regime model (square-root book, kappa 0.8, gamma -1, lambda 0.5).
MarketModel default_market_model();

struct RegimePath {
    std::vector<double> times;  ///< entry time of each visited state; times[0] = t0
    std::vector<int> states;
    double end = 0.0;

    int at(double t) const;
    int switches() const noexcept { return static_cast<int>(states.size()) - 1; }
};

RegimePath sample_regime_path(const RegimeModel& model, double t0, double t_end, int i0,
                              std::uint64_t seed);

struct JumpMark {
    double time = 0.0;
    double mark = 0.0;  ///< z drawn from the jump law
    double size = 0.0;  ///< q(Y, z) added to the volume effect
};

/// Sampled trajectory; y[s] is the volume effect right after any purchase at times[s],
/// so the pre-purchase value is y[s] - (purchases[s] - purchases[s-1]).
struct SimulationPath {
    std::vector<double> times;
    std::vector<double> y;
    std::vector<int> regime;
    std::vector<double> purchases;  ///< cumulative bought volume
    std::vector<JumpMark> jump_marks;
};

struct PurchaseSchedule {
    struct Block {
        double time = 0.0;
        double size = 0.0;
    };
    std::vector<Block> blocks;
    double rate = 0.0;  ///< continuous purchase rate, applied on [rate_begin, rate_end)
    double rate_begin = 0.0;
    double rate_end = 0.0;

    /// Volume bought on [t_begin, t_end).
    double amount(double t_begin, double t_end) const;
};

/// Euler-Maruyama with compound-Poisson jumps; purchases are applied at the start of each step.
/// Brownian increments, jump marks and regime switches come from independent seeded streams.
SimulationPath simulate_volume_path(const MarketModel& model, double t0, double t_end, double y0,
                                    int i0, const PurchaseSchedule& schedule, double dt_sim,
                                    std::uint64_t seed);

}  // namespace optexec
