#include "optexec/market_model.hpp"

#include "optexec/errors.hpp"
#include "optexec/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace optexec {

void CoefficientSpec::validate() const {
    auto require = [](bool ok, const char* key, double value) {
        if (!ok) {
            std::ostringstream msg;
            msg << "dynamics." << key << " out of range: " << value;
            throw ConfigError(msg.str());
        }
    };
    require(c >= 0.0 && std::isfinite(c), "c", c);
    require(d >= 0.0 && std::isfinite(d), "d", d);
    require(e >= 0.0 && std::isfinite(e), "e", e);
    require(eta > 0.0 && std::isfinite(eta), "eta", eta);
}

CoefficientValues eval_coefficients(const CoefficientSpec& spec, double y) {
    return {spec.c * y, spec.d * y, spec.e * y};
}

Coefficients Coefficients::multiplicative(const CoefficientSpec& spec) {
    const double c = spec.c, d = spec.d, e = spec.e;
    return {
        [c](double y) { return c * y; },
        [d](double y) { return d * y; },
        [e](double y, double z) { return e * y * z; },
    };
}

template <class T>
PiecewiseConstant<T>::PiecewiseConstant(std::vector<double> starts, std::vector<T> values)
    : starts_(std::move(starts)), values_(std::move(values)) {
    if (starts_.empty() || starts_.size() != values_.size()) {
        throw ConfigError("piecewise-constant schedule needs one start time per value");
    }
    for (std::size_t k = 1; k < starts_.size(); ++k) {
        if (!(starts_[k] > starts_[k - 1])) {
            throw ConfigError("piecewise-constant schedule start times must increase");
        }
    }
}

template <class T>
const T& PiecewiseConstant<T>::at(double t) const {
    if (values_.empty()) throw ConfigError("empty piecewise-constant schedule");
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    if (it == starts_.begin()) return values_.front();
    return values_[static_cast<std::size_t>(it - starts_.begin()) - 1];
}

template class PiecewiseConstant<double>;
template class PiecewiseConstant<GeneratorMatrix>;

GeneratorMatrix::GeneratorMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : m_(static_cast<int>(rows.size())) {
    rates_.reserve(static_cast<std::size_t>(m_) * m_);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != m_) throw ConfigError("generator must be square");
        rates_.insert(rates_.end(), row.begin(), row.end());
    }
}

GeneratorMatrix GeneratorMatrix::two_state(double q1, double q2) {
    return GeneratorMatrix{{-q1, q1}, {q2, -q2}};
}

void validate_generator(const GeneratorMatrix& q, double tol) {
    for (int i = 0; i < q.size(); ++i) {
        double row_sum = 0.0;
        for (int j = 0; j < q.size(); ++j) {
            const double rate = q(i, j);
            if (!std::isfinite(rate)) {
                throw ConfigError("generator row " + std::to_string(i + 1) + " has a non-finite entry");
            }
            if (j != i && rate < 0.0) {
                throw ConfigError("generator row " + std::to_string(i + 1) +
                                  " has a negative off-diagonal rate");
            }
            row_sum += rate;
        }
        if (std::abs(row_sum) > tol) {
            std::ostringstream msg;
            msg << "generator row " << i + 1 << " sums to " << row_sum << " instead of 0";
            throw ConfigError(msg.str());
        }
    }
}

void RegimeModel::validate() const {
    const int m = regimes();
    if (m < 1) throw ConfigError("regimes.m must be at least 1");
    for (const auto& q : generator.values()) {
        if (q.size() != m) {
            throw ConfigError("regimes.q_matrix must be " + std::to_string(m) + "x" +
                              std::to_string(m));
        }
        validate_generator(q);
    }
    if (generator.values().empty()) throw ConfigError("regimes.q_matrix missing");
    if (intensity.values().empty()) throw ConfigError("regimes.lambda missing");
    for (double lambda : intensity.values()) {
        if (!(lambda >= 0.0) || lambda > intensity_bound) {
            std::ostringstream msg;
            msg << "regimes.lambda value " << lambda << " outside [0, " << intensity_bound << "]";
            throw ConfigError(msg.str());
        }
    }
}

RegimeModel RegimeModel::single(LobShape shape, double lambda) {
    RegimeModel model;
    model.shapes.push_back(std::move(shape));
    model.generator = PiecewiseConstant<GeneratorMatrix>(GeneratorMatrix(1));
    model.intensity = PiecewiseConstant<double>(lambda);
    model.intensity_bound = lambda;
    return model;
}

MarketModel MarketModel::make(const CoefficientSpec& spec, RegimeModel regimes) {
    MarketModel model{spec, Coefficients::multiplicative(spec), std::move(regimes)};
    model.validate();
    return model;
}

void MarketModel::validate() const {
    spec.validate();
    regimes.validate();
    if (!coefficients.drift || !coefficients.vol || !coefficients.jump) {
        throw ConfigError("market model coefficients are incomplete");
    }
}

MarketModel default_market_model() {
    return MarketModel::make(CoefficientSpec{},
                             RegimeModel::single(LobShape::power_law(0.8, -1.0), 0.5));
}

int RegimePath::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return states.front();
    return states[static_cast<std::size_t>(it - times.begin()) - 1];
}

RegimePath sample_regime_path(const RegimeModel& model, double t0, double t_end, int i0,
                              std::uint64_t seed) {
    RegimePath path;
    path.times.push_back(t0);
    path.states.push_back(i0);
    path.end = t_end;

    double rate_bound = 0.0;
    for (const auto& q : model.generator.values()) {
        for (int i = 0; i < q.size(); ++i) rate_bound = std::max(rate_bound, q.exit_rate(i));
    }
    if (rate_bound <= 0.0) return path;

    Rng rng = make_stream(seed, Stream::Regime);
    std::exponential_distribution<double> holding(rate_bound);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Thinning against the largest exit rate handles piecewise-constant generators.
    int state = i0;
    double t = t0;
    while (true) {
        t += holding(rng);
        if (t >= t_end) break;
        const GeneratorMatrix& q = model.generator.at(t);
        const double exit = q.exit_rate(state);
        if (unit(rng) * rate_bound >= exit) continue;
        double target = unit(rng) * exit;
        int next = state;
        for (int j = 0; j < q.size(); ++j) {
            if (j == state) continue;
            next = j;
            target -= q(state, j);
            if (target < 0.0) break;
        }
        state = next;
        path.times.push_back(t);
        path.states.push_back(state);
    }
    return path;
}

double PurchaseSchedule::amount(double t_begin, double t_end) const {
    double total = 0.0;
    for (const Block& b : blocks) {
        if (b.time >= t_begin && b.time < t_end) total += b.size;
    }
    if (rate > 0.0) {
        const double lo = std::max(t_begin, rate_begin);
        const double hi = std::min(t_end, rate_end);
        if (hi > lo) total += rate * (hi - lo);
    }
    return total;
}

SimulationPath simulate_volume_path(const MarketModel& model, double t0, double t_end, double y0,
                                    int i0, const PurchaseSchedule& schedule, double dt_sim,
                                    std::uint64_t seed) {
    if (!(dt_sim > 0.0)) throw ConfigError("simulation time step must be positive");
    if (y0 < 0.0) throw DomainError("initial volume effect must be non-negative");

    const RegimePath regimes = sample_regime_path(model.regimes, t0, t_end, i0, seed);
    Rng diffusion = make_stream(seed, Stream::Diffusion);
    Rng jumps = make_stream(seed, Stream::Jumps);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> mark(model.spec.eta);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Coefficients& coef = model.coefficients;

    SimulationPath path;
    const auto steps = static_cast<std::size_t>(std::ceil((t_end - t0) / dt_sim - 1e-9));
    path.times.reserve(steps + 1);
    path.y.reserve(steps + 1);

    double y = y0;
    double bought = 0.0;
    double t = t0;
    for (std::size_t s = 0; s <= steps; ++s) {
        const bool last = s == steps;
        const double dt = last ? 0.0 : std::min(dt_sim, t_end - t);
        const double purchase = last ? schedule.amount(t, t + 1e-12) : schedule.amount(t, t + dt);
        y += purchase;
        bought += purchase;
        path.times.push_back(t);
        path.y.push_back(y);
        path.regime.push_back(regimes.at(t));
        path.purchases.push_back(bought);
        if (last) break;

        // Jump arrivals: Poisson count, uniformly placed in the step, all driven by the pre-step state.
        const double lambda = model.regimes.intensity.at(t);
        std::poisson_distribution<int> count(lambda * dt);
        const int n_jumps = lambda > 0.0 ? count(jumps) : 0;
        double jump_total = 0.0;
        for (int j = 0; j < n_jumps; ++j) {
            const double when = t + unit(jumps) * dt;
            const double z = mark(jumps);
            const double size = coef.jump(y, z);
            jump_total += size;
            path.jump_marks.push_back({when, z, size});
        }
        const double dw = std::sqrt(dt) * normal(diffusion);
        y = std::max(0.0, y - coef.drift(y) * dt + coef.vol(y) * dw + jump_total);
        t = t0 + static_cast<double>(s + 1) * dt_sim;
        if (s + 1 == steps) t = t_end;
    }
    return path;
}

}  // namespace optexec
