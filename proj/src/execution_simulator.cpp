#include "optexec/execution_simulator.hpp"

#include "optexec/errors.hpp"
#include "optexec/random.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

namespace optexec {

ExecutionPolicy ExecutionPolicy::from_boundary(FreeBoundarySurface boundary) {
    if (boundary.levels().empty()) throw ConfigError("policy needs at least one boundary level");
    ExecutionPolicy policy;
    policy.grid_ = boundary.grid();
    policy.nearest_.resize(policy.grid_.n_t + 1);
    for (int n = 0; n <= policy.grid_.n_t; ++n) policy.nearest_[n] = boundary.nearest_level(n);
    policy.boundary_ = std::make_shared<const FreeBoundarySurface>(std::move(boundary));
    return policy;
}

ExecutionPolicy ExecutionPolicy::immediate(const SolverGrid& grid) {
    ExecutionPolicy policy;
    policy.grid_ = grid;
    return policy;
}

const FreeBoundarySurface& ExecutionPolicy::boundary() const {
    if (!boundary_) throw ConfigError("immediate-purchase policy has no boundary");
    return *boundary_;
}

double ExecutionPolicy::action(double t, int regime, double x, double y) const {
    const double remaining = grid_.x_bar - x;
    if (remaining <= 1e-12 * grid_.x_bar) return 0.0;
    if (!boundary_ || t >= grid_.t_horizon - 1e-12 * grid_.t_horizon) return remaining;

    const int n = nearest_[std::clamp(static_cast<int>(std::lround(t / grid_.dt)), 0, grid_.n_t)];
    const int k = std::clamp(static_cast<int>(std::lround(x / grid_.dx)), 0, grid_.n_x);
    if (k >= grid_.n_x) return 0.0;
    auto exercise = [&](int kk, double yy) {
        const int top = boundary_->index(n, regime, kk);
        return top != FreeBoundarySurface::kNone && std::lround(yy / grid_.dy) <= top;
    };
    if (!exercise(k, y)) return 0.0;
    for (int j = 1; k + j <= grid_.n_x; ++j) {
        if (k + j == grid_.n_x) return remaining;
        if (!exercise(k + j, y + j * grid_.dx)) return std::min(j * grid_.dx, remaining);
    }
    return remaining;
}

SimulationPath simulate_controlled_path(const ExecutionPolicy& policy, const MarketModel& model,
                                        double t0, int i0, double x0, double y0, double dt_sim,
                                        std::uint64_t seed) {
    const SolverGrid& grid = policy.grid();
    const double t_end = grid.t_horizon;
    if (!(dt_sim > 0.0)) throw ConfigError("simulate.dt_sim must be positive");
    if (t0 < 0.0 || t0 > t_end) throw DomainError("start time outside [0, T]");
    if (x0 < 0.0 || x0 > grid.x_bar) throw DomainError("start position outside [0, X_bar]");
    if (y0 < 0.0) throw DomainError("initial volume effect must be non-negative");
    if (i0 < 0 || i0 >= model.regimes.regimes()) throw DomainError("start regime out of range");

    const RegimePath regimes = sample_regime_path(model.regimes, t0, t_end, i0, seed);
    Rng diffusion = make_stream(seed, Stream::Diffusion);
    Rng jumps = make_stream(seed, Stream::Jumps);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::exponential_distribution<double> mark(model.spec.eta);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Coefficients& coef = model.coefficients;

    const auto steps = static_cast<std::size_t>(std::max(0.0, std::ceil((t_end - t0) / dt_sim - 1e-9)));
    SimulationPath path;
    path.times.reserve(steps + 1);
    path.y.reserve(steps + 1);
    path.regime.reserve(steps + 1);
    path.purchases.reserve(steps + 1);

    double t = t0;
    double x = x0;
    double y = y0;
    for (std::size_t s = 0;; ++s) {
        const int regime = regimes.at(t);
        const double a = s == steps ? grid.x_bar - x : policy.action(t, regime, x, y);
        if (a > 0.0) {
            x += a;
            y += a;
        }
        path.times.push_back(t);
        path.y.push_back(y);
        path.regime.push_back(regime);
        path.purchases.push_back(x - x0);
        if (s == steps) break;

        const double t_next = s + 1 == steps ? t_end : t0 + static_cast<double>(s + 1) * dt_sim;
        const double dt = t_next - t;
        const double lambda = model.regimes.intensity.at(t);
        double jump_total = 0.0;
        if (lambda > 0.0) {
            std::poisson_distribution<int> count(lambda * dt);
            const int n_jumps = count(jumps);
            for (int j = 0; j < n_jumps; ++j) {
                const double when = t + unit(jumps) * dt;
                const double z = mark(jumps);
                const double size = coef.jump(y, z);
                jump_total += size;
                path.jump_marks.push_back({when, z, size});
            }
        }
        const double dw = std::sqrt(dt) * normal(diffusion);
        y = std::max(0.0, y - coef.drift(y) * dt + coef.vol(y) * dw + jump_total);
        t = t_next;
    }
    return path;
}

double account_cost(const SimulationPath& path, std::span<const LobShape> shapes) {
    double cost = 0.0;
    double bought = 0.0;
    for (std::size_t s = 0; s < path.times.size(); ++s) {
        const double delta = path.purchases[s] - bought;
        bought = path.purchases[s];
        if (delta <= 0.0) continue;
        const LobShape& shape = shapes[path.regime[s]];
        cost += shape.block_cost(path.y[s] - delta, delta);
    }
    return cost;
}

CostStats simulate_execution(const ExecutionPolicy& policy, const MarketModel& model, double t0,
                             int i0, double x0, double y0, const SimulationOptions& options) {
    if (options.n_paths < 1) throw ConfigError("simulate.n_paths must be at least 1");
    const double dt_sim = options.dt_sim > 0.0 ? options.dt_sim : policy.grid().dt;
    const std::size_t n = options.n_paths;
    std::vector<double> costs(n);

    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const SimulationPath path = simulate_controlled_path(
                policy, model, t0, i0, x0, y0, dt_sim, derive_seed(options.seed, p));
            costs[p] = account_cost(path, model.regimes.shapes);
        }
    };

    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, n));
    if (threads == 1) {
        run(0, n);
    } else {
        std::vector<std::future<void>> tasks;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t begin = 0; begin < n; begin += chunk) {
            tasks.push_back(std::async(std::launch::async, run, begin, std::min(n, begin + chunk)));
        }
        for (auto& task : tasks) task.get();
    }

    // Reduce in path order so the result is independent of the scheduling.
    CostStats stats;
    stats.n_paths = n;
    stats.seed = options.seed;
    double sum = 0.0;
    for (double c : costs) sum += c;
    stats.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double c : costs) sq += (c - stats.mean) * (c - stats.mean);
    stats.std_error = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    if (options.keep_costs) stats.costs = std::move(costs);
    return stats;
}

}  // namespace optexec
