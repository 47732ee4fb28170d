#pragma once

#include "optexec/free_boundary.hpp"
#include "optexec/market_model.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace optexec {

/// Feedback rule derived from an exercise boundary. States are snapped to the nearest grid node
/// and the nearest recorded time level. Whatever is left is bought at the horizon.
class ExecutionPolicy {
public:
    static ExecutionPolicy from_boundary(FreeBoundarySurface boundary);
    /// Buys the whole remaining position at the first decision time.
    static ExecutionPolicy immediate(const SolverGrid& grid);

    const SolverGrid& grid() const noexcept { return grid_; }
    bool is_immediate() const noexcept { return boundary_ == nullptr; }
    const FreeBoundarySurface& boundary() const;

    /// Block size to buy now; 0 in continuation, otherwise the smallest grid-aligned step along
    /// the diagonal that reaches continuation, capped at X_bar - x.
    double action(double t, int regime, double x, double y) const;

private:
    ExecutionPolicy() = default;

    SolverGrid grid_;
    std::shared_ptr<const FreeBoundarySurface> boundary_;
    std::vector<int> nearest_;  ///< time level -> recorded level used for lookups
};

inline double policy_action(const ExecutionPolicy& policy, double t, int regime, double x, double y) {
    return policy.action(t, regime, x, y);
}

struct CostStats {
    double mean = 0.0;
    double std_error = 0.0;  ///< sample standard deviation / sqrt(n_paths)
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> costs;  ///< per path, in path order
};

struct SimulationOptions {
    std::size_t n_paths = 10000;
    double dt_sim = 0.0;  ///< 0 uses the grid time step
    std::uint64_t seed = 0;
    bool keep_costs = false;
    unsigned threads = 0;  ///< 0 picks the hardware concurrency
};

/// One controlled trajectory; purchases are recorded as blocks at the decision times.
SimulationPath simulate_controlled_path(const ExecutionPolicy& policy, const MarketModel& model,
                                        double t0, int i0, double x0, double y0, double dt_sim,
                                        std::uint64_t seed);

/// Monte Carlo estimate of the excess cost of `policy` from (t0, i0, x0, y0). Path p uses the
/// seed derive_seed(options.seed, p), so results do not depend on the thread count.
CostStats simulate_execution(const ExecutionPolicy& policy, const MarketModel& model, double t0,
                             int i0, double x0, double y0, const SimulationOptions& options);

/// Sum over recorded steps of Phi(Y + Delta) - Phi(Y), with Y the pre-purchase volume effect and
/// Delta the volume bought at that step, priced with the regime active at that step.
double account_cost(const SimulationPath& path, std::span<const LobShape> shapes);

}  // namespace optexec
