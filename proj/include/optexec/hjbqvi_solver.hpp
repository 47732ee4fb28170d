#pragma once

#include "optexec/discretization.hpp"
#include "optexec/market_model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace optexec {

/// Dense per-level array indexed [regime][x node][y node]; y is the contiguous axis.
template <class T>
class NodeArray {
public:
    NodeArray() = default;
    NodeArray(int regimes, int x_nodes, int y_nodes, T fill = T{})
        : regimes_(regimes), x_nodes_(x_nodes), y_nodes_(y_nodes),
          data_(static_cast<std::size_t>(regimes) * x_nodes * y_nodes, fill) {}

    int regimes() const noexcept { return regimes_; }
    int x_nodes() const noexcept { return x_nodes_; }
    int y_nodes() const noexcept { return y_nodes_; }

    T& operator()(int i, int k, int l) { return data_[index(i, k, l)]; }
    const T& operator()(int i, int k, int l) const { return data_[index(i, k, l)]; }

    std::span<T> column(int i, int k) {
        return {data_.data() + index(i, k, 0), static_cast<std::size_t>(y_nodes_)};
    }
    std::span<const T> column(int i, int k) const {
        return {data_.data() + index(i, k, 0), static_cast<std::size_t>(y_nodes_)};
    }
    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    bool same_shape(const NodeArray& other) const noexcept {
        return regimes_ == other.regimes_ && x_nodes_ == other.x_nodes_ && y_nodes_ == other.y_nodes_;
    }

private:
    std::size_t index(int i, int k, int l) const {
        return (static_cast<std::size_t>(i) * x_nodes_ + k) * y_nodes_ + l;
    }

    int regimes_ = 0;
    int x_nodes_ = 0;
    int y_nodes_ = 0;
    std::vector<T> data_;
};

using ValueLevel = NodeArray<double>;
/// 1 marks the exercise region, 0 the continuation region.
using RegionMask = NodeArray<std::uint8_t>;

enum class DriftScheme { Centered, Upwind };

/**
 * Rows of the generator matrix A of 1/2 sigma^2 d2/dy2 - h d/dy on the y nodes.
 * sub[l], diag[l], super[l] multiply v[l-1], v[l], v[l+1]. Row 0 uses the one-sided
 * 3-point second difference without drift (extra entry first_row_far, column 2). Row n_y
 * assumes v_yy = 0 and keeps a one-sided drift term; last_row_far (column n_y - 2) is
 * kept for bands built by hand.
 */
struct DiffusionBands {
    int n_y = 0;
    std::vector<double> sub;
    std::vector<double> diag;
    std::vector<double> super;
    double first_row_far = 0.0;
    double last_row_far = 0.0;
};

DiffusionBands assemble_diffusion(const SolverGrid& grid, const Coefficients& coefficients,
                                  DriftScheme scheme = DriftScheme::Centered);

/// Factorization of (I - dt A) for repeated solves; the two corner entries are folded
/// into the neighbouring rows before Thomas elimination.
class BandedSolver {
public:
    BandedSolver(const DiffusionBands& bands, double dt);

    void solve(std::span<double> rhs) const;
    double dt() const noexcept { return dt_; }

private:
    double dt_;
    int n_ = 0;
    double first_fold_ = 0.0;  ///< multiple of row 1 subtracted from row 0
    double last_fold_ = 0.0;   ///< multiple of row n-2 subtracted from row n-1
    std::vector<double> lower_;  ///< elimination multipliers
    std::vector<double> pivot_;
    std::vector<double> upper_;
};

/// Total cost of buying the remaining X_bar - x at once: Phi_i(y + X_bar - x) - Phi_i(y).
ValueLevel terminal_values(const SolverGrid& grid, std::span<const LobShape> shapes);

/// Largest terminal value on the grid; the reference magnitude for tolerances.
double value_scale(const ValueLevel& terminal);

/// One backward step of the continuation PDE: diffusion implicit, jumps and regime coupling explicit.
ValueLevel pde_step(const ValueLevel& known, const BandedSolver& solver,
                    const QuadratureTable& quadrature, const GeneratorMatrix& q, double lambda);
ValueLevel pde_step(const ValueLevel& known, const DiffusionBands& bands,
                    const QuadratureTable& quadrature, const GeneratorMatrix& q, double lambda,
                    double dt);

struct ImpulseResult {
    ValueLevel values;
    RegionMask active;  ///< nodes where a block purchase lowered the value by more than 1e-12 relative
};

/// v(x, y) <- min over grid-aligned a of v(x + a, y + a) + Phi(y + a) - Phi(y), computed by one
/// backward sweep in x. Above y_bar the value is extrapolated linearly from the top two rows
/// (never below the top-row value); where the diagonal leaves the grid the exact cost of buying
/// everything, Phi(y + X_bar - x) - Phi(y), is also a candidate.
ImpulseResult impulse_update(const ValueLevel& level, std::span<const LobShape> shapes,
                             const SolverGrid& grid);

/// G = -D_x^+ v - D_y^+ v - psi(y_l); the top row reuses v(y_bar) above y_bar.
/// Nodes on x = X_bar get -inf (nothing left to buy).
ValueLevel gradient_residual(const ValueLevel& level, std::span<const LobShape> shapes,
                             const SolverGrid& grid);

/// PDE residual F of the post-obstacle level; zero wherever the obstacle did not bind.
ValueLevel pde_residual(const ValueLevel& before_obstacle, const ValueLevel& after_obstacle,
                        const DiffusionBands& bands, double dt);

/// Exercise where F < G; |F - G| <= tie_tol counts as continuation.
RegionMask classify_regions(const ValueLevel& pde_res, const ValueLevel& gradient_res,
                            double tie_tol);
RegionMask classify_regions(const ValueLevel& before_obstacle, const ValueLevel& after_obstacle,
                            const ValueLevel& gradient_res, const DiffusionBands& bands, double dt,
                            double tie_tol);

/// Grid, model and every precomputed table needed by the time stepping.
struct SolverSetup {
    GridConfig config;
    SolverGrid grid;
    MarketModel model;
    QuadratureTable quadrature;
    DiffusionBands bands;
    DriftScheme scheme = DriftScheme::Centered;

    static SolverSetup build(const GridConfig& config, MarketModel model,
                             DriftScheme scheme = DriftScheme::Centered);
    /// Swaps the model, reassembling only the tables that depend on changed dynamics.
    /// Assumes the coefficients are the multiplicative family built from `model.spec`.
    SolverSetup with_model(MarketModel model) const;
};

/// How the exercise mask of each level is formed.
enum class RegionRule {
    ImpulseActive,  ///< nodes where the diagonal minimum is attained only at a > 0 (beyond rounding)
    Residual,       ///< F < G with the nodal forward-difference gradient residual
};

struct SolveOptions {
    RegionRule region_rule = RegionRule::ImpulseActive;
    /// Levels kept in the surface: multiples of the stride, plus 0, n_t and every entry of keep_levels.
    int level_stride = 1;
    std::vector<int> keep_levels;
    /// Called for every computed level, including the terminal one.
    std::function<void(int level, const ValueLevel& values, const RegionMask& exercise)> observer;
};

struct ValueSurface {
    SolverGrid grid;
    std::vector<int> levels;  ///< stored time levels, ascending
    std::vector<ValueLevel> values;
    std::vector<RegionMask> exercise;
    double scale = 0.0;

    int regimes() const { return values.empty() ? 0 : values.front().regimes(); }
    bool has_level(int n) const;
    const ValueLevel& values_at(int n) const;
    const RegionMask& exercise_at(int n) const;
    /// Stored level closest to time t.
    int nearest_level(double t) const;
};

ValueSurface solve(const SolverSetup& setup, const SolveOptions& options = {});

}  // namespace optexec
