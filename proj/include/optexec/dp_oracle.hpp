#pragma once

#include "optexec/hjbqvi_solver.hpp"

#include <array>

namespace optexec {

/// Brute-force discrete-time dynamic program on desk-sized grids.
///
/// Between decision times the volume effect follows a Markov chain on the y nodes:
/// up with probability dt sigma^2 / (2 dy^2), down with dt (sigma^2 / 2 + dy h) / dy^2,
/// a jump with probability lambda dt, otherwise it stays. Regimes move with I + dt Q.
/// Jump targets y (1 + e Z) are resolved with exact expectations of the linear interpolant;
/// above y_bar values are continued linearly through the top two nodes.
struct OracleConfig {
    static constexpr int kMaxSpaceSteps = 12;
    static constexpr int kMaxTimeSteps = 60;

    GridConfig grid;
    MarketModel model;

    /// Throws ConfigError for oversized grids or any branch probability outside [0, 1].
    void validate() const;
};

/// Backward induction with the minimum over every grid-aligned purchase at every node.
/// Every time level is kept; the exercise mask marks nodes whose best purchase is positive.
ValueSurface solve_oracle(const OracleConfig& config);

struct DeviationReport {
    double max_abs = 0.0;
    double max_rel = 0.0;
    double q50 = 0.0;  ///< quantiles of the absolute deviation
    double q90 = 0.0;
    double q99 = 0.0;
    double scale = 0.0;  ///< terminal-value scale of the reference
    std::size_t nodes = 0;
    std::array<int, 4> argmax{};  ///< level, regime, k, l of max_abs
};

/// Node-wise deviation over every time level stored in both surfaces.
/// Throws ConfigError when the grids differ or no level is shared.
DeviationReport compare(const ValueSurface& reference, const ValueSurface& surface);

}  // namespace optexec
