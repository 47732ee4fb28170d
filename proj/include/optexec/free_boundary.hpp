#pragma once

#include "optexec/hjbqvi_solver.hpp"

#include <vector>

namespace optexec {

/// Maximal exercise node y*(n, i, k) per stored level, regime and x column.
class FreeBoundarySurface {
public:
    static constexpr int kNone = -1;

    FreeBoundarySurface() = default;
    FreeBoundarySurface(const SolverGrid& grid, int regimes);

    const SolverGrid& grid() const noexcept { return grid_; }
    /// Stored time levels in insertion order.
    const std::vector<int>& levels() const noexcept { return levels_; }
    int regimes() const noexcept { return regimes_; }
    bool has_level(int n) const;
    /// Stored level closest to n (ties go to the later level).
    int nearest_level(int n) const;

    /// Records the boundary of one level's mask; replaces an earlier record of the same level.
    void add_level(int n, const RegionMask& mask);

    /// y node index of the boundary, kNone when the column has no exercise node.
    int index(int n, int i, int k) const;
    bool exists(int n, int i, int k) const { return index(n, i, k) != kNone; }
    /// Boundary height in volume units; only meaningful when exists().
    double height(int n, int i, int k) const { return grid_.y(index(n, i, k)); }

    /// Rebuilds the down-set mask {y <= y*} for one level.
    RegionMask threshold_mask(int n) const;

private:
    std::size_t offset(int n, int i, int k) const;

    SolverGrid grid_;
    int regimes_ = 0;
    std::vector<int> levels_;
    std::vector<int> slot_;  ///< per time level, position in levels_ or -1
    std::vector<int> ystar_;
};

FreeBoundarySurface extract_boundary(const ValueSurface& surface);

struct DownsetViolation {
    enum class Direction { Y, X };
    int level = 0;
    int regime = 0;
    int k = 0;
    int l = 0;  ///< continuation node lying below (or left of, at y = 0) an exercise node
    Direction direction = Direction::Y;
};

/// Continuation nodes under an exercise node in the same column, and continuation nodes on y = 0
/// left of an exercise node on y = 0. The x = X_bar column is excluded (no purchase possible).
std::vector<DownsetViolation> downset_report(const RegionMask& mask, int level = 0);
std::vector<DownsetViolation> downset_report(const ValueSurface& surface);

}  // namespace optexec
