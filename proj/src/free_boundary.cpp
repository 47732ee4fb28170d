#include "optexec/free_boundary.hpp"

#include "optexec/errors.hpp"

#include <algorithm>
#include <cstdlib>

namespace optexec {

FreeBoundarySurface::FreeBoundarySurface(const SolverGrid& grid, int regimes)
    : grid_(grid), regimes_(regimes), slot_(grid.n_t + 1, -1) {}

bool FreeBoundarySurface::has_level(int n) const {
    return n >= 0 && n <= grid_.n_t && slot_[n] >= 0;
}

int FreeBoundarySurface::nearest_level(int n) const {
    if (levels_.empty()) throw NumericalError("empty boundary surface");
    int best = levels_.front();
    for (int level : levels_) {
        const int d = std::abs(level - n);
        const int d_best = std::abs(best - n);
        if (d < d_best || (d == d_best && level > best)) best = level;
    }
    return best;
}

std::size_t FreeBoundarySurface::offset(int n, int i, int k) const {
    if (!has_level(n)) throw NumericalError("time level not stored in the boundary", n);
    return (static_cast<std::size_t>(slot_[n]) * regimes_ + i) * grid_.x_nodes() + k;
}

void FreeBoundarySurface::add_level(int n, const RegionMask& mask) {
    if (n < 0 || n > grid_.n_t) throw NumericalError("time level outside the grid", n);
    if (mask.regimes() != regimes_ || mask.x_nodes() != grid_.x_nodes() ||
        mask.y_nodes() != grid_.y_nodes()) {
        throw NumericalError("mask does not match the boundary grid", n);
    }
    if (slot_[n] < 0) {
        slot_[n] = static_cast<int>(levels_.size());
        levels_.push_back(n);
        ystar_.resize(ystar_.size() + static_cast<std::size_t>(regimes_) * grid_.x_nodes(), kNone);
    }
    for (int i = 0; i < regimes_; ++i) {
        for (int k = 0; k <= grid_.n_x; ++k) {
            int top = kNone;
            for (int l = grid_.n_y; l >= 0; --l) {
                if (mask(i, k, l)) {
                    top = l;
                    break;
                }
            }
            ystar_[offset(n, i, k)] = top;
        }
    }
}

int FreeBoundarySurface::index(int n, int i, int k) const { return ystar_[offset(n, i, k)]; }

RegionMask FreeBoundarySurface::threshold_mask(int n) const {
    RegionMask mask(regimes_, grid_.x_nodes(), grid_.y_nodes(), 0);
    for (int i = 0; i < regimes_; ++i) {
        for (int k = 0; k <= grid_.n_x; ++k) {
            const int top = index(n, i, k);
            for (int l = 0; l <= top; ++l) mask(i, k, l) = 1;
        }
    }
    return mask;
}

FreeBoundarySurface extract_boundary(const ValueSurface& surface) {
    FreeBoundarySurface boundary(surface.grid, surface.regimes());
    for (std::size_t s = 0; s < surface.levels.size(); ++s) {
        boundary.add_level(surface.levels[s], surface.exercise[s]);
    }
    return boundary;
}

std::vector<DownsetViolation> downset_report(const RegionMask& mask, int level) {
    std::vector<DownsetViolation> out;
    const int nx = mask.x_nodes() - 1;
    const int ny1 = mask.y_nodes();
    for (int i = 0; i < mask.regimes(); ++i) {
        for (int k = 0; k < nx; ++k) {
            int top = -1;
            for (int l = ny1 - 1; l >= 0; --l) {
                if (mask(i, k, l)) {
                    top = l;
                    break;
                }
            }
            for (int l = 0; l < top; ++l) {
                if (!mask(i, k, l)) {
                    out.push_back({level, i, k, l, DownsetViolation::Direction::Y});
                }
            }
        }
        int right = -1;
        for (int k = nx - 1; k >= 0; --k) {
            if (mask(i, k, 0)) {
                right = k;
                break;
            }
        }
        for (int k = 0; k < right; ++k) {
            if (!mask(i, k, 0)) out.push_back({level, i, k, 0, DownsetViolation::Direction::X});
        }
    }
    return out;
}

std::vector<DownsetViolation> downset_report(const ValueSurface& surface) {
    std::vector<DownsetViolation> out;
    for (std::size_t s = 0; s < surface.levels.size(); ++s) {
        auto part = downset_report(surface.exercise[s], surface.levels[s]);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

}  // namespace optexec
