#pragma once

#include "optexec/market_model.hpp"

#include <vector>

namespace optexec {

struct GridConfig {
    double t_horizon = 4.0;
    double x_bar = 4.0;
    double y_bar = 5.0;
    int n_t = 0;  ///< 0 derives the smallest count allowed by the CFL bound
    int n_x = 80;
    int n_y = 100;
    int n_z = 64;
    double cfl_c = 1.0;
    double tail_eps = 1e-6;
};

/// Uniform space-time grid. Node k in x is k * dx (k = 0..n_x), node l in y is l * dy
/// (l = 0..n_y); time level n sits at t = n * dt, so level n_t is the horizon.
struct SolverGrid {
    double t_horizon = 0.0;
    double x_bar = 0.0;
    double y_bar = 0.0;
    int n_t = 0;
    int n_x = 0;
    int n_y = 0;
    double dt = 0.0;
    double dx = 0.0;
    double dy = 0.0;
    double cfl_c = 0.0;

    double t(int n) const { return n * dt; }
    double x(int k) const { return k * dx; }
    double y(int l) const { return l * dy; }
    int x_nodes() const { return n_x + 1; }
    int y_nodes() const { return n_y + 1; }
};

/// Validates steps (dx = dy, CFL dt <= C min(dx^2, dy^2)) and derives n_t when it is 0.
SolverGrid build_grid(const GridConfig& config);

/// Largest admissible time step under the CFL bound.
double max_stable_dt(double cfl_c, double dx, double dy);

/**
 * Jump quadrature for the exponential law together with the linear-interpolation
 * table of the shifted points y_l + q(y_l, z_p).
 *
 * Shift entries are indexed [l * n_z + p]; the interpolated value is
 * (1 - frac) v[lower] + frac v[lower + 1]. Points above y_bar use lower = n_y - 1 with
 * frac >= 1, i.e. linear extrapolation through the top two nodes.
 */
struct QuadratureTable {
    std::vector<double> nodes;
    std::vector<double> weights;  ///< non-negative, summing to 1

    int n_y = 0;
    std::vector<int> lower;
    std::vector<double> frac;

    int n_z() const { return static_cast<int>(nodes.size()); }
    bool has_shift_table() const { return !lower.empty(); }
    int lower_at(int l, int p) const { return lower[static_cast<std::size_t>(l) * nodes.size() + p]; }
    double frac_at(int l, int p) const { return frac[static_cast<std::size_t>(l) * nodes.size() + p]; }
};

/// Composite trapezoid on [0, -ln(tail_eps) / eta] against eta e^{-eta z}, renormalized to unit mass.
QuadratureTable build_quadrature(double eta, int n_z, double tail_eps);

QuadratureTable build_jump_shift_table(const SolverGrid& grid, const Coefficients& coefficients,
                                       QuadratureTable quadrature);

}  // namespace optexec
