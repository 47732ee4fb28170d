#include "optexec/discretization.hpp"

#include "optexec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace optexec {

double max_stable_dt(double cfl_c, double dx, double dy) {
    return cfl_c * std::min(dx * dx, dy * dy);
}

SolverGrid build_grid(const GridConfig& config) {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string("grid.") + key + " must be positive");
        }
    };
    positive(config.t_horizon, "t_horizon");
    positive(config.x_bar, "x_bar");
    positive(config.y_bar, "y_bar");
    positive(config.cfl_c, "cfl_c");
    if (config.n_x < 2) throw ConfigError("grid.n_x must be at least 2");
    if (config.n_y < 2) throw ConfigError("grid.n_y must be at least 2");
    if (config.n_t != 0 && config.n_t < 1) throw ConfigError("grid.n_t must be positive");

    SolverGrid grid;
    grid.t_horizon = config.t_horizon;
    grid.x_bar = config.x_bar;
    grid.y_bar = config.y_bar;
    grid.n_x = config.n_x;
    grid.n_y = config.n_y;
    grid.dx = config.x_bar / config.n_x;
    grid.dy = config.y_bar / config.n_y;
    grid.cfl_c = config.cfl_c;

    // Purchases move along the diagonal (x + a, y + a), which stays on nodes only when dx = dy.
    if (std::abs(grid.dx - grid.dy) > 1e-12 * std::max(grid.dx, grid.dy)) {
        std::ostringstream msg;
        msg << "grid steps differ (dx = " << grid.dx << ", dy = " << grid.dy
            << "); adjust grid.n_x / grid.n_y so that x_bar / n_x = y_bar / n_y";
        throw ConfigError(msg.str());
    }

    const double dt_max = max_stable_dt(config.cfl_c, grid.dx, grid.dy);
    if (config.n_t == 0) {
        grid.n_t = std::max(1, static_cast<int>(std::ceil(config.t_horizon / dt_max - 1e-9)));
    } else {
        grid.n_t = config.n_t;
    }
    grid.dt = config.t_horizon / grid.n_t;
    if (grid.dt > dt_max * (1.0 + 1e-12)) {
        const int n_min = static_cast<int>(std::ceil(config.t_horizon / dt_max - 1e-9));
        std::ostringstream msg;
        msg << "CFL condition violated: dt = " << grid.dt << " exceeds the maximal admissible dt = "
            << dt_max << " (use grid.n_t >= " << n_min << ")";
        throw ConfigError(msg.str());
    }
    return grid;
}

QuadratureTable build_quadrature(double eta, int n_z, double tail_eps) {
    if (!(eta > 0.0)) throw ConfigError("dynamics.eta must be positive");
    if (n_z < 2) throw ConfigError("grid.n_z must be at least 2");
    if (!(tail_eps > 0.0 && tail_eps < 1.0)) throw ConfigError("grid.tail_eps must lie in (0, 1)");

    QuadratureTable table;
    const double z_max = -std::log(tail_eps) / eta;
    const double h = z_max / (n_z - 1);
    table.nodes.resize(n_z);
    table.weights.resize(n_z);
    double mass = 0.0;
    for (int p = 0; p < n_z; ++p) {
        const double z = p == n_z - 1 ? z_max : p * h;
        const double trapezoid = (p == 0 || p == n_z - 1) ? 0.5 * h : h;
        table.nodes[p] = z;
        table.weights[p] = trapezoid * eta * std::exp(-eta * z);
        mass += table.weights[p];
    }
    // Renormalize so the discrete measure keeps the full arrival rate.
    for (double& w : table.weights) w /= mass;
    return table;
}

QuadratureTable build_jump_shift_table(const SolverGrid& grid, const Coefficients& coefficients,
                                       QuadratureTable quadrature) {
    const int n_z = quadrature.n_z();
    const int ny = grid.n_y;
    quadrature.n_y = ny;
    quadrature.lower.assign(static_cast<std::size_t>(ny + 1) * n_z, 0);
    quadrature.frac.assign(static_cast<std::size_t>(ny + 1) * n_z, 0.0);
    for (int l = 0; l <= ny; ++l) {
        const double y = grid.y(l);
        for (int p = 0; p < n_z; ++p) {
            const double shifted = y + coefficients.jump(y, quadrature.nodes[p]);
            const double r = shifted / grid.dy;
            int j;
            double alpha;
            if (r >= ny - 1e-10) {
                // Above y_bar the value is continued linearly through the top two nodes.
                j = ny - 1;
                alpha = std::max(1.0, r - (ny - 1));
            } else {
                // Tolerance snaps points sitting on a node onto it with alpha = 0.
                j = std::max(0, static_cast<int>(std::floor(r + 1e-10)));
                alpha = std::clamp(r - j, 0.0, 1.0);
            }
            const std::size_t idx = static_cast<std::size_t>(l) * n_z + p;
            quadrature.lower[idx] = j;
            quadrature.frac[idx] = alpha;
        }
    }
    return quadrature;
}

}  // namespace optexec
