#include "optexec/hjbqvi_solver.hpp"

#include "optexec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optexec {

namespace {
constexpr double kTieTol = 1e-12;
}  // namespace

DiffusionBands assemble_diffusion(const SolverGrid& grid, const Coefficients& coefficients,
                                  DriftScheme scheme) {
    const int ny = grid.n_y;
    const double dy = grid.dy;
    const double dy2 = dy * dy;
    DiffusionBands bands;
    bands.n_y = ny;
    bands.sub.assign(ny + 1, 0.0);
    bands.diag.assign(ny + 1, 0.0);
    bands.super.assign(ny + 1, 0.0);

    for (int l = 1; l < ny; ++l) {
        const double y = grid.y(l);
        const double sig = coefficients.vol(y);
        const double half_s2 = 0.5 * sig * sig / dy2;
        const double h = coefficients.drift(y);
        if (scheme == DriftScheme::Centered) {
            bands.sub[l] = half_s2 + h / (2.0 * dy);
            bands.super[l] = half_s2 - h / (2.0 * dy);
            bands.diag[l] = -2.0 * half_s2;
        } else if (h >= 0.0) {
            // Drift pushes y down: difference towards the lower neighbour.
            bands.sub[l] = half_s2 + h / dy;
            bands.super[l] = half_s2;
            bands.diag[l] = -2.0 * half_s2 - h / dy;
        } else {
            bands.sub[l] = half_s2;
            bands.super[l] = half_s2 - h / dy;
            bands.diag[l] = -2.0 * half_s2 + h / dy;
        }
    }

    // Bottom row: one-sided second difference, no drift.
    const double s0 = coefficients.vol(grid.y(0));
    const double half_s2_bottom = 0.5 * s0 * s0 / dy2;
    bands.diag[0] = half_s2_bottom;
    bands.super[0] = -2.0 * half_s2_bottom;
    bands.first_row_far = half_s2_bottom;

    // Top row: v_yy = 0 (linear continuation above y_bar) with one-sided drift. The one-sided
    // second difference here gives A an eigenvalue with positive real part once sigma(y_bar) > 0.
    const double h_top = coefficients.drift(grid.y(ny));
    if (h_top >= 0.0) {
        bands.sub[ny] = h_top / dy;
        bands.diag[ny] = -h_top / dy;
    }
    bands.last_row_far = 0.0;
    return bands;
}

BandedSolver::BandedSolver(const DiffusionBands& bands, double dt) : dt_(dt), n_(bands.n_y + 1) {
    const int n = n_;
    std::vector<double> a(n), b(n), c(n);
    for (int r = 0; r < n; ++r) {
        a[r] = -dt * bands.sub[r];
        b[r] = 1.0 - dt * bands.diag[r];
        c[r] = -dt * bands.super[r];
    }
    const double corner_first = -dt * bands.first_row_far;
    const double corner_last = -dt * bands.last_row_far;

    // Fold the corners with the untouched neighbouring rows so the system becomes tridiagonal.
    if (corner_first != 0.0) {
        if (c[1] == 0.0) throw NumericalError("cannot eliminate the first-row corner entry");
        first_fold_ = corner_first / c[1];
        b[0] -= first_fold_ * a[1];
        c[0] -= first_fold_ * b[1];
    }
    if (corner_last != 0.0) {
        if (a[n - 2] == 0.0) throw NumericalError("cannot eliminate the last-row corner entry");
        last_fold_ = corner_last / a[n - 2];
        a[n - 1] -= last_fold_ * b[n - 2];
        b[n - 1] -= last_fold_ * c[n - 2];
    }

    lower_.assign(n, 0.0);
    pivot_.assign(n, 0.0);
    upper_ = c;
    pivot_[0] = b[0];
    for (int r = 1; r < n; ++r) {
        if (std::abs(pivot_[r - 1]) < 1e-300) throw NumericalError("singular diffusion system");
        lower_[r] = a[r] / pivot_[r - 1];
        pivot_[r] = b[r] - lower_[r] * c[r - 1];
    }
    if (std::abs(pivot_[n - 1]) < 1e-300) throw NumericalError("singular diffusion system");
}

void BandedSolver::solve(std::span<double> rhs) const {
    const int n = n_;
    if (first_fold_ != 0.0) rhs[0] -= first_fold_ * rhs[1];
    if (last_fold_ != 0.0) rhs[n - 1] -= last_fold_ * rhs[n - 2];
    for (int r = 1; r < n; ++r) rhs[r] -= lower_[r] * rhs[r - 1];
    rhs[n - 1] /= pivot_[n - 1];
    for (int r = n - 2; r >= 0; --r) rhs[r] = (rhs[r] - upper_[r] * rhs[r + 1]) / pivot_[r];
}

ValueLevel terminal_values(const SolverGrid& grid, std::span<const LobShape> shapes) {
    const int m = static_cast<int>(shapes.size());
    ValueLevel level(m, grid.x_nodes(), grid.y_nodes());
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l <= grid.n_y; ++l) {
            const double y = grid.y(l);
            const double base = shapes[i].impact_cost(y);
            for (int k = 0; k < grid.n_x; ++k) {
                const double remaining = (grid.n_x - k) * grid.dx;
                level(i, k, l) = shapes[i].impact_cost(y + remaining) - base;
            }
            level(i, grid.n_x, l) = 0.0;
        }
    }
    return level;
}

double value_scale(const ValueLevel& terminal) {
    double scale = 0.0;
    for (double v : terminal.data()) scale = std::max(scale, std::abs(v));
    return scale;
}

ValueLevel pde_step(const ValueLevel& known, const BandedSolver& solver,
                    const QuadratureTable& quadrature, const GeneratorMatrix& q, double lambda) {
    const int m = known.regimes();
    const int nx = known.x_nodes();
    const int ny1 = known.y_nodes();
    const int n_z = quadrature.n_z();
    const double dt = solver.dt();
    if (q.size() != m) throw NumericalError("generator size does not match the number of regimes");
    if (lambda > 0.0 && (!quadrature.has_shift_table() || quadrature.n_y + 1 != ny1)) {
        throw NumericalError("jump shift table does not match the grid");
    }

    ValueLevel next(m, nx, ny1);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < nx; ++k) {
            const auto v = known.column(i, k);
            auto rhs = next.column(i, k);
            for (int l = 0; l < ny1; ++l) {
                double explicit_part = 0.0;
                for (int j = 0; j < m; ++j) {
                    if (j != i && q(i, j) != 0.0) explicit_part += q(i, j) * (known(j, k, l) - v[l]);
                }
                if (lambda > 0.0) {
                    double jump = 0.0;
                    for (int p = 0; p < n_z; ++p) {
                        const int lo = quadrature.lower_at(l, p);
                        const double a = quadrature.frac_at(l, p);
                        const double shifted = (1.0 - a) * v[lo] + a * v[lo + 1];
                        jump += quadrature.weights[p] * (shifted - v[l]);
                    }
                    explicit_part += lambda * jump;
                }
                rhs[l] = v[l] + dt * explicit_part;
            }
            solver.solve(rhs);
        }
    }
    return next;
}

ValueLevel pde_step(const ValueLevel& known, const DiffusionBands& bands,
                    const QuadratureTable& quadrature, const GeneratorMatrix& q, double lambda,
                    double dt) {
    return pde_step(known, BandedSolver(bands, dt), quadrature, q, lambda);
}

ImpulseResult impulse_update(const ValueLevel& level, std::span<const LobShape> shapes,
                             const SolverGrid& grid) {
    const int m = level.regimes();
    const int nx = grid.n_x;
    const int ny = grid.n_y;
    ImpulseResult result{level, RegionMask(m, nx + 1, ny + 1, 0)};
    ValueLevel& v = result.values;

    std::vector<double> step_cost(ny + 1);
    std::vector<double> phi(nx + ny + 1);
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l <= ny; ++l) step_cost[l] = shapes[i].block_cost(grid.y(l), grid.dy);
        for (int j = 0; j <= nx + ny; ++j) phi[j] = shapes[i].impact_cost(j * grid.dy);
        // One-step relaxation from the right: v(x + dx, .) already holds its own infimum, and the
        // Phi increments telescope along the diagonal.
        for (int k = nx - 1; k >= 0; --k) {
            for (int l = 0; l <= ny; ++l) {
                double next;
                if (l < ny) {
                    next = v(i, k + 1, l + 1);
                } else {
                    // Linear extrapolation above y_bar, never below the top-row value.
                    const double top = v(i, k + 1, ny);
                    next = std::max(top, 2.0 * top - v(i, k + 1, ny - 1));
                }
                double candidate = next + step_cost[l];
                if (l + nx - k > ny) {
                    // The diagonal leaves the grid; buying everything at once is still priced exactly.
                    candidate = std::min(candidate, phi[l + nx - k] - phi[l]);
                }
                const double current = v(i, k, l);
                if (candidate < current) {
                    v(i, k, l) = candidate;
                    // Ties that differ only by rounding of the telescoped costs stay continuation.
                    if (candidate < current - kTieTol * std::abs(current)) result.active(i, k, l) = 1;
                }
            }
        }
    }
    return result;
}

ValueLevel gradient_residual(const ValueLevel& level, std::span<const LobShape> shapes,
                             const SolverGrid& grid) {
    const int m = level.regimes();
    const int nx = grid.n_x;
    const int ny = grid.n_y;
    ValueLevel g(m, nx + 1, ny + 1, -std::numeric_limits<double>::infinity());
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l <= ny; ++l) {
            const double psi = shapes[i].deviation(grid.y(l));
            for (int k = 0; k < nx; ++k) {
                const double v = level(i, k, l);
                const double dvdx = (level(i, k + 1, l) - v) / grid.dx;
                const double dvdy = l < ny ? (level(i, k, l + 1) - v) / grid.dy
                                            : (v - level(i, k, l - 1)) / grid.dy;
                g(i, k, l) = -dvdx - dvdy - psi;
            }
        }
    }
    return g;
}

ValueLevel pde_residual(const ValueLevel& before_obstacle, const ValueLevel& after_obstacle,
                        const DiffusionBands& bands, double dt) {
    // The linear solve makes F vanish on `before_obstacle`, and F is affine in the new level,
    // so F(after) = (I - dt A)(after - before) / dt.
    const int m = after_obstacle.regimes();
    const int nx = after_obstacle.x_nodes();
    const int ny = bands.n_y;
    ValueLevel f(m, nx, ny + 1, 0.0);
    std::vector<double> delta(ny + 1);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < nx; ++k) {
            bool changed = false;
            for (int l = 0; l <= ny; ++l) {
                delta[l] = after_obstacle(i, k, l) - before_obstacle(i, k, l);
                changed = changed || delta[l] != 0.0;
            }
            if (!changed) continue;
            for (int l = 0; l <= ny; ++l) {
                double a_delta = bands.diag[l] * delta[l];
                if (l > 0) a_delta += bands.sub[l] * delta[l - 1];
                if (l < ny) a_delta += bands.super[l] * delta[l + 1];
                if (l == 0) a_delta += bands.first_row_far * delta[2];
                if (l == ny) a_delta += bands.last_row_far * delta[ny - 2];
                f(i, k, l) = delta[l] / dt - a_delta;
            }
        }
    }
    return f;
}

RegionMask classify_regions(const ValueLevel& pde_res, const ValueLevel& gradient_res,
                            double tie_tol) {
    RegionMask mask(pde_res.regimes(), pde_res.x_nodes(), pde_res.y_nodes(), 0);
    const auto f = pde_res.data();
    const auto g = gradient_res.data();
    auto out = mask.data();
    for (std::size_t n = 0; n < f.size(); ++n) {
        out[n] = (f[n] < g[n] && g[n] - f[n] > tie_tol) ? 1 : 0;
    }
    return mask;
}

RegionMask classify_regions(const ValueLevel& before_obstacle, const ValueLevel& after_obstacle,
                            const ValueLevel& gradient_res, const DiffusionBands& bands, double dt,
                            double tie_tol) {
    return classify_regions(pde_residual(before_obstacle, after_obstacle, bands, dt), gradient_res,
                            tie_tol);
}

SolverSetup SolverSetup::build(const GridConfig& config, MarketModel model, DriftScheme scheme) {
    model.validate();
    SolverSetup setup;
    setup.config = config;
    setup.grid = build_grid(config);
    setup.quadrature = build_jump_shift_table(
        setup.grid, model.coefficients,
        build_quadrature(model.spec.eta, config.n_z, config.tail_eps));
    setup.bands = assemble_diffusion(setup.grid, model.coefficients, scheme);
    setup.scheme = scheme;
    setup.model = std::move(model);
    return setup;
}

SolverSetup SolverSetup::with_model(MarketModel model) const {
    model.validate();
    SolverSetup setup = *this;
    const CoefficientSpec& old_spec = this->model.spec;
    const CoefficientSpec& new_spec = model.spec;
    if (new_spec.e != old_spec.e || new_spec.eta != old_spec.eta) {
        setup.quadrature = build_jump_shift_table(
            grid, model.coefficients, build_quadrature(new_spec.eta, config.n_z, config.tail_eps));
    }
    if (new_spec.c != old_spec.c || new_spec.d != old_spec.d) {
        setup.bands = assemble_diffusion(grid, model.coefficients, scheme);
    }
    setup.model = std::move(model);
    return setup;
}

bool ValueSurface::has_level(int n) const {
    return std::binary_search(levels.begin(), levels.end(), n);
}

const ValueLevel& ValueSurface::values_at(int n) const {
    const auto it = std::lower_bound(levels.begin(), levels.end(), n);
    if (it == levels.end() || *it != n) {
        throw NumericalError("time level not stored in the surface", n);
    }
    return values[static_cast<std::size_t>(it - levels.begin())];
}

const RegionMask& ValueSurface::exercise_at(int n) const {
    const auto it = std::lower_bound(levels.begin(), levels.end(), n);
    if (it == levels.end() || *it != n) {
        throw NumericalError("time level not stored in the surface", n);
    }
    return exercise[static_cast<std::size_t>(it - levels.begin())];
}

int ValueSurface::nearest_level(double t) const {
    if (levels.empty()) throw NumericalError("empty surface");
    const double target = t / grid.dt;
    int best = levels.front();
    for (int n : levels) {
        if (std::abs(n - target) < std::abs(best - target)) best = n;
    }
    return best;
}

ValueSurface solve(const SolverSetup& setup, const SolveOptions& options) {
    const SolverGrid& grid = setup.grid;
    const RegimeModel& regimes = setup.model.regimes;
    const std::span<const LobShape> shapes = regimes.shapes;
    const int m = regimes.regimes();
    const int stride = std::max(1, options.level_stride);

    auto keep = [&](int n) {
        return n == 0 || n == grid.n_t || n % stride == 0 ||
               std::find(options.keep_levels.begin(), options.keep_levels.end(), n) !=
                   options.keep_levels.end();
    };

    ValueSurface surface;
    surface.grid = grid;

    ValueLevel current = terminal_values(grid, shapes);
    surface.scale = value_scale(current);
    const double tie_tol = 1e-12 * surface.scale;

    // Everything left is bought at the horizon.
    RegionMask terminal_mask(m, grid.x_nodes(), grid.y_nodes(), 1);
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l <= grid.n_y; ++l) terminal_mask(i, grid.n_x, l) = 0;
    }
    if (options.observer) options.observer(grid.n_t, current, terminal_mask);

    // Levels are produced from the horizon backwards; collect in reverse and flip at the end.
    std::vector<int> levels;
    std::vector<ValueLevel> values;
    std::vector<RegionMask> masks;
    if (keep(grid.n_t)) {
        levels.push_back(grid.n_t);
        values.push_back(current);
        masks.push_back(std::move(terminal_mask));
    }

    const BandedSolver solver(setup.bands, grid.dt);
    for (int n = grid.n_t; n >= 1; --n) {
        const double t_mid = (n - 0.5) * grid.dt;
        const GeneratorMatrix& q = regimes.generator.at(t_mid);
        const double lambda = regimes.intensity.at(t_mid);

        ValueLevel before = pde_step(current, solver, setup.quadrature, q, lambda);
        for (int i = 0; i < m; ++i) {
            auto edge = before.column(i, grid.n_x);
            std::fill(edge.begin(), edge.end(), 0.0);
        }
        ImpulseResult impulse = impulse_update(before, shapes, grid);
        RegionMask mask;
        if (options.region_rule == RegionRule::Residual) {
            const ValueLevel gradient = gradient_residual(impulse.values, shapes, grid);
            mask = classify_regions(before, impulse.values, gradient, setup.bands, grid.dt, tie_tol);
        } else {
            mask = std::move(impulse.active);
        }

        for (double v : impulse.values.data()) {
            if (!std::isfinite(v)) throw NumericalError("non-finite value", n - 1);
        }
        if (options.observer) options.observer(n - 1, impulse.values, mask);
        current = std::move(impulse.values);
        if (keep(n - 1)) {
            levels.push_back(n - 1);
            values.push_back(current);
            masks.push_back(std::move(mask));
        }
    }

    std::reverse(levels.begin(), levels.end());
    std::reverse(values.begin(), values.end());
    std::reverse(masks.begin(), masks.end());
    surface.levels = std::move(levels);
    surface.values = std::move(values);
    surface.exercise = std::move(masks);
    return surface;
}

}  // namespace optexec
