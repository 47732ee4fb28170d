#include "optexec/dp_oracle.hpp"

#include "optexec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace optexec {
namespace {

constexpr double kProbTol = 1e-12;

struct Branch {
    int target = 0;
    double weight = 0.0;
};

/// Expectation weights of the linear interpolant (continued linearly above the top node)
/// for s = y + X with X ~ Exp(mu), as branches over node indices.
std::vector<Branch> jump_weights(double y, double mu, double dy, int ny) {
    std::vector<double> w(ny + 1, 0.0);
    // Hat functions: node j covers [y_j - dy, y_j + dy]. Integrate each linear piece exactly.
    // Piece [y_j, y_{j+1}]: value (1 - u) v_j + u v_{j+1}, u = (s - y_j) / dy.
    auto piece = [&](double a, double b, double yj) {
        // Returns {P(a < s < b), E[(s - yj) / dy ; a < s < b]} for s = y + Exp(mu), a >= y.
        const double ea = std::exp(-mu * (a - y));
        const double eb = std::isinf(b) ? 0.0 : std::exp(-mu * (b - y));
        const double p = ea - eb;
        const double tail_a = (a - yj + 1.0 / mu) * ea;
        const double tail_b = std::isinf(b) ? 0.0 : (b - yj + 1.0 / mu) * eb;
        return std::pair{p, (tail_a - tail_b) / dy};
    };
    const int start = static_cast<int>(std::floor(y / dy + 1e-10));
    for (int j = start; j < ny; ++j) {
        const double lo = std::max(y, j * dy);
        const double hi = (j + 1) * dy;
        if (hi <= lo) continue;
        const auto [p, eu] = piece(lo, hi, j * dy);
        w[j] += p - eu;
        w[j + 1] += eu;
    }
    // Above y_bar: v_N + u (v_N - v_{N-1}) with u = (s - y_bar) / dy.
    const double top = ny * dy;
    const auto [p, eu] = piece(std::max(y, top), std::numeric_limits<double>::infinity(), top);
    w[ny] += p + eu;
    w[ny - 1] -= eu;

    std::vector<Branch> out;
    for (int j = 0; j <= ny; ++j) {
        if (w[j] != 0.0) out.push_back({j, w[j]});
    }
    return out;
}

struct Chain {
    // Per y node: branches of the continuous-time part over one step.
    std::vector<std::vector<Branch>> rows;
};

Chain build_chain(const SolverGrid& grid, const MarketModel& model, double lambda) {
    const int ny = grid.n_y;
    const double dy = grid.dy;
    const double dt = grid.dt;
    Chain chain;
    chain.rows.resize(ny + 1);
    for (int l = 0; l <= ny; ++l) {
        const double y = grid.y(l);
        const double sig = model.coefficients.vol(y);
        const double h = model.coefficients.drift(y);
        if (h < 0.0) throw ConfigError("oracle requires a non-negative resilience h(y)");
        const double p_up = dt * 0.5 * sig * sig / (dy * dy);
        double p_down = dt * (0.5 * sig * sig + dy * h) / (dy * dy);
        const double e_scale = model.coefficients.jump(y, 1.0);
        const bool jumps = lambda > 0.0 && e_scale > 0.0;
        const double p_jump = jumps ? lambda * dt : 0.0;
        const double p_stay = 1.0 - p_up - p_down - p_jump;
        if (p_stay < -kProbTol) {
            std::ostringstream msg;
            msg << "oracle branch probabilities exceed 1 at y = " << y << " (stay probability "
                << p_stay << "); reduce dt";
            throw ConfigError(msg.str());
        }
        auto& row = chain.rows[l];
        row.push_back({l, std::max(0.0, p_stay)});
        if (l == 0) {
            row.front().weight += p_down;  // reflected at y = 0
        } else if (p_down > 0.0) {
            row.push_back({l - 1, p_down});
        }
        if (p_up > 0.0) {
            if (l < ny) {
                row.push_back({l + 1, p_up});
            } else {
                // Linear continuation: v_{N+1} = 2 v_N - v_{N-1}.
                row.push_back({ny, 2.0 * p_up});
                row.push_back({ny - 1, -p_up});
            }
        }
        if (jumps) {
            // q(y, z) = e_scale z is linear in z for the multiplicative family; the jump is
            // Exp(eta / e_scale) distributed.
            const double mu = model.spec.eta / e_scale;
            for (const Branch& b : jump_weights(y, mu, dy, ny)) {
                row.push_back({b.target, p_jump * b.weight});
            }
        }
    }
    return chain;
}

}  // namespace

void OracleConfig::validate() const {
    if (grid.n_x > kMaxSpaceSteps || grid.n_y > kMaxSpaceSteps) {
        throw ConfigError("oracle grid is limited to " + std::to_string(kMaxSpaceSteps) +
                          " steps in x and y");
    }
    if (grid.n_t < 1 || grid.n_t > kMaxTimeSteps) {
        throw ConfigError("oracle grid.n_t must lie in [1, " + std::to_string(kMaxTimeSteps) + "]");
    }
    model.validate();
    const double dt = grid.t_horizon / grid.n_t;
    for (const auto& q : model.regimes.generator.values()) {
        for (int i = 0; i < q.size(); ++i) {
            if (1.0 - dt * q.exit_rate(i) < -kProbTol) {
                throw ConfigError("oracle regime stay probability is negative in row " +
                                  std::to_string(i + 1) + "; reduce dt");
            }
        }
    }
}

ValueSurface solve_oracle(const OracleConfig& config) {
    config.validate();
    const SolverGrid grid = build_grid(config.grid);
    const RegimeModel& regimes = config.model.regimes;
    const int m = regimes.regimes();
    const int nx = grid.n_x;
    const int ny = grid.n_y;

    ValueSurface surface;
    surface.grid = grid;
    ValueLevel next = terminal_values(grid, regimes.shapes);
    surface.scale = value_scale(next);

    std::vector<ValueLevel> values{next};
    RegionMask terminal_mask(m, nx + 1, ny + 1, 1);
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l <= ny; ++l) terminal_mask(i, nx, l) = 0;
    }
    std::vector<RegionMask> masks{terminal_mask};

    for (int n = grid.n_t - 1; n >= 0; --n) {
        const double t_mid = (n + 0.5) * grid.dt;
        const Chain chain = build_chain(grid, config.model, regimes.intensity.at(t_mid));
        const GeneratorMatrix& q = regimes.generator.at(t_mid);

        // Expected value one step ahead, before any purchase at time n.
        ValueLevel cont(m, nx + 1, ny + 1, 0.0);
        for (int i = 0; i < m; ++i) {
            for (int k = 0; k <= nx; ++k) {
                for (int l = 0; l <= ny; ++l) {
                    double expected = 0.0;
                    for (int j = 0; j < m; ++j) {
                        const double p = (j == i ? 1.0 : 0.0) + grid.dt * q(i, j);
                        if (p == 0.0) continue;
                        double inner = 0.0;
                        for (const Branch& b : chain.rows[l]) inner += b.weight * next(j, k, b.target);
                        expected += p * inner;
                    }
                    cont(i, k, l) = expected;
                }
            }
        }

        ValueLevel current(m, nx + 1, ny + 1, 0.0);
        RegionMask mask(m, nx + 1, ny + 1, 0);
        for (int i = 0; i < m; ++i) {
            const LobShape& shape = regimes.shapes[i];
            auto cont_at = [&](int k, int l) {
                if (l <= ny) return cont(i, k, l);
                const double top = cont(i, k, ny);
                return std::max(top, top + (l - ny) * (top - cont(i, k, ny - 1)));
            };
            for (int k = 0; k < nx; ++k) {
                for (int l = 0; l <= ny; ++l) {
                    const double y = grid.y(l);
                    double best = cont(i, k, l);
                    bool buy = false;
                    for (int a = 1; k + a <= nx; ++a) {
                        const double after = k + a == nx ? 0.0 : cont_at(k + a, l + a);
                        const double candidate = shape.block_cost(y, a * grid.dx) + after;
                        if (candidate < best) {
                            best = candidate;
                            buy = true;
                        }
                    }
                    current(i, k, l) = best;
                    mask(i, k, l) = buy ? 1 : 0;
                }
            }
        }
        values.push_back(current);
        masks.push_back(std::move(mask));
        next = std::move(current);
    }

    std::reverse(values.begin(), values.end());
    std::reverse(masks.begin(), masks.end());
    surface.levels.resize(grid.n_t + 1);
    for (int n = 0; n <= grid.n_t; ++n) surface.levels[n] = n;
    surface.values = std::move(values);
    surface.exercise = std::move(masks);
    return surface;
}

DeviationReport compare(const ValueSurface& reference, const ValueSurface& surface) {
    const SolverGrid& a = reference.grid;
    const SolverGrid& b = surface.grid;
    auto close = [](double u, double v) { return std::abs(u - v) <= 1e-12 * std::max(1.0, std::abs(u)); };
    if (a.n_x != b.n_x || a.n_y != b.n_y || a.n_t != b.n_t || !close(a.x_bar, b.x_bar) ||
        !close(a.y_bar, b.y_bar) || !close(a.t_horizon, b.t_horizon) ||
        reference.regimes() != surface.regimes()) {
        throw ConfigError("cannot compare surfaces on different grids");
    }

    DeviationReport report;
    report.scale = reference.scale;
    std::vector<double> deviations;
    const double rel_floor = 1e-12 * std::max(reference.scale, 1e-300);
    for (std::size_t s = 0; s < reference.levels.size(); ++s) {
        const int n = reference.levels[s];
        if (!surface.has_level(n)) continue;
        const ValueLevel& ref = reference.values[s];
        const ValueLevel& other = surface.values_at(n);
        for (int i = 0; i < ref.regimes(); ++i) {
            for (int k = 0; k < ref.x_nodes(); ++k) {
                for (int l = 0; l < ref.y_nodes(); ++l) {
                    const double dev = std::abs(other(i, k, l) - ref(i, k, l));
                    deviations.push_back(dev);
                    if (dev > report.max_abs) {
                        report.max_abs = dev;
                        report.argmax = {n, i, k, l};
                    }
                    if (std::abs(ref(i, k, l)) > rel_floor) {
                        report.max_rel = std::max(report.max_rel, dev / std::abs(ref(i, k, l)));
                    }
                }
            }
        }
    }
    if (deviations.empty()) throw ConfigError("surfaces share no time level");
    report.nodes = deviations.size();
    std::sort(deviations.begin(), deviations.end());
    auto quantile = [&](double p) {
        const auto idx = static_cast<std::size_t>(std::ceil(p * deviations.size())) - 1;
        return deviations[std::min(idx, deviations.size() - 1)];
    };
    report.q50 = quantile(0.5);
    report.q90 = quantile(0.9);
    report.q99 = quantile(0.99);
    return report;
}

}  // namespace optexec
