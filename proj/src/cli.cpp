#include "optexec/cli.hpp"

#include "optexec/config.hpp"
#include "optexec/csv_io.hpp"
#include "optexec/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

namespace optexec {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

int default_stride(const SolverGrid& grid, int configured) {
    if (configured > 0) return configured;
    return std::max(1, grid.n_t / 40);
}

void write_metadata(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const SolverGrid& grid, const std::string& digest) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_digest"] = digest;
    j["seed"] = cfg.seed;
    j["grid"] = {{"t_horizon", grid.t_horizon}, {"x_bar", grid.x_bar}, {"y_bar", grid.y_bar},
                 {"n_t", grid.n_t},             {"n_x", grid.n_x},     {"n_y", grid.n_y},
                 {"n_z", cfg.grid.n_z},         {"cfl_c", grid.cfl_c}, {"tail_eps", cfg.grid.tail_eps},
                 {"dt", grid.dt}};
    j["drift_scheme"] = cfg.drift_scheme == DriftScheme::Upwind ? "upwind" : "centered";
    j["region_rule"] = cfg.region_rule == RegionRule::Residual ? "residual" : "impulse";
    write_text(dir / "metadata.json", j.dump(2) + "\n");
}

int command_solve(const RunConfig& cfg, const fs::path& dir, bool with_surface, std::ostream& log) {
    const SolverSetup setup = SolverSetup::build(cfg.grid, cfg.model, cfg.drift_scheme);
    SolveOptions options;
    options.region_rule = cfg.region_rule;
    options.level_stride = default_stride(setup.grid, cfg.output_stride);
    options.keep_levels = {setup.grid.n_t / 2};
    FreeBoundarySurface boundary(setup.grid, cfg.model.regimes.regimes());
    if (!with_surface) {
        // Boundaries are cheap: record every level while keeping only a few value levels.
        options.level_stride = setup.grid.n_t;
        options.observer = [&](int n, const ValueLevel&, const RegionMask& mask) {
            boundary.add_level(n, mask);
        };
    }
    const ValueSurface surface = solve(setup, options);
    if (with_surface) {
        boundary = extract_boundary(surface);
        write_surface_csv(dir / "surface.csv", surface);
        log << "wrote " << (dir / "surface.csv").string() << '\n';
    }
    write_boundary_csv(dir / "boundary.csv", boundary);
    log << "wrote " << (dir / "boundary.csv").string() << '\n';
    return kExitOk;
}

int command_simulate(const RunConfig& cfg, const fs::path& dir, const std::string& digest,
                     std::ostream& log) {
    const SolverSetup setup = SolverSetup::build(cfg.grid, cfg.model, cfg.drift_scheme);
    SolveOptions options;
    options.region_rule = cfg.region_rule;
    options.level_stride = setup.grid.n_t;
    FreeBoundarySurface boundary(setup.grid, cfg.model.regimes.regimes());
    options.observer = [&](int n, const ValueLevel&, const RegionMask& mask) {
        boundary.add_level(n, mask);
    };
    solve(setup, options);

    const ExecutionPolicy policy = ExecutionPolicy::from_boundary(std::move(boundary));
    SimulationOptions sim;
    sim.n_paths = cfg.simulate.n_paths;
    sim.dt_sim = cfg.simulate.dt_sim;
    sim.seed = cfg.seed;
    sim.threads = cfg.simulate.threads;
    const CostStats stats = simulate_execution(policy, cfg.model, cfg.simulate.t0, cfg.simulate.regime,
                                               cfg.simulate.x0, cfg.simulate.y0, sim);
    write_text(dir / "stats.json", stats_json(stats, digest));
    log << "mean " << format_double(stats.mean) << " stderr " << format_double(stats.std_error)
        << '\n';
    return kExitOk;
}

int command_oracle_compare(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    OracleConfig oracle;
    oracle.model = cfg.model;
    oracle.grid = cfg.grid;
    oracle.grid.n_x = cfg.oracle.n_x;
    oracle.grid.n_y = cfg.oracle.n_y;
    oracle.grid.n_t = cfg.oracle.n_t;
    oracle.grid.x_bar = cfg.oracle.x_bar;
    oracle.grid.y_bar = cfg.oracle.y_bar;

    const ValueSurface reference = solve_oracle(oracle);
    const ValueSurface surface =
        solve(SolverSetup::build(oracle.grid, cfg.model, cfg.drift_scheme),
              SolveOptions{cfg.region_rule, 1, {}, {}});
    const DeviationReport report = compare(reference, surface);
    write_surface_csv(dir / "oracle_surface.csv", reference);
    write_surface_csv(dir / "solver_surface.csv", surface);
    write_text(dir / "deviation.json", deviation_json(report));
    log << "max abs deviation " << format_double(report.max_abs) << " ("
        << format_double(report.max_abs / report.scale) << " of scale)\n";
    return kExitOk;
}

int command_sweep(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    if (cfg.sweep.values.empty()) throw ConfigError("sweep.values missing");
    const SolverSetup base = SolverSetup::build(cfg.grid, cfg.model, cfg.drift_scheme);
    const int level = static_cast<int>(std::lround(cfg.sweep.t_fraction * base.grid.n_t));
    const std::string name = sweep_parameter_name(cfg.sweep.parameter);

    // Validate every point before spending time on any solve.
    std::vector<MarketModel> models;
    for (double value : cfg.sweep.values) {
        models.push_back(apply_sweep_value(cfg.model, cfg.sweep.parameter, value));
    }

    auto run_point = [&](std::size_t p) {
        SolveOptions options;
        options.region_rule = cfg.region_rule;
        options.level_stride = base.grid.n_t;
        options.keep_levels = {level};
        const ValueSurface surface = solve(base.with_model(models[p]), options);
        FreeBoundarySurface boundary(base.grid, surface.regimes());
        boundary.add_level(level, surface.exercise_at(level));
        std::vector<fs::path> written;
        for (int i = 0; i < surface.regimes(); ++i) {
            const fs::path file = dir / ("boundary_" + name + "_" + format_double(cfg.sweep.values[p]) +
                                         "_regime" + std::to_string(i + 1) + ".csv");
            write_boundary_csv(file, boundary, i);
            written.push_back(file);
        }
        return written;
    };

    std::vector<std::future<std::vector<fs::path>>> points;
    for (std::size_t p = 0; p < models.size(); ++p) points.push_back(std::async(std::launch::async, run_point, p));
    for (auto& point : points) {
        for (const fs::path& file : point.get()) log << "wrote " << file.string() << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(const CliOptions& options, std::ostream& log, std::ostream& err) {
    try {
        const std::string text = read_file(options.config_path);
        RunConfig cfg = parse_config(text);
        if (options.out_dir) cfg.output_dir = *options.out_dir;
        if (options.seed) cfg.seed = *options.seed;
        const std::string digest = digest_hex(text + "\nseed=" + std::to_string(cfg.seed));

        const std::string& cmd = options.command;
        if (cmd != "solve" && cmd != "boundary" && cmd != "simulate" && cmd != "oracle-compare" &&
            cmd != "sweep") {
            throw ConfigError("unknown command '" + cmd + "'");
        }
        fs::create_directories(cfg.output_dir);
        write_metadata(cfg.output_dir, cmd, cfg, build_grid(cfg.grid), digest);

        if (cmd == "solve") return command_solve(cfg, cfg.output_dir, true, log);
        if (cmd == "boundary") return command_solve(cfg, cfg.output_dir, false, log);
        if (cmd == "simulate") return command_simulate(cfg, cfg.output_dir, digest, log);
        if (cmd == "oracle-compare") return command_oracle_compare(cfg, cfg.output_dir, log);
        return command_sweep(cfg, cfg.output_dir, log);
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace optexec
