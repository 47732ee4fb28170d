#pragma once

#include "optexec/dp_oracle.hpp"
#include "optexec/execution_simulator.hpp"
#include "optexec/hjbqvi_solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace optexec {

struct SimulateConfig {
    std::size_t n_paths = 10000;
    double dt_sim = 0.0;  ///< 0 uses the solver time step
    double t0 = 0.0;
    int regime = 0;       ///< 0-based; 1-based in the file
    double x0 = 0.0;
    double y0 = 0.5;
    unsigned threads = 0;
};

struct OracleGridConfig {
    int n_x = 10;
    int n_y = 10;
    int n_t = 40;
    double x_bar = 4.0;
    double y_bar = 4.0;
};

enum class SweepParameter { Lambda, C, D, Gamma2, Q0, Q2 };

struct SweepConfig {
    SweepParameter parameter = SweepParameter::Lambda;
    std::vector<double> values;
    double t_fraction = 0.5;  ///< boundary files are written at the level nearest t_fraction * T
};

/// Everything a CLI run needs. Defaults reproduce the single-regime base case.
struct RunConfig {
    MarketModel model = default_market_model();
    GridConfig grid;
    DriftScheme drift_scheme = DriftScheme::Centered;
    RegionRule region_rule = RegionRule::ImpulseActive;
    int output_stride = 0;  ///< time-level stride of the surface CSV; 0 keeps about 40 levels
    SimulateConfig simulate;
    OracleGridConfig oracle;
    SweepConfig sweep;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
};

/// Parses a JSON document. Unknown keys and invalid values throw ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Model with one sweep parameter replaced.
MarketModel apply_sweep_value(const MarketModel& base, SweepParameter parameter, double value);

std::string sweep_parameter_name(SweepParameter parameter);

}  // namespace optexec
