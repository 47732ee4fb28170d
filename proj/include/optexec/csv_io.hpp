#pragma once

#include "optexec/dp_oracle.hpp"
#include "optexec/execution_simulator.hpp"
#include "optexec/free_boundary.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace optexec {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Columns time_index,t,regime,x,y,value,region; regime is 1-based, region is E or C.
void write_surface_csv(std::ostream& out, const ValueSurface& surface);
void write_surface_csv(const std::filesystem::path& path, const ValueSurface& surface);

/// Columns time_index,t,regime,x,ystar; ystar is empty when the column has no exercise node.
/// `regime` (0-based) restricts the output to one regime.
void write_boundary_csv(std::ostream& out, const FreeBoundarySurface& boundary,
                        std::optional<int> regime = std::nullopt);
void write_boundary_csv(const std::filesystem::path& path, const FreeBoundarySurface& boundary,
                        std::optional<int> regime = std::nullopt);

struct SurfaceRow {
    int time_index = 0;
    double t = 0.0;
    int regime = 0;  ///< as written (1-based)
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
    bool exercise = false;
};

struct BoundaryRow {
    int time_index = 0;
    double t = 0.0;
    int regime = 0;  ///< as written (1-based)
    double x = 0.0;
    std::optional<double> ystar;
};

/// Readers validate the header and every field; malformed input throws ConfigError.
std::vector<SurfaceRow> read_surface_csv(std::istream& in);
std::vector<SurfaceRow> read_surface_csv(const std::filesystem::path& path);
std::vector<BoundaryRow> read_boundary_csv(std::istream& in);
std::vector<BoundaryRow> read_boundary_csv(const std::filesystem::path& path);

/// FNV-1a 64-bit digest, printed as 16 hex digits.
std::string digest_hex(const std::string& bytes);

/// {"mean", "stderr", "n_paths", "seed", "config_digest"}
std::string stats_json(const CostStats& stats, const std::string& config_digest);

std::string deviation_json(const DeviationReport& report);

}  // namespace optexec
