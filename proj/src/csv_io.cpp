#include "optexec/csv_io.hpp"

#include "optexec/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace optexec {
namespace {

constexpr const char* kSurfaceHeader = "time_index,t,regime,x,y,value,region";
constexpr const char* kBoundaryHeader = "time_index,t,regime,x,ystar";

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    return in;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

int parse_int(const std::string& s, std::size_t line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("line " + std::to_string(line) + ": bad integer '" + s + "'");
    }
    return v;
}

template <class Row, class Parse>
std::vector<Row> read_rows(std::istream& in, const char* header, std::size_t columns, Parse parse) {
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw ConfigError(std::string("missing header '") + header + "'");
    }
    std::vector<Row> rows;
    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != columns) {
            throw ConfigError("line " + std::to_string(number) + ": expected " +
                              std::to_string(columns) + " fields");
        }
        rows.push_back(parse(fields, number));
    }
    return rows;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericalError("cannot format value");
    return std::string(buf, ptr);
}

void write_surface_csv(std::ostream& out, const ValueSurface& surface) {
    const SolverGrid& g = surface.grid;
    out << kSurfaceHeader << '\n';
    for (std::size_t s = 0; s < surface.levels.size(); ++s) {
        const int n = surface.levels[s];
        const std::string t = format_double(g.t(n));
        const ValueLevel& v = surface.values[s];
        const RegionMask& mask = surface.exercise[s];
        for (int i = 0; i < v.regimes(); ++i) {
            for (int k = 0; k <= g.n_x; ++k) {
                const std::string x = format_double(g.x(k));
                for (int l = 0; l <= g.n_y; ++l) {
                    out << n << ',' << t << ',' << i + 1 << ',' << x << ',' << format_double(g.y(l))
                        << ',' << format_double(v(i, k, l)) << ',' << (mask(i, k, l) ? 'E' : 'C')
                        << '\n';
                }
            }
        }
    }
}

void write_surface_csv(const std::filesystem::path& path, const ValueSurface& surface) {
    auto out = open_out(path);
    write_surface_csv(out, surface);
}

void write_boundary_csv(std::ostream& out, const FreeBoundarySurface& boundary,
                        std::optional<int> regime) {
    const SolverGrid& g = boundary.grid();
    std::vector<int> levels = boundary.levels();
    std::sort(levels.begin(), levels.end());
    out << kBoundaryHeader << '\n';
    for (int n : levels) {
        const std::string t = format_double(g.t(n));
        for (int i = 0; i < boundary.regimes(); ++i) {
            if (regime && *regime != i) continue;
            for (int k = 0; k <= g.n_x; ++k) {
                out << n << ',' << t << ',' << i + 1 << ',' << format_double(g.x(k)) << ',';
                if (boundary.exists(n, i, k)) out << format_double(boundary.height(n, i, k));
                out << '\n';
            }
        }
    }
}

void write_boundary_csv(const std::filesystem::path& path, const FreeBoundarySurface& boundary,
                        std::optional<int> regime) {
    auto out = open_out(path);
    write_boundary_csv(out, boundary, regime);
}

std::vector<SurfaceRow> read_surface_csv(std::istream& in) {
    return read_rows<SurfaceRow>(in, kSurfaceHeader, 7, [](const auto& f, std::size_t line) {
        SurfaceRow r;
        r.time_index = parse_int(f[0], line);
        r.t = parse_double(f[1], line);
        r.regime = parse_int(f[2], line);
        r.x = parse_double(f[3], line);
        r.y = parse_double(f[4], line);
        r.value = parse_double(f[5], line);
        if (f[6] != "E" && f[6] != "C") {
            throw ConfigError("line " + std::to_string(line) + ": region must be E or C");
        }
        r.exercise = f[6] == "E";
        return r;
    });
}

std::vector<SurfaceRow> read_surface_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_surface_csv(in);
}

std::vector<BoundaryRow> read_boundary_csv(std::istream& in) {
    return read_rows<BoundaryRow>(in, kBoundaryHeader, 5, [](const auto& f, std::size_t line) {
        BoundaryRow r;
        r.time_index = parse_int(f[0], line);
        r.t = parse_double(f[1], line);
        r.regime = parse_int(f[2], line);
        r.x = parse_double(f[3], line);
        if (!f[4].empty()) r.ystar = parse_double(f[4], line);
        return r;
    });
}

std::vector<BoundaryRow> read_boundary_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_boundary_csv(in);
}

std::string digest_hex(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string stats_json(const CostStats& stats, const std::string& config_digest) {
    nlohmann::ordered_json j;
    j["mean"] = stats.mean;
    j["stderr"] = stats.std_error;
    j["n_paths"] = stats.n_paths;
    j["seed"] = stats.seed;
    j["config_digest"] = config_digest;
    return j.dump(2) + "\n";
}

std::string deviation_json(const DeviationReport& report) {
    nlohmann::ordered_json j;
    j["max_abs"] = report.max_abs;
    j["max_rel"] = report.max_rel;
    j["max_abs_over_scale"] = report.scale > 0.0 ? report.max_abs / report.scale : 0.0;
    j["q50"] = report.q50;
    j["q90"] = report.q90;
    j["q99"] = report.q99;
    j["scale"] = report.scale;
    j["nodes"] = report.nodes;
    j["argmax"] = {{"time_index", report.argmax[0]},
                   {"regime", report.argmax[1] + 1},
                   {"k", report.argmax[2]},
                   {"l", report.argmax[3]}};
    return j.dump(2) + "\n";
}

}  // namespace optexec
