#include "optexec/config.hpp"

#include "optexec/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace optexec {
namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_ + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key);
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return node_.at(key);
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    double number(const std::string& k, double fallback) {
        if (!has(k)) return fallback;
        const json& v = node_.at(k);
        if (!v.is_number()) throw ConfigError(key(k) + " must be a number");
        return v.get<double>();
    }

    int integer(const std::string& k, int fallback) {
        if (!has(k)) return fallback;
        const json& v = node_.at(k);
        if (!v.is_number_integer()) throw ConfigError(key(k) + " must be an integer");
        return v.get<int>();
    }

    std::string text(const std::string& k, const std::string& fallback) {
        if (!has(k)) return fallback;
        const json& v = node_.at(k);
        if (!v.is_string()) throw ConfigError(key(k) + " must be a string");
        return v.get<std::string>();
    }

    Section child(const std::string& k) { return Section(raw(k), key(k)); }

    /// Rejects keys that were never asked for.
    void finish() const {
        for (const auto& [k, v] : node_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown key " + key(k));
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<double> number_list(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) throw ConfigError(key + " must be a non-empty array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
        if (!e.is_number()) throw ConfigError(key + " must contain numbers only");
        out.push_back(e.get<double>());
    }
    return out;
}

GeneratorMatrix parse_matrix(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty()) throw ConfigError(key + " must be a square array of rows");
    const int m = static_cast<int>(v.size());
    GeneratorMatrix q(m);
    for (int i = 0; i < m; ++i) {
        const auto row = number_list(v[i], key);
        if (static_cast<int>(row.size()) != m) throw ConfigError(key + " must be square");
        for (int j = 0; j < m; ++j) q(i, j) = row[j];
    }
    return q;
}

LobShape parse_shape(Section s) {
    const std::string type = s.text("type", "power_law");
    LobShape shape = LobShape::block(1.0);
    if (type == "power_law") {
        shape = LobShape::power_law(s.number("kappa", 0.8), s.number("gamma", -1.0));
    } else if (type == "block") {
        shape = LobShape::block(s.number("kappa", 1.0));
    } else if (type == "tabulated") {
        if (!s.has("knots")) throw ConfigError(s.key("knots") + " missing");
        const json& knots = s.raw("knots");
        if (!knots.is_array()) throw ConfigError(s.key("knots") + " must be an array of [price, volume]");
        std::vector<ShapeKnot> parsed;
        for (const json& k : knots) {
            const auto pair = number_list(k, s.key("knots"));
            if (pair.size() != 2) throw ConfigError(s.key("knots") + " entries must be [price, volume]");
            parsed.push_back({pair[0], pair[1]});
        }
        shape = LobShape::tabulated(std::move(parsed));
    } else {
        throw ConfigError(s.key("type") + " must be power_law, block or tabulated");
    }
    s.finish();
    return shape;
}

RegimeModel parse_regimes(Section* regimes_section, const json* shapes_node) {
    int m = 1;
    GeneratorMatrix q0(1);
    PiecewiseConstant<GeneratorMatrix> generator(q0);
    PiecewiseConstant<double> intensity(0.5);
    double lambda_max = 0.5;
    double lambda_bar = -1.0;

    if (regimes_section) {
        Section& s = *regimes_section;
        m = s.integer("m", 1);
        if (m < 1) throw ConfigError(s.key("m") + " must be at least 1");
        generator = PiecewiseConstant<GeneratorMatrix>(GeneratorMatrix(m));
        if (s.has("q_matrix")) {
            const json& q = s.raw("q_matrix");
            if (q.is_object()) {
                Section qs(q, s.key("q_matrix"));
                std::vector<double> starts = number_list(qs.raw("starts"), qs.key("starts"));
                const json& mats = qs.raw("matrices");
                if (!mats.is_array()) throw ConfigError(qs.key("matrices") + " must be an array");
                std::vector<GeneratorMatrix> values;
                for (const json& mat : mats) values.push_back(parse_matrix(mat, qs.key("matrices")));
                qs.finish();
                generator = PiecewiseConstant<GeneratorMatrix>(std::move(starts), std::move(values));
            } else {
                generator = PiecewiseConstant<GeneratorMatrix>(parse_matrix(q, s.key("q_matrix")));
            }
        }
        if (s.has("lambda")) {
            const json& l = s.raw("lambda");
            if (l.is_number()) {
                intensity = PiecewiseConstant<double>(l.get<double>());
                lambda_max = l.get<double>();
            } else if (l.is_object()) {
                Section ls(l, s.key("lambda"));
                auto starts = number_list(ls.raw("starts"), ls.key("starts"));
                auto values = number_list(ls.raw("values"), ls.key("values"));
                ls.finish();
                lambda_max = *std::max_element(values.begin(), values.end());
                intensity = PiecewiseConstant<double>(std::move(starts), std::move(values));
            } else {
                throw ConfigError(s.key("lambda") + " must be a number or {starts, values}");
            }
        }
        lambda_bar = s.number("lambda_bar", -1.0);
        s.finish();
    }

    RegimeModel model;
    if (shapes_node) {
        if (!shapes_node->is_array()) throw ConfigError("shapes must be an array with one entry per regime");
        int idx = 0;
        for (const json& entry : *shapes_node) {
            model.shapes.push_back(parse_shape(Section(entry, "shapes[" + std::to_string(idx++) + "]")));
        }
        if (static_cast<int>(model.shapes.size()) != m) {
            throw ConfigError("shapes must list " + std::to_string(m) + " entries (one per regime)");
        }
    } else {
        model.shapes.assign(m, LobShape::power_law(0.8, -1.0));
    }
    model.generator = std::move(generator);
    model.intensity = std::move(intensity);
    model.intensity_bound = lambda_bar >= 0.0 ? lambda_bar : lambda_max;
    return model;
}

DriftScheme parse_scheme(const std::string& v, const std::string& key) {
    if (v == "centered") return DriftScheme::Centered;
    if (v == "upwind") return DriftScheme::Upwind;
    throw ConfigError(key + " must be centered or upwind");
}

RegionRule parse_rule(const std::string& v, const std::string& key) {
    if (v == "impulse") return RegionRule::ImpulseActive;
    if (v == "residual") return RegionRule::Residual;
    throw ConfigError(key + " must be impulse or residual");
}

SweepParameter parse_parameter(const std::string& v, const std::string& key) {
    for (SweepParameter p : {SweepParameter::Lambda, SweepParameter::C, SweepParameter::D,
                             SweepParameter::Gamma2, SweepParameter::Q0, SweepParameter::Q2}) {
        if (sweep_parameter_name(p) == v) return p;
    }
    throw ConfigError(key + " must be one of lambda, c, d, gamma2, q0, q2");
}

}  // namespace

std::string sweep_parameter_name(SweepParameter parameter) {
    switch (parameter) {
        case SweepParameter::Lambda: return "lambda";
        case SweepParameter::C: return "c";
        case SweepParameter::D: return "d";
        case SweepParameter::Gamma2: return "gamma2";
        case SweepParameter::Q0: return "q0";
        case SweepParameter::Q2: return "q2";
    }
    return "unknown";
}

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Section root(doc, "");
    RunConfig cfg;

    CoefficientSpec spec;
    if (root.has("dynamics")) {
        Section s = root.child("dynamics");
        spec.c = s.number("c", spec.c);
        spec.d = s.number("d", spec.d);
        spec.e = s.number("e", spec.e);
        spec.eta = s.number("eta", spec.eta);
        s.finish();
    }

    std::optional<Section> regimes;
    if (root.has("regimes")) regimes.emplace(root.child("regimes"));
    const json* shapes = root.has("shapes") ? &root.raw("shapes") : nullptr;
    RegimeModel regime_model = parse_regimes(regimes ? &*regimes : nullptr, shapes);
    cfg.model = MarketModel::make(spec, std::move(regime_model));

    if (root.has("grid")) {
        Section s = root.child("grid");
        GridConfig& g = cfg.grid;
        g.t_horizon = s.number("t_horizon", g.t_horizon);
        g.x_bar = s.number("x_bar", g.x_bar);
        g.y_bar = s.number("y_bar", g.y_bar);
        g.n_t = s.integer("n_t", g.n_t);
        g.n_x = s.integer("n_x", g.n_x);
        g.n_y = s.integer("n_y", g.n_y);
        g.n_z = s.integer("n_z", g.n_z);
        g.cfl_c = s.number("cfl_c", g.cfl_c);
        g.tail_eps = s.number("tail_eps", g.tail_eps);
        s.finish();
    }
    if (root.has("solver")) {
        Section s = root.child("solver");
        cfg.drift_scheme = parse_scheme(s.text("drift_scheme", "centered"), s.key("drift_scheme"));
        cfg.region_rule = parse_rule(s.text("region_rule", "impulse"), s.key("region_rule"));
        s.finish();
    }
    if (root.has("simulate")) {
        Section s = root.child("simulate");
        SimulateConfig& sim = cfg.simulate;
        const int n_paths = s.integer("n_paths", static_cast<int>(sim.n_paths));
        if (n_paths < 1) throw ConfigError("simulate.n_paths must be at least 1");
        sim.n_paths = static_cast<std::size_t>(n_paths);
        sim.dt_sim = s.number("dt_sim", sim.dt_sim);
        if (sim.dt_sim < 0.0) throw ConfigError("simulate.dt_sim must be non-negative");
        sim.t0 = s.number("t0", sim.t0);
        sim.regime = s.integer("regime", 1) - 1;
        if (sim.regime < 0 || sim.regime >= cfg.model.regimes.regimes()) {
            throw ConfigError("simulate.regime must lie in [1, m]");
        }
        sim.x0 = s.number("x0", sim.x0);
        sim.y0 = s.number("y0", sim.y0);
        const int threads = s.integer("threads", 0);
        if (threads < 0) throw ConfigError("simulate.threads must be non-negative");
        sim.threads = static_cast<unsigned>(threads);
        s.finish();
    }
    if (root.has("oracle")) {
        Section s = root.child("oracle");
        OracleGridConfig& o = cfg.oracle;
        o.n_x = s.integer("n_x", o.n_x);
        o.n_y = s.integer("n_y", o.n_y);
        o.n_t = s.integer("n_t", o.n_t);
        o.x_bar = s.number("x_bar", o.x_bar);
        o.y_bar = s.number("y_bar", o.y_bar);
        s.finish();
    }
    if (root.has("sweep")) {
        Section s = root.child("sweep");
        cfg.sweep.parameter = parse_parameter(s.text("parameter", "lambda"), s.key("parameter"));
        if (!s.has("values")) throw ConfigError("sweep.values missing");
        cfg.sweep.values = number_list(s.raw("values"), s.key("values"));
        cfg.sweep.t_fraction = s.number("t_fraction", cfg.sweep.t_fraction);
        if (!(cfg.sweep.t_fraction >= 0.0 && cfg.sweep.t_fraction <= 1.0)) {
            throw ConfigError("sweep.t_fraction must lie in [0, 1]");
        }
        s.finish();
    }
    if (root.has("output")) {
        Section s = root.child("output");
        cfg.output_dir = s.text("dir", cfg.output_dir.string());
        cfg.output_stride = s.integer("stride", cfg.output_stride);
        if (cfg.output_stride < 0) throw ConfigError("output.stride must be non-negative");
        s.finish();
    }
    if (root.has("seed")) {
        const json& v = root.raw("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError("seed must be a non-negative integer");
        }
        cfg.seed = v.get<std::uint64_t>();
    }
    root.finish();

    // Grid problems surface here rather than in the middle of a run.
    build_grid(cfg.grid);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

MarketModel apply_sweep_value(const MarketModel& base, SweepParameter parameter, double value) {
    CoefficientSpec spec = base.spec;
    RegimeModel regimes = base.regimes;
    switch (parameter) {
        case SweepParameter::Lambda:
            regimes.intensity = PiecewiseConstant<double>(value);
            regimes.intensity_bound = std::max(regimes.intensity_bound, value);
            break;
        case SweepParameter::C:
            spec.c = value;
            break;
        case SweepParameter::D:
            spec.d = value;
            break;
        case SweepParameter::Gamma2: {
            if (regimes.regimes() < 2) throw ConfigError("sweep over gamma2 needs regimes.m >= 2");
            const LobShape& old = regimes.shapes[1];
            if (old.kind() == ShapeKind::Tabulated) {
                throw ConfigError("sweep over gamma2 needs a parametric shape in regime 2");
            }
            regimes.shapes[1] = LobShape::power_law(old.kappa(), value);
            break;
        }
        case SweepParameter::Q0:
        case SweepParameter::Q2: {
            if (regimes.regimes() != 2) throw ConfigError("sweeps over q0 and q2 need regimes.m = 2");
            const GeneratorMatrix& q = regimes.generator.at(0.0);
            const double q1 = parameter == SweepParameter::Q0 ? value : q(0, 1);
            regimes.generator = PiecewiseConstant<GeneratorMatrix>(GeneratorMatrix::two_state(q1, value));
            break;
        }
    }
    return MarketModel::make(spec, std::move(regimes));
}

}  // namespace optexec
