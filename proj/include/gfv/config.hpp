#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfv/dynamics.hpp"
#include "gfv/errors.hpp"
#include "gfv/grid.hpp"
#include "gfv/model.hpp"
#include "gfv/operator.hpp"
#include "gfv/spectral.hpp"

namespace gfv {

inline constexpr const char* version = "1.0.0";

struct GridConfig {
    std::size_t N = 2501;
    std::size_t k = 200;
};

struct GrowthConfig {
    std::string law = "linear";  // linear | power | tabulated
    double exponent = 1.0;
    std::vector<std::vector<double>> table;
};

struct DivisionConfig {
    std::string law = "power";  // power | power_cutoff | tabulated
    double coefficient = 1.0;
    double exponent = 2.0;
    double threshold = 0.0;
    std::vector<double> table;
};

struct KernelConfig {
    std::optional<std::string> name = std::string("irreducible");
    double p = 0.5;
    std::vector<std::vector<double>> matrix;
};

struct ModelConfig {
    std::vector<double> features{1.0, 2.0, 3.0};
    GrowthConfig growth;
    DivisionConfig division;
    KernelConfig kernel;
    double death_factor = 1.0;
};

struct EigenConfig {
    double tol = 1e-10;
    std::size_t max_iter = 1'000'000;
    std::optional<std::uint64_t> seed;
};

struct OutputConfig {
    std::string directory = "out";
    bool emit_snapshots = true;
};

struct RunConfig {
    std::string preset = "full";
    GridConfig grid;
    ModelConfig model;
    Schedule schedule{40.0, 0.01, {}};
    InitialShape initial;
    EigenConfig eigen;
    OutputConfig output;
};

/// Grid sizes of the named presets: "full" (N=2501, k=200) and "desk" (N=600, k=50).
inline GridConfig preset_grid(const std::string& preset)
{
    if (preset == "full") {
        return {2501, 200};
    }
    if (preset == "desk") {
        return {600, 50};
    }
    throw ValidationError("config: unknown preset '" + preset + "' (expected full, desk or custom)");
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object()) {
        throw ValidationError("config: " + where + " must be an object");
    }
    const std::set<std::string> names(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
        if (!names.count(item.key())) {
            throw ValidationError("config: unknown field '" + (where.empty() ? "" : where + ".") + item.key() + "'");
        }
    }
}

template <class T>
void read(const json& obj, const char* key, const std::string& where, T& out)
{
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config: field '" + (where.empty() ? "" : where + ".") + key + "' has the wrong type");
    }
}

inline std::size_t line_of(const std::string& text, std::size_t byte)
{
    std::size_t line = 1;
    for (std::size_t q = 0; q < byte && q < text.size(); ++q) {
        if (text[q] == '\n') {
            ++line;
        }
    }
    return line;
}

} // namespace detail

/// Builds the model and checks every cross-field invariant; throws ValidationError.
inline Model build_model(const RunConfig& cfg, const Grid& grid)
{
    const ModelConfig& mc = cfg.model;
    FeatureSet features(mc.features);
    GrowthLaw growth = [&] {
        if (mc.growth.law == "linear") return GrowthLaw::linear();
        if (mc.growth.law == "power") return GrowthLaw::power(mc.growth.exponent);
        if (mc.growth.law == "tabulated") return GrowthLaw::tabulated(mc.growth.table);
        throw ValidationError("config: model.growth.law must be linear, power or tabulated");
    }();
    DivisionLaw division = [&] {
        if (mc.division.law == "power") return DivisionLaw::power(mc.division.coefficient, mc.division.exponent);
        if (mc.division.law == "power_cutoff") {
            return DivisionLaw::power_cutoff(mc.division.coefficient, mc.division.exponent, mc.division.threshold);
        }
        if (mc.division.law == "tabulated") return DivisionLaw::tabulated(mc.division.table);
        throw ValidationError("config: model.division.law must be power, power_cutoff or tabulated");
    }();
    Kernel kernel = [&] {
        if (mc.kernel.name) {
            const auto family = parse_kernel_family(*mc.kernel.name);
            if (!family) {
                throw ValidationError("config: unknown kernel name '" + *mc.kernel.name + "'");
            }
            return build_named_kernel(*family, features.size(), mc.kernel.p);
        }
        return Kernel(mc.kernel.matrix);
    }();
    Model model(std::move(features), std::move(growth), std::move(division), std::move(kernel), mc.death_factor);
    model.validate(grid);
    return model;
}

inline void validate_config(const RunConfig& cfg)
{
    Grid grid(cfg.grid.N, cfg.grid.k);
    (void)build_model(cfg, grid);
    if (!(cfg.schedule.t_end > 0.0)) throw ValidationError("config: schedule.t_end must be positive");
    if (!(cfg.schedule.record_dt > 0.0)) throw ValidationError("config: schedule.record_dt must be positive");
    for (double t : cfg.schedule.snapshot_times) {
        if (!(t >= 0.0 && t <= cfg.schedule.t_end)) {
            throw ValidationError("config: snapshot times must lie in [0, t_end]");
        }
    }
    if (!(cfg.initial.a >= 0.0) || !(cfg.initial.b_exp > 0.0)) {
        throw ValidationError("config: initial needs a >= 0 and b_exp > 0");
    }
    if (!(cfg.eigen.tol > 0.0)) throw ValidationError("config: eigen.tol must be positive");
    if (cfg.eigen.max_iter == 0) throw ValidationError("config: eigen.max_iter must be positive");
}

/// Parses and validates a configuration held in a string.
inline RunConfig parse_config_text(const std::string& text)
{
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("config: parse error at line " + std::to_string(detail::line_of(text, e.byte)) + ": "
                              + e.what());
    }
    detail::reject_unknown(root, "", {"preset", "grid", "model", "schedule", "initial", "eigen", "output"});
    RunConfig cfg;
    detail::read(root, "preset", "", cfg.preset);
    if (cfg.preset != "custom") {
        cfg.grid = preset_grid(cfg.preset);
    } else if (!root.contains("grid")) {
        throw ValidationError("config: preset 'custom' needs an explicit grid");
    }
    if (root.contains("grid")) {
        const auto& g = root["grid"];
        detail::reject_unknown(g, "grid", {"N", "k"});
        detail::read(g, "N", "grid", cfg.grid.N);
        detail::read(g, "k", "grid", cfg.grid.k);
        if (cfg.preset != "custom") {
            const GridConfig named = preset_grid(cfg.preset);
            if (named.N != cfg.grid.N || named.k != cfg.grid.k) cfg.preset = "custom";
        }
    }
    if (root.contains("model")) {
        const auto& m = root["model"];
        detail::reject_unknown(m, "model", {"features", "growth", "division", "kernel", "death_factor"});
        detail::read(m, "features", "model", cfg.model.features);
        detail::read(m, "death_factor", "model", cfg.model.death_factor);
        if (m.contains("growth")) {
            const auto& g = m["growth"];
            detail::reject_unknown(g, "model.growth", {"law", "exponent", "table"});
            detail::read(g, "law", "model.growth", cfg.model.growth.law);
            detail::read(g, "exponent", "model.growth", cfg.model.growth.exponent);
            detail::read(g, "table", "model.growth", cfg.model.growth.table);
        }
        if (m.contains("division")) {
            const auto& d = m["division"];
            detail::reject_unknown(d, "model.division", {"law", "coefficient", "exponent", "threshold", "table"});
            detail::read(d, "law", "model.division", cfg.model.division.law);
            detail::read(d, "coefficient", "model.division", cfg.model.division.coefficient);
            detail::read(d, "exponent", "model.division", cfg.model.division.exponent);
            detail::read(d, "threshold", "model.division", cfg.model.division.threshold);
            detail::read(d, "table", "model.division", cfg.model.division.table);
        }
        if (m.contains("kernel")) {
            const auto& k = m["kernel"];
            detail::reject_unknown(k, "model.kernel", {"name", "p", "matrix"});
            if (k.contains("name") && k.contains("matrix")) {
                throw ValidationError("config: model.kernel takes either 'name' or 'matrix', not both");
            }
            if (k.contains("matrix")) {
                cfg.model.kernel.name.reset();
                detail::read(k, "matrix", "model.kernel", cfg.model.kernel.matrix);
            } else {
                std::string name = *cfg.model.kernel.name;
                detail::read(k, "name", "model.kernel", name);
                cfg.model.kernel.name = name;
            }
            detail::read(k, "p", "model.kernel", cfg.model.kernel.p);
        }
    }
    if (root.contains("schedule")) {
        const auto& s = root["schedule"];
        detail::reject_unknown(s, "schedule", {"t_end", "record_dt", "snapshot_times"});
        detail::read(s, "t_end", "schedule", cfg.schedule.t_end);
        detail::read(s, "record_dt", "schedule", cfg.schedule.record_dt);
        detail::read(s, "snapshot_times", "schedule", cfg.schedule.snapshot_times);
    }
    if (root.contains("initial")) {
        const auto& i = root["initial"];
        detail::reject_unknown(i, "initial", {"a", "b_exp"});
        detail::read(i, "a", "initial", cfg.initial.a);
        detail::read(i, "b_exp", "initial", cfg.initial.b_exp);
    }
    if (root.contains("eigen")) {
        const auto& e = root["eigen"];
        detail::reject_unknown(e, "eigen", {"tol", "max_iter", "seed"});
        detail::read(e, "tol", "eigen", cfg.eigen.tol);
        detail::read(e, "max_iter", "eigen", cfg.eigen.max_iter);
        if (e.contains("seed")) {
            std::uint64_t seed = 0;
            detail::read(e, "seed", "eigen", seed);
            cfg.eigen.seed = seed;
        }
    }
    if (root.contains("output")) {
        const auto& o = root["output"];
        detail::reject_unknown(o, "output", {"directory", "emit_snapshots"});
        detail::read(o, "directory", "output", cfg.output.directory);
        detail::read(o, "emit_snapshots", "output", cfg.output.emit_snapshots);
    }
    validate_config(cfg);
    return cfg;
}

inline RunConfig parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("config: cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

/// Fully resolved configuration as JSON (every field present).
inline nlohmann::json to_json(const RunConfig& cfg)
{
    nlohmann::json j;
    j["preset"] = cfg.preset;
    j["grid"] = {{"N", cfg.grid.N}, {"k", cfg.grid.k}};
    nlohmann::json growth = {{"law", cfg.model.growth.law}};
    if (cfg.model.growth.law == "power") growth["exponent"] = cfg.model.growth.exponent;
    if (cfg.model.growth.law == "tabulated") growth["table"] = cfg.model.growth.table;
    nlohmann::json division = {{"law", cfg.model.division.law}};
    if (cfg.model.division.law != "tabulated") {
        division["coefficient"] = cfg.model.division.coefficient;
        division["exponent"] = cfg.model.division.exponent;
    } else {
        division["table"] = cfg.model.division.table;
    }
    if (cfg.model.division.law == "power_cutoff") division["threshold"] = cfg.model.division.threshold;
    nlohmann::json kernel;
    if (cfg.model.kernel.name) {
        kernel = {{"name", *cfg.model.kernel.name}, {"p", cfg.model.kernel.p}};
    } else {
        kernel = {{"matrix", cfg.model.kernel.matrix}};
    }
    j["model"] = {{"features", cfg.model.features},
                  {"growth", growth},
                  {"division", division},
                  {"kernel", kernel},
                  {"death_factor", cfg.model.death_factor}};
    j["schedule"] = {{"t_end", cfg.schedule.t_end},
                     {"record_dt", cfg.schedule.record_dt},
                     {"snapshot_times", cfg.schedule.snapshot_times}};
    j["initial"] = {{"a", cfg.initial.a}, {"b_exp", cfg.initial.b_exp}};
    j["eigen"] = {{"tol", cfg.eigen.tol}, {"max_iter", cfg.eigen.max_iter}};
    if (cfg.eigen.seed) j["eigen"]["seed"] = *cfg.eigen.seed;
    j["output"] = {{"directory", cfg.output.directory}, {"emit_snapshots", cfg.output.emit_snapshots}};
    return j;
}

/// Everything a run needs, built from a validated configuration.
struct Setup {
    SplitStep stepper;
    std::vector<std::string> warnings;
    KernelReport kernel_report;
};

inline Setup build_setup(const RunConfig& cfg)
{
    Grid grid(cfg.grid.N, cfg.grid.k);
    Model model = build_model(cfg, grid);
    auto warnings = model.validate(grid);
    KernelReport report = validate_kernel(model.kernel(), model, grid);
    for (const auto& w : report.warnings) warnings.push_back(w);
    return Setup{SplitStep(SemiDiscreteOperator(grid, std::move(model))), std::move(warnings), std::move(report)};
}

inline EigenOptions eigen_options(const RunConfig& cfg)
{
    EigenOptions opt;
    opt.power.tol = cfg.eigen.tol;
    opt.power.max_iter = cfg.eigen.max_iter;
    opt.power.seed = cfg.eigen.seed;
    return opt;
}

} // namespace gfv
