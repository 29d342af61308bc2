#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "grin/eigensolver.hpp"
#include "grin/errors.hpp"
#include "grin/io.hpp"
#include "grin/pipeline.hpp"
#include "grin/potentials.hpp"

namespace grin::config {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline json load_json(const fs::path& path) {
    const std::string text = io::read_text(path);
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw ContractError(path.string() + ": top level must be an object");
        return j;
    } catch (const json::exception& e) {
        throw ContractError(path.string() + ": " + e.what());
    }
}

inline void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw ContractError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ContractError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ContractError(std::string("key '") + key + "' has the wrong type");
    }
}

template <typename T>
T get_required(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ContractError(where + ": missing key '" + key + "'");
    return get_or<T>(j, key, T{});
}

inline fs::path resolve_path(const std::string& p, const fs::path& base) {
    const fs::path path(p);
    return fs::absolute(path.is_absolute() ? path : base / path).lexically_normal();
}

// ---- grid ----

inline Grid1D grid_from_json(const json& j) {
    allow_keys(j, {"x_min", "x_max", "n"}, "grid");
    const double lo = get_required<double>(j, "x_min", "grid");
    const double hi = get_required<double>(j, "x_max", "grid");
    const auto n = get_required<std::size_t>(j, "n", "grid");
    if (!(hi > lo) || n < 8) throw ContractError("grid: need x_max > x_min and n >= 8");
    return Grid1D(lo, hi, n);
}

inline json grid_to_json(const Grid1D& g) {
    return json{{"x_min", g.x_min()}, {"x_max", g.x_max()}, {"n", g.n()}};
}

// ---- potential and state sources ----
//
// Potentials: {"type": "poschl_teller", "sigma", "center"} | {"type": "harmonic", "omega"}
//           | {"type": "tophat_inverse", "a", "m"} | {"type": "beam_combine", "spacing"}
//           | {"type": "zero"} | {"type": "file", "path"}
// States:     {"type": "ground_state", "potential": <potential>} | {"type": "tophat_proxy", "a", "m"}
//           | {"type": "beam_combine", "spacing"} | {"type": "file", "path"}

// Returns the source with defaults filled in and file paths made absolute.
inline json normalize_potential_source(const json& j, const fs::path& base) {
    const std::string type = get_required<std::string>(j, "type", "potential");
    if (type == "poschl_teller") {
        allow_keys(j, {"type", "sigma", "center"}, "potential");
        return json{{"type", type}, {"sigma", get_or(j, "sigma", 1.0)}, {"center", get_or(j, "center", 0.0)}};
    }
    if (type == "harmonic") {
        allow_keys(j, {"type", "omega"}, "potential");
        return json{{"type", type}, {"omega", get_or(j, "omega", 1.0)}};
    }
    if (type == "tophat_inverse") {
        allow_keys(j, {"type", "a", "m"}, "potential");
        return json{{"type", type}, {"a", get_or(j, "a", 1e-3)}, {"m", get_or(j, "m", 8)}};
    }
    if (type == "beam_combine") {
        allow_keys(j, {"type", "spacing"}, "potential");
        return json{{"type", type}, {"spacing", get_or(j, "spacing", 10.0)}};
    }
    if (type == "zero") {
        allow_keys(j, {"type"}, "potential");
        return json{{"type", type}};
    }
    if (type == "file") {
        allow_keys(j, {"type", "path"}, "potential");
        return json{{"type", type},
                    {"path", resolve_path(get_required<std::string>(j, "path", "potential"), base).string()}};
    }
    throw ContractError("potential: unknown type '" + type + "'");
}

inline json normalize_state_source(const json& j, const fs::path& base) {
    const std::string type = get_required<std::string>(j, "type", "state");
    if (type == "ground_state") {
        allow_keys(j, {"type", "potential"}, "state");
        if (!j.contains("potential")) throw ContractError("state: ground_state needs a potential");
        return json{{"type", type}, {"potential", normalize_potential_source(j.at("potential"), base)}};
    }
    if (type == "tophat_proxy") {
        allow_keys(j, {"type", "a", "m"}, "state");
        return json{{"type", type}, {"a", get_or(j, "a", 1e-3)}, {"m", get_or(j, "m", 8)}};
    }
    if (type == "beam_combine") {
        allow_keys(j, {"type", "spacing"}, "state");
        return json{{"type", type}, {"spacing", get_or(j, "spacing", 10.0)}};
    }
    if (type == "file") {
        allow_keys(j, {"type", "path"}, "state");
        return json{{"type", type},
                    {"path", resolve_path(get_required<std::string>(j, "path", "state"), base).string()}};
    }
    throw ContractError("state: unknown type '" + type + "'");
}

// Expects a normalized source.
inline PotentialSamples make_potential(const json& j, const Grid1D& grid) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "poschl_teller")
        return poschl_teller(j.at("sigma").get<double>(), j.at("center").get<double>(), grid);
    if (type == "harmonic") return harmonic(j.at("omega").get<double>(), grid);
    if (type == "tophat_inverse")
        return tophat_terminal(grid, j.at("a").get<double>(), j.at("m").get<int>()).potential;
    if (type == "beam_combine") return beam_combine_initial(j.at("spacing").get<double>(), grid).first;
    if (type == "zero") return PotentialSamples{RealVector(grid.n(), 0.0)};
    return io::read_potential_csv(j.at("path").get<std::string>(), grid);
}

inline Field make_state(const json& j, const Grid1D& grid) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "ground_state") return ground_state(make_potential(j.at("potential"), grid), grid).phi;
    if (type == "tophat_proxy")
        return tophat_terminal(grid, j.at("a").get<double>(), j.at("m").get<int>()).state.phi;
    if (type == "beam_combine") return beam_combine_initial(j.at("spacing").get<double>(), grid).second;
    return io::read_field_csv(j.at("path").get<std::string>(), grid);
}

// ---- optimizer settings ----

inline DEConfig de_from_json(const json& j, DEConfig cfg) {
    allow_keys(j, {"population", "weight_f", "crossover_cr", "generations", "lo", "hi"}, "de");
    cfg.population = get_or(j, "population", cfg.population);
    cfg.weight_f = get_or(j, "weight_f", cfg.weight_f);
    cfg.crossover_cr = get_or(j, "crossover_cr", cfg.crossover_cr);
    cfg.generations = get_or(j, "generations", cfg.generations);
    cfg.lo = get_or(j, "lo", cfg.lo);
    cfg.hi = get_or(j, "hi", cfg.hi);
    return cfg;
}

inline json de_to_json(const DEConfig& c) {
    return json{{"population", c.population}, {"weight_f", c.weight_f}, {"crossover_cr", c.crossover_cr},
                {"generations", c.generations}, {"lo", c.lo}, {"hi", c.hi}};
}

inline GrapeConfig grape_from_json(const json& j, GrapeConfig cfg, const std::string& where) {
    allow_keys(j, {"max_iters", "grad_tol", "armijo_c", "backtrack_ratio", "initial_step", "min_step", "cheb_nodes"},
               where);
    cfg.max_iters = get_or(j, "max_iters", cfg.max_iters);
    cfg.grad_tol = get_or(j, "grad_tol", cfg.grad_tol);
    cfg.armijo_c = get_or(j, "armijo_c", cfg.armijo_c);
    cfg.backtrack_ratio = get_or(j, "backtrack_ratio", cfg.backtrack_ratio);
    cfg.initial_step = get_or(j, "initial_step", cfg.initial_step);
    cfg.min_step = get_or(j, "min_step", cfg.min_step);
    cfg.cheb_nodes = get_or(j, "cheb_nodes", cfg.cheb_nodes);
    return cfg;
}

inline json grape_to_json(const GrapeConfig& c) {
    return json{{"max_iters", c.max_iters},       {"grad_tol", c.grad_tol},
                {"armijo_c", c.armijo_c},         {"backtrack_ratio", c.backtrack_ratio},
                {"initial_step", c.initial_step}, {"min_step", c.min_step},
                {"cheb_nodes", c.cheb_nodes}};
}

// ---- optimize configs ----

struct OptimizeConfig {
    ProblemSpec spec;
    json echo;  // resolved configuration; stage step counts are filled in after the run
};

inline const std::set<std::string> kOptimizeKeys = {
    "command", "preset", "preset_options", "name", "grid", "stages", "gamma_1d", "gamma_2d",
    "n_modes", "refine_2d", "tab_stride", "auto_refine_dz", "max_dz_doublings", "seed",
    "de", "grape", "grape_2d", "stage_steps", "stage_run_de"};

/**
 * Builds a ProblemSpec either from a preset ("preset": "tophat" or
 * "beam-addition", with optional "preset_options") or from explicit "stages".
 * Scalar and optimizer keys override the preset values in both cases.
 */
inline OptimizeConfig optimize_from_json(const json& j, const fs::path& base) {
    try {
        allow_keys(j, kOptimizeKeys, "config");
        if (j.contains("command") && j.at("command") != "optimize")
            throw ContractError("config: command must be 'optimize'");
        json echo = json::object();
        echo["command"] = "optimize";
        ProblemSpec spec;
        if (j.contains("preset")) {
            if (j.contains("stages") || j.contains("grid"))
                throw ContractError("config: 'stages' and 'grid' cannot be combined with a preset");
            const std::string preset = j.at("preset").get<std::string>();
            const json opts = j.value("preset_options", json::object());
            if (preset == "tophat") {
                allow_keys(opts, {"n", "n_steps", "a", "m"}, "preset_options");
                TophatOptions o;
                o.n = get_or(opts, "n", o.n);
                o.n_steps = get_or(opts, "n_steps", o.n_steps);
                o.a = get_or(opts, "a", o.a);
                o.m = get_or(opts, "m", o.m);
                if (o.n < 8 || o.n_steps < 1) throw ContractError("preset_options: n and n_steps are too small");
                spec = preset_tophat(o);
                echo["preset_options"] = json{{"n", o.n}, {"n_steps", o.n_steps}, {"a", o.a}, {"m", o.m}};
            } else if (preset == "beam-addition") {
                allow_keys(opts, {"n", "steps_per_unit", "spacing"}, "preset_options");
                BeamOptions o;
                o.n = get_or(opts, "n", o.n);
                o.steps_per_unit = get_or(opts, "steps_per_unit", o.steps_per_unit);
                o.spacing = get_or(opts, "spacing", o.spacing);
                if (o.n < 8 || o.steps_per_unit < 1)
                    throw ContractError("preset_options: n and steps_per_unit are too small");
                spec = preset_beam_addition(o);
                echo["preset_options"] =
                    json{{"n", o.n}, {"steps_per_unit", o.steps_per_unit}, {"spacing", o.spacing}};
            } else {
                throw ContractError("config: unknown preset '" + preset + "'");
            }
            echo["preset"] = preset;
        } else {
            if (!j.contains("grid") || !j.contains("stages"))
                throw ContractError("config: need either 'preset' or both 'grid' and 'stages'");
            spec.name = get_or<std::string>(j, "name", "custom");
            spec.grid = grid_from_json(j.at("grid"));
            const json& stages = j.at("stages");
            if (!stages.is_array() || stages.empty()) throw ContractError("stages: expected a non-empty array");
            json stage_echo = json::array();
            for (std::size_t s = 0; s < stages.size(); ++s) {
                const json& js = stages[s];
                const std::string where = "stages[" + std::to_string(s) + "]";
                allow_keys(js, {"z0", "z1", "n_steps", "v_initial", "v_terminal", "phi0", "phi_d", "run_de"}, where);
                StageSpec st;
                st.z0 = get_required<double>(js, "z0", where);
                st.z1 = get_required<double>(js, "z1", where);
                st.n_steps = get_required<std::size_t>(js, "n_steps", where);
                st.run_de = get_or(js, "run_de", true);
                if (!js.contains("v_initial") || !js.contains("v_terminal") || !js.contains("phi_d"))
                    throw ContractError(where + ": needs v_initial, v_terminal and phi_d");
                json e{{"z0", st.z0}, {"z1", st.z1}, {"n_steps", st.n_steps}, {"run_de", st.run_de}};
                e["v_initial"] = normalize_potential_source(js.at("v_initial"), base);
                e["v_terminal"] = normalize_potential_source(js.at("v_terminal"), base);
                e["phi_d"] = normalize_state_source(js.at("phi_d"), base);
                if (js.contains("phi0") && !js.at("phi0").is_null())
                    e["phi0"] = normalize_state_source(js.at("phi0"), base);
                st.v_initial = make_potential(e["v_initial"], spec.grid);
                st.v_terminal = make_potential(e["v_terminal"], spec.grid);
                st.phi_d = make_state(e["phi_d"], spec.grid);
                if (e.contains("phi0")) st.phi0 = make_state(e["phi0"], spec.grid);
                spec.stages.push_back(std::move(st));
                stage_echo.push_back(std::move(e));
            }
            echo["name"] = spec.name;
            echo["grid"] = grid_to_json(spec.grid);
            echo["stages"] = std::move(stage_echo);
        }

        spec.gamma_1d = get_or(j, "gamma_1d", spec.gamma_1d);
        spec.gamma_2d = get_or(j, "gamma_2d", spec.gamma_2d);
        spec.n_modes = get_or(j, "n_modes", spec.n_modes);
        spec.refine_2d = get_or(j, "refine_2d", spec.refine_2d);
        spec.tab_stride = get_or(j, "tab_stride", spec.tab_stride);
        spec.auto_refine_dz = get_or(j, "auto_refine_dz", spec.auto_refine_dz);
        spec.max_dz_doublings = get_or(j, "max_dz_doublings", spec.max_dz_doublings);
        spec.seed = get_or(j, "seed", spec.seed);
        if (j.contains("de")) spec.de = de_from_json(j.at("de"), spec.de);
        if (j.contains("grape")) spec.grape = grape_from_json(j.at("grape"), spec.grape, "grape");
        if (j.contains("grape_2d")) spec.grape_2d = grape_from_json(j.at("grape_2d"), spec.grape_2d, "grape_2d");
        if (j.contains("stage_steps")) {
            const auto steps = j.at("stage_steps").get<std::vector<std::size_t>>();
            if (steps.size() != spec.stages.size()) throw ContractError("stage_steps: one entry per stage");
            for (std::size_t s = 0; s < steps.size(); ++s) spec.stages[s].n_steps = steps[s];
        }
        if (j.contains("stage_run_de")) {
            const auto flags = j.at("stage_run_de").get<std::vector<bool>>();
            if (flags.size() != spec.stages.size()) throw ContractError("stage_run_de: one entry per stage");
            for (std::size_t s = 0; s < flags.size(); ++s) spec.stages[s].run_de = flags[s];
        }
        spec.validate();

        echo["gamma_1d"] = spec.gamma_1d;
        echo["gamma_2d"] = spec.gamma_2d;
        echo["n_modes"] = spec.n_modes;
        echo["refine_2d"] = spec.refine_2d;
        echo["tab_stride"] = spec.tab_stride;
        echo["auto_refine_dz"] = spec.auto_refine_dz;
        echo["max_dz_doublings"] = spec.max_dz_doublings;
        echo["seed"] = spec.seed;
        echo["de"] = de_to_json(spec.de);
        echo["grape"] = grape_to_json(spec.grape);
        echo["grape_2d"] = grape_to_json(spec.grape_2d);
        std::vector<std::size_t> steps;
        std::vector<bool> run_de;
        for (const StageSpec& st : spec.stages) {
            steps.push_back(st.n_steps);
            run_de.push_back(st.run_de);
        }
        echo["stage_steps"] = steps;
        echo["stage_run_de"] = run_de;
        if (echo.contains("stages"))
            for (std::size_t s = 0; s < steps.size(); ++s) echo["stages"][s]["n_steps"] = steps[s];
        return OptimizeConfig{std::move(spec), std::move(echo)};
    } catch (const json::exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
}

// Pins the step counts actually used so that re-ingesting the echo repeats the run.
inline void record_resolved_steps(json& echo, const RunResult& r) {
    std::vector<std::size_t> steps;
    for (const StageResult& s : r.stages) steps.push_back(s.axial.n_steps());
    if (steps.size() != echo["stage_steps"].size()) return;
    echo["stage_steps"] = steps;
    echo["auto_refine_dz"] = false;
    if (echo.contains("stages"))
        for (std::size_t s = 0; s < steps.size(); ++s) echo["stages"][s]["n_steps"] = steps[s];
}

// ---- propagate configs ----
//
// {"grid": {...}, "phi0": <state>, "phi_d": <state>, "segments": [
//    {"type": "separable", "z0", "z1", "n_steps", "controls": path, "v_initial": <potential>, "v_terminal": <potential>}
//  | {"type": "tabulated", "path", "n_steps"}
//  | {"type": "static", "z0", "z1", "n_steps", "potential": <potential>} ]}

struct Segment {
    std::string type;
    AxialGrid axial = AxialGrid(0.0, 1.0, 1);
    std::optional<SeparableTimeline> separable;
    std::optional<TabulatedTimeline> tabulated;
};

struct PropagateConfig {
    Grid1D grid = Grid1D(-1.0, 1.0, 8);
    Field phi0;
    Field phi_d;
    std::vector<Segment> segments;
    json echo;
};

inline PropagateConfig propagate_from_json(const json& j, const fs::path& base) {
    try {
        allow_keys(j, {"command", "grid", "phi0", "phi_d", "segments"}, "config");
        if (j.contains("command") && j.at("command") != "propagate")
            throw ContractError("config: command must be 'propagate'");
        if (!j.contains("grid") || !j.contains("phi0") || !j.contains("phi_d") || !j.contains("segments"))
            throw ContractError("config: propagate needs grid, phi0, phi_d and segments");
        PropagateConfig out;
        out.grid = grid_from_json(j.at("grid"));
        json echo{{"command", "propagate"}, {"grid", grid_to_json(out.grid)}};
        echo["phi0"] = normalize_state_source(j.at("phi0"), base);
        echo["phi_d"] = normalize_state_source(j.at("phi_d"), base);
        out.phi0 = make_state(echo["phi0"], out.grid);
        out.phi_d = make_state(echo["phi_d"], out.grid);
        const json& segs = j.at("segments");
        if (!segs.is_array() || segs.empty()) throw ContractError("segments: expected a non-empty array");
        echo["segments"] = json::array();
        for (std::size_t s = 0; s < segs.size(); ++s) {
            const json& js = segs[s];
            const std::string where = "segments[" + std::to_string(s) + "]";
            const std::string type = get_required<std::string>(js, "type", where);
            Segment seg;
            seg.type = type;
            json e{{"type", type}};
            if (type == "tabulated") {
                allow_keys(js, {"type", "path", "n_steps"}, where);
                const fs::path p = resolve_path(get_required<std::string>(js, "path", where), base);
                const io::Matrix m = io::read_matrix_csv(p);
                seg.tabulated = io::timeline_from_matrix(m, out.grid, p.string());
                const auto n = get_or<std::size_t>(js, "n_steps", seg.tabulated->axial.n_steps());
                if (n < 1) throw ContractError(where + ": n_steps must be positive");
                seg.axial = AxialGrid(seg.tabulated->axial.z0(), seg.tabulated->axial.z1(), n);
                e["path"] = p.string();
                e["n_steps"] = n;
            } else if (type == "separable" || type == "static") {
                allow_keys(js,
                           type == "separable"
                               ? std::set<std::string>{"type", "z0", "z1", "n_steps", "controls", "v_initial", "v_terminal"}
                               : std::set<std::string>{"type", "z0", "z1", "n_steps", "potential"},
                           where);
                const double z0 = get_required<double>(js, "z0", where);
                const double z1 = get_required<double>(js, "z1", where);
                const auto n = get_required<std::size_t>(js, "n_steps", where);
                if (!(z1 > z0) || n < 1) throw ContractError(where + ": empty interval");
                seg.axial = AxialGrid(z0, z1, n);
                e["z0"] = z0;
                e["z1"] = z1;
                e["n_steps"] = n;
                if (type == "separable") {
                    if (!js.contains("v_initial") || !js.contains("v_terminal"))
                        throw ContractError(where + ": needs v_initial and v_terminal");
                    const fs::path cp = resolve_path(get_required<std::string>(js, "controls", where), base);
                    e["controls"] = cp.string();
                    e["v_initial"] = normalize_potential_source(js.at("v_initial"), base);
                    e["v_terminal"] = normalize_potential_source(js.at("v_terminal"), base);
                    io::ControlPair c = io::read_control_csv(cp, seg.axial);
                    seg.separable.emplace(make_potential(e["v_initial"], out.grid),
                                          make_potential(e["v_terminal"], out.grid), std::move(c.u), std::move(c.v));
                } else {
                    if (!js.contains("potential")) throw ContractError(where + ": needs a potential");
                    e["potential"] = normalize_potential_source(js.at("potential"), base);
                    const PotentialSamples v = make_potential(e["potential"], out.grid);
                    seg.separable.emplace(v, v, Control::ramp(seg.axial, 1.0, 0.0), Control::ramp(seg.axial, 0.0, 1.0));
                }
            } else {
                throw ContractError(where + ": unknown segment type '" + type + "'");
            }
            if (!out.segments.empty() && out.segments.back().axial.z1() != seg.axial.z0())
                throw ContractError(where + ": segments must be contiguous in z");
            out.segments.push_back(std::move(seg));
            echo["segments"].push_back(std::move(e));
        }
        out.echo = std::move(echo);
        return out;
    } catch (const json::exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
}

// ---- eigen configs ----
// {"grid": {...}, "potential": <potential>}

struct EigenConfig {
    Grid1D grid = Grid1D(-1.0, 1.0, 8);
    json potential;
    json echo;
};

inline EigenConfig eigen_from_json(const json& j, const fs::path& base) {
    try {
        allow_keys(j, {"command", "grid", "potential"}, "config");
        if (j.contains("command") && j.at("command") != "eigen") throw ContractError("config: command must be 'eigen'");
        if (!j.contains("grid") || !j.contains("potential"))
            throw ContractError("config: eigen needs grid and potential");
        EigenConfig out;
        out.grid = grid_from_json(j.at("grid"));
        out.potential = normalize_potential_source(j.at("potential"), base);
        out.echo = json{{"command", "eigen"}, {"grid", grid_to_json(out.grid)}, {"potential", out.potential}};
        return out;
    } catch (const json::exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
}

}  // namespace grin::config
