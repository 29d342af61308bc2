// Command-line driver: eigen, optimize, propagate.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "grin/config.hpp"
#include "grin/eigensolver.hpp"
#include "grin/errors.hpp"
#include "grin/io.hpp"
#include "grin/objective.hpp"
#include "grin/parallel.hpp"
#include "grin/pipeline.hpp"
#include "grin/propagator.hpp"

namespace fs = std::filesystem;
using grin::config::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitUser = 1;
constexpr int kExitDomain = 2;

fs::path default_output_dir() {
    if (const char* env = std::getenv("GRIN_OUTPUT_DIR"); env && *env) return env;
    return "grin-out";
}

// Collects output files in memory; nothing touches the disk until commit().
class Bundle {
public:
    Bundle(fs::path dir, std::string command, std::uint64_t seed) : dir_(std::move(dir)) {
        manifest_["version"] = kVersion;
        manifest_["command"] = std::move(command);
        manifest_["seed"] = seed;
        manifest_["files"] = json::array();
    }

    void add(const std::string& name, const std::string& file, const std::string& kind, std::string content) {
        manifest_["files"].push_back(json{{"name", name}, {"path", file}, {"kind", kind}});
        files_.emplace_back(file, std::move(content));
    }

    json& manifest() { return manifest_; }

    void commit() {
        for (const auto& [file, content] : files_) grin::io::write_text_atomic(dir_ / file, content);
        grin::io::write_text_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n");
    }

private:
    fs::path dir_;
    json manifest_;
    std::vector<std::pair<std::string, std::string>> files_;
};

std::vector<grin::io::HistoryRow> descent_rows(const grin::DescentHistory& h) {
    std::vector<grin::io::HistoryRow> rows;
    for (std::size_t i = 0; i < h.objective_per_iter.size(); ++i)
        rows.push_back({h.objective_per_iter[i], h.infidelity_per_iter[i], h.tikhonov_per_iter[i]});
    return rows;
}

std::vector<grin::io::HistoryRow> de_rows(const grin::StageResult& s) {
    std::vector<grin::io::HistoryRow> rows;
    for (std::size_t i = 0; i < s.de_best_per_generation.size(); ++i) {
        const double obj = s.de_best_per_generation[i];
        const double tik = s.de_tikhonov_per_generation[i];
        rows.push_back({obj, obj - tik, tik});
    }
    return rows;
}

grin::io::Matrix intensity_matrix(const grin::Trajectory& traj, const grin::Grid1D& grid) {
    grin::io::Matrix m{grid.n(), traj.n_snapshots(), grid.x_min(), grid.dx(), traj.z(0),
                       traj.axial.dz() * static_cast<double>(traj.stride), {}};
    m.values.resize(m.nx * m.nz);
    for (std::size_t s = 0; s < m.nz; ++s) {
        const auto snap = traj.snapshot(s);
        for (std::size_t j = 0; j < m.nx; ++j) m.values[s * m.nx + j] = std::norm(snap[j]);
    }
    return m;
}

// ---- eigen ----

struct EigenOptions {
    std::string preset;
    std::string config;
    double sigma = 1.0;
    double omega = 1.0;
    double a = 1e-3;
    int m = 8;
    std::size_t n = 1024;
    double x_min = -5.0 * std::numbers::pi;
    double x_max = 5.0 * std::numbers::pi;
    std::string out;
};

int cmd_eigen(const EigenOptions& o) {
    grin::config::EigenConfig cfg;
    if (!o.config.empty()) {
        const fs::path p = fs::absolute(o.config);
        cfg = grin::config::eigen_from_json(grin::config::load_json(p), p.parent_path());
    } else {
        json src;
        if (o.preset == "poschl-teller") src = json{{"type", "poschl_teller"}, {"sigma", o.sigma}, {"center", 0.0}};
        else if (o.preset == "harmonic") src = json{{"type", "harmonic"}, {"omega", o.omega}};
        else if (o.preset == "tophat-inverse") src = json{{"type", "tophat_inverse"}, {"a", o.a}, {"m", o.m}};
        else throw grin::ContractError("eigen: need --config or --preset {poschl-teller, harmonic, tophat-inverse}");
        cfg = grin::config::eigen_from_json(
            json{{"grid", {{"x_min", o.x_min}, {"x_max", o.x_max}, {"n", o.n}}}, {"potential", src}}, fs::current_path());
    }
    const fs::path out = o.out.empty() ? default_output_dir() : fs::path(o.out);
    const grin::Grid1D& grid = cfg.grid;

    Bundle bundle(out, "eigen", 0);
    json& man = bundle.manifest();
    man["config"] = cfg.echo;
    grin::PotentialSamples v;
    grin::EigenPair pair;
    if (cfg.potential["type"] == "tophat_inverse") {
        const double a = cfg.potential["a"].get<double>();
        const int m = cfg.potential["m"].get<int>();
        const grin::Field target = grin::tophat_target(a, m, grid);
        grin::TerminalRefinement r = grin::tophat_terminal(grid, a, m);
        v = std::move(r.potential);
        pair = std::move(r.state);
        const double overlap = std::abs(grin::inner_product(target, pair.phi, grid));
        man["target_l2_error"] = std::sqrt(std::max(0.0, 2.0 - 2.0 * overlap));
        man["refine_iterations"] = r.iterations;
        bundle.add("target", "target.csv", "field", grin::io::field_csv(grid, target));
    } else {
        v = grin::config::make_potential(cfg.potential, grid);
        pair = grin::ground_state(v, grid);
    }
    man["lambda"] = pair.lambda;
    man["residual"] = grin::eigen_residual(v, grid, pair);
    bundle.add("state", "state.csv", "field", grin::io::field_csv(grid, pair.phi));
    bundle.add("potential", "potential.csv", "potential", grin::io::potential_csv(grid, v.values));
    bundle.commit();
    std::cout << "lambda = " << grin::io::format_double(pair.lambda) << "\n";
    return kExitOk;
}

// ---- optimize ----

struct OptimizeOptions {
    std::string preset;
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string out;
};

// Stages can be tabulated on one (x, z) table only when they share the axial step.
bool shares_axial_step(const grin::ProblemSpec& spec) {
    const double rate = static_cast<double>(spec.stages.front().n_steps) /
                        (spec.stages.front().z1 - spec.stages.front().z0);
    for (const auto& st : spec.stages) {
        const double r = static_cast<double>(st.n_steps) / (st.z1 - st.z0);
        if (std::abs(r - rate) > 1e-9 * rate || st.n_steps % spec.tab_stride != 0) return false;
    }
    return true;
}

int cmd_optimize(const OptimizeOptions& o) {
    json j;
    fs::path base = fs::current_path();
    if (!o.config.empty()) {
        const fs::path p = fs::absolute(o.config);
        j = grin::config::load_json(p);
        base = p.parent_path();
        if (!o.preset.empty()) j["preset"] = o.preset;
    } else if (!o.preset.empty()) {
        j = json{{"preset", o.preset}};
    } else {
        throw grin::ContractError("optimize: need --config or --preset {tophat, beam-addition}");
    }
    if (o.seed) j["seed"] = *o.seed;
    grin::config::OptimizeConfig cfg = grin::config::optimize_from_json(j, base);
    cfg.spec.de.threads = o.threads;
    const fs::path out = o.out.empty() ? default_output_dir() : fs::path(o.out);

    const grin::RunResult r = grin::run_full(cfg.spec);
    grin::config::record_resolved_steps(cfg.echo, r);

    // The resolved spec: step counts as actually run.
    grin::ProblemSpec spec = cfg.spec;
    for (std::size_t s = 0; s < r.stages.size(); ++s) spec.stages[s].n_steps = r.stages[s].axial.n_steps();
    const grin::Grid1D& grid = spec.grid;

    Bundle bundle(out, "optimize", spec.seed);
    json& man = bundle.manifest();
    man["config"] = cfg.echo;
    man["problem"] = r.problem;
    man["stalled"] = r.stalled;
    man["ok"] = r.ok();
    if (!r.ok()) {
        man["error"] = r.error;
        man["failed_stage"] = *r.failed_stage;
    }
    json checks = json::array();
    for (const auto& c : r.order_checks)
        checks.push_back(json{{"stage", c.stage}, {"n_steps", c.n_steps}, {"ratio", c.ratio},
                              {"coarse_difference", c.coarse_difference}, {"passed", c.passed}});
    man["order_checks"] = checks;
    json timing = json::object();
    for (const auto& t : r.timing) timing[t.phase] = t.seconds;
    man["timing_seconds"] = timing;

    bundle.add("initial_state", "initial_state.csv", "field", grin::io::field_csv(grid, spec.stages.front().phi0));
    json stages = json::array();
    for (std::size_t s = 0; s < r.stages.size(); ++s) {
        const grin::StageResult& st = r.stages[s];
        const std::string tag = "stage" + std::to_string(s);
        stages.push_back(json{{"z0", st.axial.z0()},
                              {"z1", st.axial.z1()},
                              {"n_steps", st.axial.n_steps()},
                              {"baseline_infidelity", st.baseline_infidelity},
                              {"baseline_objective", st.baseline_objective},
                              {"de_infidelity", st.de_infidelity},
                              {"de_objective", st.de_objective},
                              {"de_evaluations", st.de_evaluations},
                              {"de_non_finite", st.de_non_finite},
                              {"grape_accepted_steps", st.grape.accepted_steps},
                              {"grape_stop_reason", st.grape.stop_reason},
                              {"final_infidelity", st.final_infidelity},
                              {"final_objective", st.final_objective}});
        bundle.add(tag + ".controls", "controls_" + tag + ".csv", "control", grin::io::control_csv(st.u, st.v));
        bundle.add(tag + ".v_initial", "potential_initial_" + tag + ".csv", "potential",
                   grin::io::potential_csv(grid, spec.stages[s].v_initial.values));
        bundle.add(tag + ".v_terminal", "potential_terminal_" + tag + ".csv", "potential",
                   grin::io::potential_csv(grid, spec.stages[s].v_terminal.values));
        bundle.add(tag + ".phi0", "entry_state_" + tag + ".csv", "field", grin::io::field_csv(grid, st.phi0));
        bundle.add(tag + ".phi_d", "target_state_" + tag + ".csv", "field",
                   grin::io::field_csv(grid, spec.stages[s].phi_d));
        bundle.add(tag + ".terminal", "terminal_" + tag + ".csv", "field", grin::io::field_csv(grid, st.terminal));
        bundle.add(tag + ".history.de", "history_" + tag + "_de.csv", "history", grin::io::history_csv(de_rows(st)));
        bundle.add(tag + ".history.grape", "history_" + tag + "_grape.csv", "history",
                   grin::io::history_csv(descent_rows(st.grape)));
    }
    man["stages"] = stages;
    if (!r.stages.empty()) {
        man["baseline_infidelity"] = r.stages.front().baseline_infidelity;
        man["final_infidelity"] = r.final_infidelity;
        bundle.add("terminal", "terminal.csv", "field", grin::io::field_csv(grid, r.terminal));
    }

    // Replay description for `propagate`, plus the (x, z) exports.
    const bool complete = r.stages.size() == spec.stages.size();
    json replay{{"command", "propagate"},
                {"grid", grin::config::grid_to_json(grid)},
                {"phi0", {{"type", "file"}, {"path", "initial_state.csv"}}},
                {"phi_d",
                 {{"type", "file"}, {"path", "target_state_stage" + std::to_string(spec.stages.size() - 1) + ".csv"}}},
                {"segments", json::array()}};
    if (r.refined) {
        man["refine_2d"] = json{{"accepted_steps", r.refined->history.accepted_steps},
                                {"stop_reason", r.refined->history.stop_reason},
                                {"initial_objective", r.refined->history.objective_per_iter.front()},
                                {"final_objective", r.refined->history.objective_per_iter.back()},
                                {"final_infidelity", r.refined->history.infidelity_per_iter.back()}};
        bundle.add("refine_2d.history", "history_refine_2d.csv", "history",
                   grin::io::history_csv(descent_rows(r.refined->history)));
        bundle.add("potential_2d_assembled", "potential_2d_assembled.csv", "potential-2d",
                   grin::io::matrix_csv(grin::io::to_matrix(*r.assembled, grid)));
        bundle.add("potential_2d", "potential_2d.csv", "potential-2d",
                   grin::io::matrix_csv(grin::io::to_matrix(r.refined->v, grid)));
        const grin::PotentialProblem prob = grin::refinement_problem(spec, r.stages);
        replay["segments"].push_back(
            json{{"type", "tabulated"}, {"path", "potential_2d.csv"}, {"n_steps", prob.axial.n_steps()}});
        const grin::Trajectory traj = grin::propagate_forward_trajectory(prob.phi0, grid, r.refined->v, prob.axial,
                                                                         spec.tab_stride);
        bundle.add("intensity_2d", "intensity_2d.csv", "field-2d",
                   grin::io::matrix_csv(intensity_matrix(traj, grid)));
    } else if (complete) {
        for (std::size_t s = 0; s < r.stages.size(); ++s) {
            const std::string tag = "stage" + std::to_string(s);
            replay["segments"].push_back(json{{"type", "separable"},
                                              {"z0", r.stages[s].axial.z0()},
                                              {"z1", r.stages[s].axial.z1()},
                                              {"n_steps", r.stages[s].axial.n_steps()},
                                              {"controls", "controls_" + tag + ".csv"},
                                              {"v_initial", {{"type", "file"}, {"path", "potential_initial_" + tag + ".csv"}}},
                                              {"v_terminal", {{"type", "file"}, {"path", "potential_terminal_" + tag + ".csv"}}}});
        }
        if (shares_axial_step(spec)) {
            const grin::TabulatedTimeline tab = grin::assemble_tabulated(spec, r.stages);
            bundle.add("potential_2d", "potential_2d.csv", "potential-2d",
                       grin::io::matrix_csv(grin::io::to_matrix(tab, grid)));
            grin::io::Matrix inten;
            for (std::size_t s = 0; s < r.stages.size(); ++s) {
                const grin::SeparableTimeline tl(spec.stages[s].v_initial, spec.stages[s].v_terminal, r.stages[s].u,
                                                 r.stages[s].v);
                const grin::Trajectory traj = grin::propagate_forward_trajectory(r.stages[s].phi0, grid, tl,
                                                                                 r.stages[s].axial, spec.tab_stride);
                grin::io::Matrix m = intensity_matrix(traj, grid);
                if (s == 0) {
                    inten = std::move(m);
                } else {
                    inten.values.insert(inten.values.end(), m.values.begin() + static_cast<std::ptrdiff_t>(m.nx),
                                        m.values.end());
                    inten.nz += m.nz - 1;
                }
            }
            bundle.add("intensity_2d", "intensity_2d.csv", "field-2d", grin::io::matrix_csv(inten));
        }
    }
    if (!replay["segments"].empty()) bundle.add("replay", "replay.json", "config", replay.dump(2) + "\n");
    bundle.commit();

    std::cout << "final infidelity = " << grin::io::format_double(r.final_infidelity);
    if (!r.stages.empty())
        std::cout << " (baseline " << grin::io::format_double(r.stages.front().baseline_infidelity) << ")";
    std::cout << (r.stalled ? " [stalled]" : "") << "\n";
    if (!r.ok()) {
        std::cerr << "error: " << r.error << "\n";
        return kExitDomain;
    }
    return kExitOk;
}

// ---- propagate ----

int cmd_propagate(const std::string& config_path, const std::string& out_dir) {
    const fs::path p = fs::absolute(config_path);
    const grin::config::PropagateConfig cfg =
        grin::config::propagate_from_json(grin::config::load_json(p), p.parent_path());
    const fs::path out = out_dir.empty() ? default_output_dir() : fs::path(out_dir);
    grin::Field psi = cfg.phi0;
    for (const auto& seg : cfg.segments) {
        psi = seg.tabulated ? grin::propagate_forward(psi, cfg.grid, *seg.tabulated, seg.axial)
                            : grin::propagate_forward(psi, cfg.grid, *seg.separable, seg.axial);
    }
    const double inf = grin::infidelity(psi, cfg.phi_d, cfg.grid);
    Bundle bundle(out, "propagate", 0);
    bundle.manifest()["config"] = cfg.echo;
    bundle.manifest()["infidelity"] = inf;
    bundle.add("terminal", "terminal.csv", "field", grin::io::field_csv(cfg.grid, psi));
    bundle.commit();
    std::cout << "infidelity = " << grin::io::format_double(inf) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GRIN waveguide beam reshaping by optimal control"};
    app.require_subcommand(1);

    EigenOptions eo;
    auto* eigen = app.add_subcommand("eigen", "Ground state of a potential, or top-hat inverse design");
    eigen->add_option("--preset", eo.preset, "poschl-teller | harmonic | tophat-inverse");
    eigen->add_option("--config", eo.config, "JSON config with grid and potential");
    eigen->add_option("--sigma", eo.sigma, "Poschl-Teller depth parameter");
    eigen->add_option("--omega", eo.omega, "Harmonic frequency");
    eigen->add_option("--a", eo.a, "Top-hat width parameter");
    eigen->add_option("--m", eo.m, "Top-hat exponent");
    eigen->add_option("--n", eo.n, "Grid points");
    eigen->add_option("--x-min", eo.x_min);
    eigen->add_option("--x-max", eo.x_max);
    eigen->add_option("--out", eo.out, "Output directory (default $GRIN_OUTPUT_DIR or ./grin-out)");

    OptimizeOptions oo;
    std::uint64_t seed = 0;
    auto* optimize = app.add_subcommand("optimize", "Hybrid DE + GRAPE design of a waveguide potential");
    optimize->add_option("--preset", oo.preset, "tophat | beam-addition");
    optimize->add_option("--config", oo.config, "JSON problem config");
    auto* seed_opt = optimize->add_option("--seed", seed, "DE seed");
    optimize->add_option("--threads", oo.threads, "Worker threads for DE evaluations")->check(CLI::Range(1u, 1024u));
    optimize->add_option("--out", oo.out, "Output directory (default $GRIN_OUTPUT_DIR or ./grin-out)");

    std::string prop_config;
    std::string prop_out;
    auto* propagate = app.add_subcommand("propagate", "Replay a stored design and report its infidelity");
    propagate->add_option("--config", prop_config, "Replay config")->required();
    propagate->add_option("--out", prop_out, "Output directory (default $GRIN_OUTPUT_DIR or ./grin-out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUser;
    }

    try {
        if (*eigen) return cmd_eigen(eo);
        if (*optimize) {
            if (*seed_opt) oo.seed = seed;
            return cmd_optimize(oo);
        }
        return cmd_propagate(prop_config, prop_out);
    } catch (const grin::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUser;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUser;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
}
