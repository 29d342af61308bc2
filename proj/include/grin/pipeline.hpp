#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grin/controls.hpp"
#include "grin/eigensolver.hpp"
#include "grin/errors.hpp"
#include "grin/objective.hpp"
#include "grin/optim_global.hpp"
#include "grin/optim_local.hpp"
#include "grin/potentials.hpp"
#include "grin/propagator.hpp"
#include "grin/spectral.hpp"

namespace grin {

struct StageSpec {
    double z0 = 0.0;
    double z1 = 1.0;
    std::size_t n_steps = 1000;
    PotentialSamples v_initial;
    PotentialSamples v_terminal;
    Field phi0;  // empty: enter with the previous stage's terminal field
    Field phi_d;
    bool run_de = true;
};

struct ProblemSpec {
    std::string name;
    Grid1D grid = Grid1D(-1.0, 1.0, 8);
    std::vector<StageSpec> stages;
    double gamma_1d = 1e-6;
    double gamma_2d = 1e-8;
    DEConfig de;
    GrapeConfig grape;
    GrapeConfig grape_2d;
    std::size_t n_modes = kDefaultAnsatzModes;
    bool refine_2d = false;
    std::size_t tab_stride = 10;  // propagation steps per tabulated slice in the 2D phase
    bool auto_refine_dz = true;
    std::size_t max_dz_doublings = 3;
    std::uint64_t seed = 7;

    void validate() const {
        require(!stages.empty(), "ProblemSpec: no stages");
        require(gamma_1d >= 0.0 && gamma_2d >= 0.0, "ProblemSpec: gamma must be non-negative");
        require(n_modes >= 1, "ProblemSpec: need at least one ansatz mode");
        de.validate();
        grape.validate();
        if (refine_2d) grape_2d.validate();
        require(tab_stride >= 1, "ProblemSpec: tab_stride must be positive");
        for (std::size_t s = 0; s < stages.size(); ++s) {
            const StageSpec& st = stages[s];
            require(st.z1 > st.z0 && st.n_steps >= 1, "ProblemSpec: empty stage interval");
            require(st.v_initial.size() == grid.n() && st.v_terminal.size() == grid.n(),
                    "ProblemSpec: stage potential does not match grid");
            require(st.phi_d.size() == grid.n(), "ProblemSpec: stage target does not match grid");
            require(std::abs(norm(st.phi_d, grid) - 1.0) <= 1e-10, "ProblemSpec: stage target must have unit norm");
            if (s == 0) {
                require(st.phi0.size() == grid.n(), "ProblemSpec: first stage needs an entry state");
            }
            if (!st.phi0.empty()) {
                require(st.phi0.size() == grid.n(), "ProblemSpec: stage entry state does not match grid");
                require(std::abs(norm(st.phi0, grid) - 1.0) <= 1e-10,
                        "ProblemSpec: stage entry state must have unit norm");
            }
            if (s > 0) {
                const StageSpec& prev = stages[s - 1];
                require(prev.z1 == st.z0, "ProblemSpec: stage intervals must be contiguous");
                require(prev.v_terminal.values == st.v_initial.values,
                        "ProblemSpec: stage potentials must be continuous across stage boundaries");
            }
        }
        if (refine_2d) {
            const double rate = static_cast<double>(stages.front().n_steps) /
                                (stages.front().z1 - stages.front().z0);
            for (const StageSpec& st : stages) {
                const double r = static_cast<double>(st.n_steps) / (st.z1 - st.z0);
                require(std::abs(r - rate) <= 1e-9 * rate,
                        "ProblemSpec: 2D refinement needs the same axial step in every stage");
                require(st.n_steps % tab_stride == 0, "ProblemSpec: tab_stride must divide every stage's steps");
            }
        }
    }
};

struct OrderCheck {
    std::size_t stage = 0;
    std::size_t n_steps = 0;
    double ratio = 0.0;
    double coarse_difference = 0.0;
    bool passed = false;
};

struct StageResult {
    AxialGrid axial;
    Field phi0;
    double baseline_objective = 0.0;
    double baseline_infidelity = 0.0;
    std::vector<double> de_best_per_generation;
    std::vector<double> de_tikhonov_per_generation;  // of each generation's best agent
    std::size_t de_evaluations = 0;
    std::size_t de_non_finite = 0;
    Control u;
    Control v;
    double de_objective = 0.0;
    double de_infidelity = 0.0;
    DescentHistory grape;
    Field terminal;
    double final_objective = 0.0;
    double final_infidelity = 0.0;
};

struct PhaseTiming {
    std::string phase;
    double seconds = 0.0;
};

struct RunResult {
    std::string problem;
    std::uint64_t seed = 0;
    std::vector<OrderCheck> order_checks;
    std::vector<StageResult> stages;
    std::optional<TabulatedTimeline> assembled;  // separable optimum tabulated on (x, z)
    std::optional<PotentialDescentResult> refined;
    Field terminal;
    double final_infidelity = 0.0;
    std::vector<PhaseTiming> timing;
    bool stalled = false;
    std::string error;
    std::optional<std::size_t> failed_stage;

    bool ok() const { return error.empty(); }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline ControlProblem stage_problem(const ProblemSpec& spec, const StageSpec& st, Field phi0) {
    return ControlProblem{spec.grid, AxialGrid(st.z0, st.z1, st.n_steps), st.v_initial, st.v_terminal,
                          std::move(phi0), st.phi_d, spec.gamma_1d};
}

}  // namespace detail

/**
 * Self-convergence of the split-step integrator on the stage's ramp timeline.
 * Differences below 1e-9 count as a pass (nothing left to converge).
 */
inline OrderCheck check_step_order(const ControlProblem& prob) {
    const Control u = Control::ramp(prob.axial, 1.0, 0.0);
    const Control v = Control::ramp(prob.axial, 0.0, 1.0);
    const SeparableTimeline tl = prob.timeline(u, v);
    const AxialGrid half(prob.axial.z0(), prob.axial.z1(), prob.axial.n_steps() * 2);
    const AxialGrid quarter(prob.axial.z0(), prob.axial.z1(), prob.axial.n_steps() * 4);
    const Field a = propagate_forward(prob.phi0, prob.grid, tl, prob.axial);
    const Field b = propagate_forward(prob.phi0, prob.grid, tl, half);
    const Field c = propagate_forward(prob.phi0, prob.grid, tl, quarter);
    double e1 = 0.0;
    double e2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        e1 += std::norm(a[j] - b[j]);
        e2 += std::norm(b[j] - c[j]);
    }
    OrderCheck out;
    out.n_steps = prob.axial.n_steps();
    out.coarse_difference = std::sqrt(e1 * prob.grid.dx());
    out.ratio = e2 > 0.0 ? std::sqrt(e1 / e2) : 0.0;
    out.passed = (out.ratio >= 3.5 && out.ratio <= 4.5) || out.coarse_difference < 1e-9;
    return out;
}

/**
 * Doubles each stage's step count until the order check passes (or the
 * doubling budget runs out). With 2D refinement every stage is refined by
 * the same factor so the stages share one axial step.
 */
inline std::vector<OrderCheck> resolve_step_counts(ProblemSpec& spec) {
    std::vector<OrderCheck> log;
    std::vector<std::size_t> factor(spec.stages.size(), 1);
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        const StageSpec& st = spec.stages[s];
        const Field& phi0 = st.phi0.empty() ? spec.stages[s - 1].phi_d : st.phi0;
        for (std::size_t d = 0;; ++d) {
            StageSpec trial = st;
            trial.n_steps = st.n_steps * factor[s];
            OrderCheck c = check_step_order(detail::stage_problem(spec, trial, phi0));
            c.stage = s;
            log.push_back(c);
            if (c.passed || d >= spec.max_dz_doublings) break;
            factor[s] *= 2;
        }
    }
    if (spec.refine_2d) {
        const std::size_t f = *std::max_element(factor.begin(), factor.end());
        std::fill(factor.begin(), factor.end(), f);
    }
    for (std::size_t s = 0; s < spec.stages.size(); ++s) spec.stages[s].n_steps *= factor[s];
    return log;
}

/**
 * DE over the sine-series ansatz, then GRAPE warm-started from the DE winner.
 * Failures are rethrown as StageError carrying the stage index.
 */
inline StageResult run_hybrid_stage(const ControlProblem& prob, const DEConfig& de, const GrapeConfig& grape,
                                    std::size_t n_modes, bool run_de, std::size_t stage_index,
                                    std::vector<PhaseTiming>* timing = nullptr) {
    try {
        const AxialGrid& ax = prob.axial;
        const Control ramp_u = Control::ramp(ax, 1.0, 0.0);
        const Control ramp_v = Control::ramp(ax, 0.0, 1.0);
        const ObjectiveValue baseline = evaluate_objective(prob, ramp_u, ramp_v);

        detail::Stopwatch de_clock;
        std::vector<double> de_hist{baseline.total};
        std::vector<double> de_tik{baseline.tikhonov};
        std::size_t de_evals = 0;
        std::size_t de_bad = 0;
        Control u = ramp_u;
        Control v = ramp_v;
        ObjectiveValue after_de = baseline;
        if (run_de) {
            const ControlDEResult r = de_over_controls(prob, de, n_modes);
            de_hist = r.history.best_value_per_generation;
            de_tik.clear();
            for (const auto& agent : r.history.best_agent_per_generation) {
                const std::span<const double> a(agent);
                const Control cu = evaluate_ansatz(coefficients_from(a.first(n_modes), 1.0, 0.0, ax), ax);
                const Control cv = evaluate_ansatz(coefficients_from(a.last(n_modes), 0.0, 1.0, ax), ax);
                de_tik.push_back(tikhonov_cost_1d(cu, prob.gamma) + tikhonov_cost_1d(cv, prob.gamma));
            }
            de_evals = r.history.evaluations;
            de_bad = r.history.non_finite;
            u = evaluate_ansatz(r.u, ax);
            v = evaluate_ansatz(r.v, ax);
            after_de = evaluate_objective(prob, u, v);
        }
        if (timing) timing->push_back({"stage" + std::to_string(stage_index) + ".de", de_clock.seconds()});

        detail::Stopwatch grape_clock;
        ControlDescentResult g = grape_descend_1d(prob, u, v, grape);
        if (timing) timing->push_back({"stage" + std::to_string(stage_index) + ".grape", grape_clock.seconds()});

        const double final_inf = g.history.infidelity_per_iter.back();
        const double final_obj = g.history.objective_per_iter.back();
        return StageResult{ax,
                           prob.phi0,
                           baseline.total,
                           baseline.infidelity,
                           std::move(de_hist),
                           std::move(de_tik),
                           de_evals,
                           de_bad,
                           std::move(g.u),
                           std::move(g.v),
                           after_de.total,
                           after_de.infidelity,
                           std::move(g.history),
                           std::move(g.terminal),
                           final_obj,
                           final_inf};
    } catch (const StageError&) {
        throw;
    } catch (const ContractError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage_index, e.what());
    }
}

// Samples the per-stage separable potentials on one (x, z) table.
inline TabulatedTimeline assemble_tabulated(const ProblemSpec& spec, const std::vector<StageResult>& stages) {
    require(stages.size() == spec.stages.size(), "assemble_tabulated: missing stage results");
    std::size_t total = 0;
    for (const StageSpec& st : spec.stages) total += st.n_steps;
    require(total % spec.tab_stride == 0, "assemble_tabulated: tab_stride must divide the step count");
    const AxialGrid tab(spec.stages.front().z0, spec.stages.back().z1, total / spec.tab_stride);
    const std::size_t nx = spec.grid.n();
    RealVector values(nx * tab.n_samples());
    std::size_t k = 0;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const SeparableTimeline tl(spec.stages[s].v_initial, spec.stages[s].v_terminal, stages[s].u, stages[s].v);
        const std::size_t slices = spec.stages[s].n_steps / spec.tab_stride;
        // The first stage contributes its z0 slice; later stages start one past
        // the shared boundary slice, which the previous stage already wrote.
        for (std::size_t q = (s == 0 ? 0 : 1); q <= slices; ++q, ++k) {
            const std::size_t step = q * spec.tab_stride;
            const double z = stages[s].axial.z(step);
            assemble_slice_into(tl, z, std::span<double>(values.data() + k * nx, nx));
        }
    }
    require(k == tab.n_samples(), "assemble_tabulated: slice count mismatch");
    return TabulatedTimeline(tab, nx, std::move(values));
}

inline PotentialProblem refinement_problem(const ProblemSpec& spec, const std::vector<StageResult>& stages) {
    std::size_t total = 0;
    for (const StageSpec& st : spec.stages) total += st.n_steps;
    return PotentialProblem{spec.grid, AxialGrid(spec.stages.front().z0, spec.stages.back().z1, total),
                            stages.front().phi0, spec.stages.back().phi_d, spec.gamma_2d};
}

/**
 * Runs every stage in order, threading terminal states, then the optional 2D
 * refinement. Phase failures end the run early; completed phases are kept.
 */
inline RunResult run_full(ProblemSpec spec) {
    RunResult out;
    out.problem = spec.name;
    out.seed = spec.seed;
    if (spec.auto_refine_dz) {
        detail::Stopwatch clock;
        out.order_checks = resolve_step_counts(spec);
        out.timing.push_back({"order_check", clock.seconds()});
    }
    spec.validate();

    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        const StageSpec& st = spec.stages[s];
        Field phi0 = st.phi0.empty() ? normalized(out.stages.back().terminal, spec.grid) : st.phi0;
        const ControlProblem prob = detail::stage_problem(spec, st, std::move(phi0));
        DEConfig de = spec.de;
        de.seed = spec.seed + s;
        try {
            out.stages.push_back(run_hybrid_stage(prob, de, spec.grape, spec.n_modes, st.run_de, s, &out.timing));
        } catch (const StageError& e) {
            out.error = e.what();
            out.failed_stage = s;
            break;
        }
        out.stalled = out.stalled || out.stages.back().grape.stalled;
        out.terminal = out.stages.back().terminal;
        out.final_infidelity = out.stages.back().final_infidelity;
    }

    if (out.ok() && spec.refine_2d) {
        try {
            detail::Stopwatch clock;
            out.assembled = assemble_tabulated(spec, out.stages);
            const PotentialProblem prob = refinement_problem(spec, out.stages);
            out.refined = grape_descend_2d(prob, *out.assembled, spec.grape_2d);
            out.timing.push_back({"refine_2d", clock.seconds()});
            out.stalled = out.stalled || out.refined->history.stalled;
            out.terminal = out.refined->terminal;
            out.final_infidelity = out.refined->history.infidelity_per_iter.back();
        } catch (const ContractError&) {
            throw;
        } catch (const std::exception& e) {
            out.error = std::string("refine_2d: ") + e.what();
            out.failed_stage = spec.stages.size();
        }
    }
    return out;
}

struct TophatOptions {
    std::size_t n = 1024;
    std::size_t n_steps = 2000;
    double a = 1e-3;
    int m = 8;
};

// Proxy target: ground state of the directly inverted top-hat potential.
inline TerminalRefinement tophat_terminal(const Grid1D& grid, double a = 1e-3, int m = 8) {
    const Field target = tophat_target(a, m, grid);
    const double gauge = gauge_for_minimum(target, grid);
    const PotentialSamples v = invert_potential(target, grid, gauge);
    return refine_terminal_potential(v, target, grid, 200, 1e-10);
}

inline ProblemSpec preset_tophat(const TophatOptions& opt = {}) {
    ProblemSpec spec;
    spec.name = "tophat";
    spec.grid = Grid1D(-5.0 * std::numbers::pi, 5.0 * std::numbers::pi, opt.n);
    const PotentialSamples v0 = poschl_teller(1.0, 0.0, spec.grid);
    const EigenPair initial = ground_state(v0, spec.grid);
    TerminalRefinement terminal = tophat_terminal(spec.grid, opt.a, opt.m);
    StageSpec st;
    st.z0 = 0.0;
    st.z1 = 7.0;
    st.n_steps = opt.n_steps;
    st.v_initial = v0;
    st.v_terminal = std::move(terminal.potential);
    st.phi0 = initial.phi;
    st.phi_d = std::move(terminal.state.phi);
    spec.stages.push_back(std::move(st));
    spec.gamma_1d = 1e-6;
    spec.grape.max_iters = 400;
    return spec;
}

struct BeamOptions {
    std::size_t n = 4096;
    std::size_t steps_per_unit = 200;
    double spacing = 10.0;
};

inline ProblemSpec preset_beam_addition(const BeamOptions& opt = {}) {
    ProblemSpec spec;
    spec.name = "beam-addition";
    spec.grid = Grid1D(-15.0 * std::numbers::pi, 15.0 * std::numbers::pi, opt.n);
    auto [v0, phi0] = beam_combine_initial(opt.spacing, spec.grid);
    TerminalRefinement tophat = tophat_terminal(spec.grid);
    const PotentialSamples pt3 = poschl_teller(3.0, 0.0, spec.grid);
    const EigenPair final_state = ground_state(pt3, spec.grid);

    StageSpec first;
    first.z0 = 0.0;
    first.z1 = 30.0;
    first.n_steps = 30 * opt.steps_per_unit;
    first.v_initial = std::move(v0);
    first.v_terminal = tophat.potential;
    first.phi0 = std::move(phi0);
    first.phi_d = std::move(tophat.state.phi);

    StageSpec second;
    second.z0 = 30.0;
    second.z1 = 70.0;
    second.n_steps = 40 * opt.steps_per_unit;
    second.v_initial = std::move(tophat.potential);
    second.v_terminal = pt3;
    second.phi_d = final_state.phi;

    spec.stages.push_back(std::move(first));
    spec.stages.push_back(std::move(second));
    spec.gamma_1d = 1e-6;
    spec.gamma_2d = 1e-8;
    spec.refine_2d = true;
    spec.tab_stride = 10;
    spec.grape.max_iters = 60;
    spec.grape_2d.max_iters = 20;
    return spec;
}

}  // namespace grin
