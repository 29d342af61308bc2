#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "grin/pipeline.hpp"

using namespace grin;

namespace {
constexpr double kPi = std::numbers::pi;

ProblemSpec tiny_tophat() {
    ProblemSpec spec = preset_tophat(TophatOptions{256, 400, 1e-3, 8});
    spec.de.population = 6;
    spec.de.generations = 3;
    spec.grape.max_iters = 5;
    spec.auto_refine_dz = false;
    spec.seed = 3;
    return spec;
}

// Two short stages on a small grid: PT(1) -> PT(1.5, shifted) -> PT(2).
ProblemSpec two_stage(bool refine) {
    ProblemSpec spec;
    spec.name = "two-stage";
    spec.grid = Grid1D(-20.0, 20.0, 128);
    const PotentialSamples a = poschl_teller(1.0, 0.0, spec.grid);
    const PotentialSamples b = poschl_teller(1.5, 1.0, spec.grid);
    const PotentialSamples c = poschl_teller(2.0, 0.0, spec.grid);
    StageSpec s0{0.0, 2.0, 100, a, b, ground_state(a, spec.grid).phi, ground_state(b, spec.grid).phi, true};
    StageSpec s1{2.0, 5.0, 150, b, c, {}, ground_state(c, spec.grid).phi, true};
    spec.stages = {s0, s1};
    spec.de.population = 6;
    spec.de.generations = 2;
    spec.grape.max_iters = 3;
    spec.grape_2d.max_iters = 2;
    spec.refine_2d = refine;
    spec.tab_stride = 10;
    spec.auto_refine_dz = false;
    return spec;
}
}  // namespace

TEST(Presets, Tophat) {
    const ProblemSpec spec = preset_tophat();
    EXPECT_EQ(spec.gamma_1d, 1e-6);
    ASSERT_EQ(spec.stages.size(), 1u);
    EXPECT_EQ(spec.stages[0].z0, 0.0);
    EXPECT_EQ(spec.stages[0].z1, 7.0);
    EXPECT_EQ(spec.n_modes, 15u);
    EXPECT_EQ(spec.grid.n(), 1024u);
    EXPECT_NEAR(spec.grid.x_min(), -5.0 * kPi, 1e-12);
    EXPECT_NEAR(spec.grid.x_max(), 5.0 * kPi, 1e-12);
    EXPECT_GE(spec.stages[0].n_steps, 2000u);
    EXPECT_FALSE(spec.refine_2d);
    EXPECT_NO_THROW(spec.validate());
    const PotentialSamples pt = poschl_teller(1.0, 0.0, spec.grid);
    EXPECT_EQ(spec.stages[0].v_initial.values, pt.values);
}

TEST(Presets, BeamAddition) {
    const ProblemSpec spec = preset_beam_addition(BeamOptions{1024, 20, 10.0});
    ASSERT_EQ(spec.stages.size(), 2u);
    EXPECT_EQ(spec.stages[0].z0, 0.0);
    EXPECT_EQ(spec.stages[0].z1, 30.0);
    EXPECT_EQ(spec.stages[1].z0, 30.0);
    EXPECT_EQ(spec.stages[1].z1, 70.0);
    EXPECT_EQ(spec.gamma_1d, 1e-6);
    EXPECT_EQ(spec.gamma_2d, 1e-8);
    EXPECT_TRUE(spec.refine_2d);
    EXPECT_NEAR(spec.grid.x_max(), 15.0 * kPi, 1e-12);
    EXPECT_TRUE(spec.stages[1].phi0.empty());
    EXPECT_EQ(spec.stages[0].v_terminal.values, spec.stages[1].v_initial.values);
    EXPECT_NO_THROW(spec.validate());
    // Three wells at -10, 0, 10 in the initial potential.
    const auto& v = spec.stages[0].v_initial.values;
    auto local_min = [&](double x) {
        const auto j = static_cast<std::size_t>(std::lround((x - spec.grid.x_min()) / spec.grid.dx()));
        return v[j] < v[j - 3] && v[j] < v[j + 3];
    };
    EXPECT_TRUE(local_min(-10.0));
    EXPECT_TRUE(local_min(0.0));
    EXPECT_TRUE(local_min(10.0));
    // Final target is the sigma = 3 Poschl-Teller ground state.
    EXPECT_NEAR(ground_state(spec.stages[1].v_terminal, spec.grid).lambda, -4.5, 1e-5);
}

TEST(Presets, DefaultBeamResolution) {
    const BeamOptions opt;
    EXPECT_EQ(opt.n, 4096u);
    EXPECT_EQ(opt.steps_per_unit * 70, 14000u);
    EXPECT_EQ(opt.spacing, 10.0);
}

TEST(ProblemSpec, RejectsDiscontinuousStages) {
    ProblemSpec spec = two_stage(false);
    spec.stages[1].v_initial = poschl_teller(1.4, 1.0, spec.grid);
    EXPECT_THROW(spec.validate(), ContractError);
    spec = two_stage(false);
    spec.stages[1].z0 = 2.5;
    EXPECT_THROW(spec.validate(), ContractError);
    spec = two_stage(false);
    for (auto& c : spec.stages[0].phi_d) c *= 2.0;
    EXPECT_THROW(spec.validate(), ContractError);
    spec = two_stage(true);
    spec.stages[1].n_steps = 140;
    EXPECT_THROW(spec.validate(), ContractError);
}

TEST(HybridStage, DegenerateStageIsIdentity) {
    const Grid1D g(-20.0, 20.0, 128);
    const PotentialSamples v = poschl_teller(1.0, 0.0, g);
    const Field phi = ground_state(v, g).phi;
    const ControlProblem prob{g, AxialGrid(0.0, 3.0, 300), v, v, phi, phi, 1e-6};
    DEConfig de;
    de.population = 8;
    de.generations = 3;
    GrapeConfig grape;
    grape.max_iters = 5;
    const StageResult r = run_hybrid_stage(prob, de, grape, 15, true, 0);
    EXPECT_LT(r.final_infidelity, 1e-4);
    EXPECT_LE(r.final_objective, r.baseline_objective);
    EXPECT_LT(r.baseline_infidelity, 1e-8);
}

TEST(HybridStage, PhasesMonotone) {
    const ProblemSpec spec = tiny_tophat();
    const RunResult r = run_full(spec);
    ASSERT_TRUE(r.ok()) << r.error;
    const StageResult& s = r.stages.front();
    for (std::size_t i = 1; i < s.de_best_per_generation.size(); ++i)
        EXPECT_LE(s.de_best_per_generation[i], s.de_best_per_generation[i - 1]);
    for (std::size_t i = 1; i < s.grape.objective_per_iter.size(); ++i)
        EXPECT_LE(s.grape.objective_per_iter[i], s.grape.objective_per_iter[i - 1]);
    EXPECT_LE(s.final_objective, s.de_objective);
    EXPECT_LE(s.de_objective, s.baseline_objective);
    EXPECT_EQ(s.de_best_per_generation.back(), s.de_objective);
    EXPECT_EQ(s.de_tikhonov_per_generation.size(), s.de_best_per_generation.size());
    EXPECT_EQ(s.grape.objective_per_iter.front(), s.de_objective);
}

TEST(RunFull, Deterministic) {
    const RunResult a = run_full(tiny_tophat());
    const RunResult b = run_full(tiny_tophat());
    ASSERT_TRUE(a.ok() && b.ok());
    EXPECT_EQ(a.stages[0].de_best_per_generation, b.stages[0].de_best_per_generation);
    EXPECT_EQ(a.stages[0].grape.objective_per_iter, b.stages[0].grape.objective_per_iter);
    EXPECT_EQ(a.stages[0].u.samples(), b.stages[0].u.samples());
    EXPECT_EQ(a.final_infidelity, b.final_infidelity);
}

TEST(RunFull, ThreadCountIndependent) {
    ProblemSpec serial = tiny_tophat();
    ProblemSpec threaded = tiny_tophat();
    threaded.de.threads = 3;
    const RunResult a = run_full(serial);
    const RunResult b = run_full(threaded);
    EXPECT_EQ(a.stages[0].de_best_per_generation, b.stages[0].de_best_per_generation);
    EXPECT_EQ(a.final_infidelity, b.final_infidelity);
}

TEST(RunFull, SeedChangesDE) {
    ProblemSpec other = tiny_tophat();
    other.seed = 4;
    const RunResult a = run_full(tiny_tophat());
    const RunResult b = run_full(other);
    EXPECT_NE(a.stages[0].de_best_per_generation, b.stages[0].de_best_per_generation);
}

TEST(RunFull, ThreadsStateBetweenStages) {
    const ProblemSpec spec = two_stage(false);
    const RunResult r = run_full(spec);
    ASSERT_TRUE(r.ok()) << r.error;
    ASSERT_EQ(r.stages.size(), 2u);
    const Field expected = normalized(r.stages[0].terminal, spec.grid);
    for (std::size_t j = 0; j < spec.grid.n(); ++j) EXPECT_LT(std::abs(r.stages[1].phi0[j] - expected[j]), 1e-10);
    EXPECT_EQ(r.final_infidelity, r.stages[1].final_infidelity);
    EXPECT_FALSE(r.refined.has_value());
}

TEST(RunFull, AssembledTimelineContinuousAcrossStages) {
    const ProblemSpec spec = two_stage(true);
    const RunResult r = run_full(spec);
    ASSERT_TRUE(r.ok()) << r.error;
    ASSERT_TRUE(r.assembled.has_value());
    ASSERT_TRUE(r.refined.has_value());
    const TabulatedTimeline& t = *r.assembled;
    EXPECT_EQ(t.axial.n_steps(), 25u);
    EXPECT_EQ(t.axial.z0(), 0.0);
    EXPECT_EQ(t.axial.z1(), 5.0);
    // Slice 10 sits on the stage boundary z = 2.
    const SeparableTimeline left(spec.stages[0].v_initial, spec.stages[0].v_terminal, r.stages[0].u, r.stages[0].v);
    const SeparableTimeline right(spec.stages[1].v_initial, spec.stages[1].v_terminal, r.stages[1].u, r.stages[1].v);
    const PotentialSamples from_left = assemble_slice(left, 2.0);
    const PotentialSamples from_right = assemble_slice(right, 2.0);
    for (std::size_t j = 0; j < spec.grid.n(); ++j) {
        EXPECT_NEAR(from_left[j], from_right[j], 1e-12);
        EXPECT_NEAR(t.at(j, 10), from_left[j], 1e-12);
    }
    const auto& h = r.refined->history;
    for (std::size_t i = 1; i < h.objective_per_iter.size(); ++i)
        EXPECT_LE(h.objective_per_iter[i], h.objective_per_iter[i - 1]);
    EXPECT_EQ(r.final_infidelity, h.infidelity_per_iter.back());
    for (std::size_t j = 0; j < spec.grid.n(); ++j) {
        EXPECT_EQ(r.refined->v.at(j, 0), t.at(j, 0));
        EXPECT_EQ(r.refined->v.at(j, 25), t.at(j, 25));
    }
}

TEST(RunFull, StaticStagesStayPut) {
    ProblemSpec spec;
    spec.grid = Grid1D(-20.0, 20.0, 128);
    const PotentialSamples v = poschl_teller(1.0, 0.0, spec.grid);
    const Field phi = ground_state(v, spec.grid).phi;
    spec.stages = {StageSpec{0.0, 1.0, 100, v, v, phi, phi, true}, StageSpec{1.0, 2.0, 100, v, v, {}, phi, false}};
    spec.de.population = 5;
    spec.de.generations = 2;
    spec.grape.max_iters = 3;
    spec.auto_refine_dz = false;
    const RunResult r = run_full(spec);
    ASSERT_TRUE(r.ok());
    EXPECT_LT(r.final_infidelity, 1e-6);
    EXPECT_EQ(r.stages[1].de_best_per_generation.size(), 1u);
    for (const StageResult& s : r.stages) {
        const Control ramp = Control::ramp(s.axial, 1.0, 0.0);
        for (std::size_t k = 0; k < ramp.samples().size(); ++k) EXPECT_NEAR(s.u.samples()[k], ramp.samples()[k], 0.5);
    }
}

TEST(RunFull, FailureKeepsCompletedStages) {
    ProblemSpec spec = two_stage(false);
    spec.stages[1].v_terminal.values[64] = std::numeric_limits<double>::infinity();
    const RunResult r = run_full(spec);
    EXPECT_FALSE(r.ok());
    ASSERT_TRUE(r.failed_stage.has_value());
    EXPECT_EQ(*r.failed_stage, 1u);
    EXPECT_EQ(r.stages.size(), 1u);
}

TEST(StepOrder, SmoothProblemPassesWithoutRefinement) {
    ProblemSpec spec = two_stage(false);
    spec.auto_refine_dz = true;
    const auto log = resolve_step_counts(spec);
    ASSERT_EQ(log.size(), 2u);
    EXPECT_TRUE(log[0].passed);
    EXPECT_TRUE(log[1].passed);
    EXPECT_EQ(spec.stages[0].n_steps, 100u);
    EXPECT_EQ(spec.stages[1].n_steps, 150u);
}

TEST(StepOrder, RefinementDoublesUntilPass) {
    ProblemSpec spec = preset_tophat(TophatOptions{512, 250, 1e-3, 8});
    spec.max_dz_doublings = 4;
    const auto log = resolve_step_counts(spec);
    ASSERT_FALSE(log.empty());
    for (std::size_t i = 0; i + 1 < log.size(); ++i) {
        EXPECT_FALSE(log[i].passed);
        EXPECT_EQ(log[i + 1].n_steps, 2 * log[i].n_steps);
    }
    EXPECT_EQ(spec.stages[0].n_steps, log.back().n_steps);
    if (log.back().passed) {
        EXPECT_GE(log.back().ratio, 3.5);
        EXPECT_LE(log.back().ratio, 4.5);
    }
}
