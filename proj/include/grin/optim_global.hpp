#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "grin/controls.hpp"
#include "grin/errors.hpp"
#include "grin/objective.hpp"
#include "grin/parallel.hpp"

namespace grin {

struct DEConfig {
    std::size_t population = 30;
    double weight_f = 0.8;
    double crossover_cr = 0.9;
    std::size_t generations = 150;
    std::uint64_t seed = 7;
    double lo = -1.0;
    double hi = 1.0;
    unsigned threads = 1;

    void validate() const {
        require(population >= 4, "DEConfig: population must be at least 4");
        require(weight_f > 0.0 && weight_f <= 2.0, "DEConfig: F must lie in (0, 2]");
        require(crossover_cr >= 0.0 && crossover_cr <= 1.0, "DEConfig: CR must lie in [0, 1]");
        require(lo < hi, "DEConfig: empty bounds");
    }
};

struct DEHistory {
    std::vector<double> best_value_per_generation;  // entry 0 is the initial population
    std::vector<std::vector<double>> best_agent_per_generation;
    std::vector<double> best_agent;
    std::size_t evaluations = 0;
    std::size_t non_finite = 0;
};

/**
 * DE/rand/1/bin with greedy selection. Trial vectors for a generation are
 * drawn serially from one seeded stream, evaluated in parallel, then selected
 * serially, so the result does not depend on the thread count.
 * `seed_agents` (if any) replace the first random agents.
 */
template <typename Objective>
DEHistory differential_evolution(Objective&& objective, std::size_t dim, const DEConfig& cfg,
                                 const std::vector<std::vector<double>>& seed_agents = {}) {
    cfg.validate();
    require(dim >= 1, "differential_evolution: dimension must be positive");
    require(seed_agents.size() <= cfg.population, "differential_evolution: too many seed agents");
    const std::size_t np = cfg.population;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_agent(0, np - 1);
    std::uniform_int_distribution<std::size_t> pick_dim(0, dim - 1);

    std::vector<std::vector<double>> agents(np, std::vector<double>(dim));
    for (auto& a : agents)
        for (auto& x : a) x = cfg.lo + (cfg.hi - cfg.lo) * unit(rng);
    for (std::size_t i = 0; i < seed_agents.size(); ++i) {
        require(seed_agents[i].size() == dim, "differential_evolution: seed agent has wrong size");
        agents[i] = seed_agents[i];
        for (auto& x : agents[i]) x = std::clamp(x, cfg.lo, cfg.hi);
    }

    DEHistory hist;
    auto evaluate_all = [&](const std::vector<std::vector<double>>& xs) {
        auto vals = parallel_map(xs.size(), cfg.threads,
                                 [&](std::size_t i) { return static_cast<double>(objective(xs[i])); });
        hist.evaluations += xs.size();
        for (auto& v : vals) {
            if (!std::isfinite(v)) {
                v = std::numeric_limits<double>::infinity();
                ++hist.non_finite;
            }
        }
        return vals;
    };

    std::vector<double> fitness = evaluate_all(agents);
    auto best_index = [&] {
        return static_cast<std::size_t>(std::min_element(fitness.begin(), fitness.end()) - fitness.begin());
    };
    hist.best_value_per_generation.push_back(fitness[best_index()]);
    hist.best_agent_per_generation.push_back(agents[best_index()]);

    std::vector<std::vector<double>> trials(np, std::vector<double>(dim));
    for (std::size_t g = 0; g < cfg.generations; ++g) {
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t a, b, c;
            do a = pick_agent(rng); while (a == i);
            do b = pick_agent(rng); while (b == i || b == a);
            do c = pick_agent(rng); while (c == i || c == a || c == b);
            const std::size_t forced = pick_dim(rng);
            for (std::size_t d = 0; d < dim; ++d) {
                const bool cross = unit(rng) < cfg.crossover_cr || d == forced;
                const double mutant = agents[a][d] + cfg.weight_f * (agents[b][d] - agents[c][d]);
                trials[i][d] = cross ? std::clamp(mutant, cfg.lo, cfg.hi) : agents[i][d];
            }
        }
        const std::vector<double> trial_fitness = evaluate_all(trials);
        for (std::size_t i = 0; i < np; ++i) {
            if (trial_fitness[i] < fitness[i]) {
                agents[i] = trials[i];
                fitness[i] = trial_fitness[i];
            }
        }
        hist.best_value_per_generation.push_back(fitness[best_index()]);
        hist.best_agent_per_generation.push_back(agents[best_index()]);
    }
    hist.best_agent = agents[best_index()];
    return hist;
}

struct ControlDEResult {
    AnsatzCoefficients u;
    AnsatzCoefficients v;
    DEHistory history;
};

inline AnsatzCoefficients coefficients_from(std::span<const double> eps, double u0, double ul,
                                            const AxialGrid& axial) {
    return AnsatzCoefficients{RealVector(eps.begin(), eps.end()), u0, ul, axial.z0(), axial.z1()};
}

/**
 * DE over the flattened (eps_u, eps_v) vector. The all-zero agent (both
 * controls equal to their linear ramps) is always part of the initial
 * population.
 */
inline ControlDEResult de_over_controls(const ControlProblem& prob, const DEConfig& cfg,
                                        std::size_t n_modes = kDefaultAnsatzModes) {
    const std::size_t dim = 2 * n_modes;
    auto objective = [&](const std::vector<double>& x) {
        const std::span<const double> xs(x);
        const Control u = evaluate_ansatz(coefficients_from(xs.first(n_modes), 1.0, 0.0, prob.axial), prob.axial);
        const Control v = evaluate_ansatz(coefficients_from(xs.last(n_modes), 0.0, 1.0, prob.axial), prob.axial);
        try {
            return reduced_objective(prob, u, v);
        } catch (const PropagationError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    ControlDEResult out;
    out.history = differential_evolution(objective, dim, cfg, {std::vector<double>(dim, 0.0)});
    const std::span<const double> best(out.history.best_agent);
    out.u = coefficients_from(best.first(n_modes), 1.0, 0.0, prob.axial);
    out.v = coefficients_from(best.last(n_modes), 0.0, 1.0, prob.axial);
    return out;
}

}  // namespace grin
