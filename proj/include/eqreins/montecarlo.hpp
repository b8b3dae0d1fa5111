#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqreins/model.hpp"
#include "eqreins/odes.hpp"
#include "eqreins/strategy.hpp"

namespace eqreins {

/// Piecewise-constant control: (q[m], pi[m]) is applied on [t_m, t_{m+1}).
struct StrategySchedule {
    std::vector<double> q;
    std::vector<double> pi;

    std::size_t steps() const noexcept { return q.size(); }
};

StrategySchedule schedule_from_path(const StrategyPath& path);
StrategySchedule constant_schedule(std::size_t steps, double q, double pi);
/// Replaces the control by the constant (q, pi) on every step starting before h.
StrategySchedule with_initial_override(StrategySchedule base, const std::vector<double>& grid, double h, double q,
                                       double pi);

struct SimulationOptions {
    std::size_t paths = 10000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Grid indices at which (X, V) is stored for every path, in addition to
    /// the terminal state.
    std::vector<std::size_t> record_steps;
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(std::size_t path, std::size_t step, const std::string& what);
    std::size_t path;
    std::size_t step;
};

/// Simulated wealth and variance. Stored variances are the truncated values
/// max(V, 0), so every recorded V is non-negative.
struct PathBatch {
    std::size_t paths = 0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    std::string scheme;
    std::vector<double> terminal_x;
    std::vector<double> terminal_v;
    std::vector<std::size_t> record_steps;
    std::vector<double> recorded_x;  // [path * record_steps.size() + k]
    std::vector<double> recorded_v;

    double x_at(std::size_t path, std::size_t k) const { return recorded_x[path * record_steps.size() + k]; }
    double v_at(std::size_t path, std::size_t k) const { return recorded_v[path * record_steps.size() + k]; }
};

/// Full-truncation Euler for the variance; the wealth step integrates the
/// linear r X drift exactly and freezes the other coefficients over the step.
/// Path p draws from its own generator keyed by (seed, p), so the batch is
/// bit-identical for any thread count.
PathBatch simulate_paths(const ValidatedModel& model, const StrategySchedule& strategy, const SimulationOptions& opts);

struct AtomEstimate {
    double gamma = 0.0;
    double prob = 0.0;
    double utility_mean = 0.0;  // estimate of E[-(1/gamma) e^{-gamma X(T)}]
    double utility_se = 0.0;
    double cert_equiv = 0.0;    // -(1/gamma) ln(-gamma * utility_mean)
    double cert_equiv_se = 0.0;
};

struct SimulationResult {
    std::vector<AtomEstimate> atoms;
    double reward = 0.0;  // sum_i p_i * cert_equiv_i
    double reward_se = 0.0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
};

double exponential_utility(double gamma, double x);
double inverse_exponential_utility(double gamma, double y);

/// Throws std::runtime_error if a utility mean is not strictly negative.
SimulationResult estimate_reward(const PathBatch& batch, const AversionDistribution& dist);

struct Perturbation {
    double h = 0.0;
    double q = 0.0;
    double pi = 0.0;
};

struct SpotCheckRow {
    Perturbation perturbation;
    double reward_equilibrium = 0.0;
    double reward_perturbed = 0.0;
    double scaled_difference = 0.0;  // (J_eq - J_perturbed) / h
    double scaled_difference_se = 0.0;
    bool violation = false;          // scaled_difference < -3 se
};

/// Reward of the equilibrium control against constant deviations on [0, h),
/// all runs sharing the same random numbers.
std::vector<SpotCheckRow> equilibrium_spot_check(const ValidatedModel& model, const GSolution& sol,
                                                 const std::vector<Perturbation>& perturbations,
                                                 const SimulationOptions& opts);

/// `atom_index,gamma,utility_mean,utility_se,cert_equiv,reward_J`
void write_simulation_csv(std::ostream& out, const SimulationResult& result);

}  // namespace eqreins
