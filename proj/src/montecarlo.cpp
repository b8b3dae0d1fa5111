#include "eqreins/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <random>
#include <thread>

#include "eqreins/csv.hpp"

namespace eqreins {

namespace {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct SampleMoments {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error, shifted by the first sample so that constant data
/// gives an exact mean and a zero error. Reduction order is the path order.
SampleMoments moments(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    const double shift = xs.front();
    CompensatedSum s;
    for (double x : xs) s.add(x - shift);
    const double mean_dev = s.value() / static_cast<double>(n);
    CompensatedSum ss;
    for (double x : xs) {
        const double d = (x - shift) - mean_dev;
        ss.add(d * d);
    }
    SampleMoments m;
    m.mean = shift + mean_dev;
    m.se = n > 1 ? std::sqrt(ss.value() / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return m;
}

std::mt19937_64 path_engine(std::uint64_t seed, std::size_t path) {
    const auto p = static_cast<std::uint64_t>(path);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(p >> 32), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

/// Per-path reward influence terms for the delta-method standard error of J.
struct RewardSample {
    SimulationResult result;
    std::vector<double> influence;
};

RewardSample reward_sample(const PathBatch& batch, const AversionDistribution& dist) {
    if (batch.paths == 0 || batch.terminal_x.empty()) throw std::invalid_argument("empty path batch");
    RewardSample out;
    out.result.paths = batch.paths;
    out.result.seed = batch.seed;
    out.influence.assign(batch.paths, 0.0);

    std::vector<double> utilities(batch.paths);
    for (const auto& atom : dist.atoms) {
        for (std::size_t p = 0; p < batch.paths; ++p)
            utilities[p] = exponential_utility(atom.gamma, batch.terminal_x[p]);
        const auto mom = moments(utilities);
        if (!(mom.mean < 0.0))
            throw std::runtime_error("non-negative expected utility estimate for gamma = " + format_double(atom.gamma));
        AtomEstimate est;
        est.gamma = atom.gamma;
        est.prob = atom.prob;
        est.utility_mean = mom.mean;
        est.utility_se = mom.se;
        est.cert_equiv = inverse_exponential_utility(atom.gamma, mom.mean);
        // d CE / d y = -1 / (gamma y)
        const double slope = -1.0 / (atom.gamma * mom.mean);
        est.cert_equiv_se = std::abs(slope) * mom.se;
        for (std::size_t p = 0; p < batch.paths; ++p) out.influence[p] += atom.prob * slope * (utilities[p] - mom.mean);
        out.result.atoms.push_back(est);
    }
    CompensatedSum j;
    for (const auto& a : out.result.atoms) j.add(a.prob * a.cert_equiv);
    out.result.reward = j.value();
    out.result.reward_se = moments(out.influence).se;
    return out;
}

}  // namespace

StrategySchedule schedule_from_path(const StrategyPath& path) {
    StrategySchedule s;
    if (path.grid.size() < 2) return s;
    s.q.assign(path.q_hat.begin(), path.q_hat.end() - 1);
    s.pi.assign(path.pi_hat.begin(), path.pi_hat.end() - 1);
    return s;
}

StrategySchedule constant_schedule(std::size_t steps, double q, double pi) {
    return {std::vector<double>(steps, q), std::vector<double>(steps, pi)};
}

StrategySchedule with_initial_override(StrategySchedule base, const std::vector<double>& grid, double h, double q,
                                       double pi) {
    for (std::size_t m = 0; m < base.steps() && m < grid.size() && grid[m] < h; ++m) {
        base.q[m] = q;
        base.pi[m] = pi;
    }
    return base;
}

SimulationError::SimulationError(std::size_t path_, std::size_t step_, const std::string& what)
    : std::runtime_error(what + " (path " + std::to_string(path_) + ", step " + std::to_string(step_) + ")"),
      path(path_),
      step(step_) {}

PathBatch simulate_paths(const ValidatedModel& model, const StrategySchedule& strategy, const SimulationOptions& opts) {
    const auto& hp = model.heston();
    const auto& hz = model.horizon();
    const auto& d = model.diffusion();
    const double eta2 = model.insurance().eta2;
    const std::size_t M = hz.M;
    if (opts.paths < 1) throw std::invalid_argument("path count must be >= 1");
    if (strategy.steps() != M || strategy.pi.size() != M)
        throw std::invalid_argument("strategy has " + std::to_string(strategy.steps()) + " steps, model grid has " +
                                    std::to_string(M));
    for (auto k : opts.record_steps)
        if (k > M) throw std::invalid_argument("record step " + std::to_string(k) + " is beyond the grid");

    const auto grid = hz.grid();
    // Per-step factors of the exact linear drift in X.
    std::vector<double> decay(M), growth(M), noise(M), sqrt_dt(M), dt(M);
    for (std::size_t m = 0; m < M; ++m) {
        dt[m] = grid[m + 1] - grid[m];
        sqrt_dt[m] = std::sqrt(dt[m]);
        if (hp.r == 0.0) {
            decay[m] = 1.0;
            growth[m] = dt[m];
            noise[m] = sqrt_dt[m];
        } else {
            decay[m] = std::exp(hp.r * dt[m]);
            growth[m] = std::expm1(hp.r * dt[m]) / hp.r;
            noise[m] = std::sqrt(std::expm1(2.0 * hp.r * dt[m]) / (2.0 * hp.r));
        }
    }
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - hp.rho * hp.rho));
    const double base_drift = d.a * d.eta;
    const std::size_t n_rec = opts.record_steps.size();

    PathBatch batch;
    batch.paths = opts.paths;
    batch.steps = M;
    batch.seed = opts.seed;
    batch.scheme = "full-truncation Euler (V), exact linear drift (X)";
    batch.terminal_x.resize(opts.paths);
    batch.terminal_v.resize(opts.paths);
    batch.record_steps = opts.record_steps;
    batch.recorded_x.resize(opts.paths * n_rec);
    batch.recorded_v.resize(opts.paths * n_rec);

    auto run_path = [&](std::size_t p) {
        auto engine = path_engine(opts.seed, p);
        std::normal_distribution<double> normal;
        double x = hz.x0;
        double v = hp.v0;
        auto record = [&](std::size_t m) {
            for (std::size_t k = 0; k < n_rec; ++k) {
                if (opts.record_steps[k] == m) {
                    batch.recorded_x[p * n_rec + k] = x;
                    batch.recorded_v[p * n_rec + k] = std::max(v, 0.0);
                }
            }
        };
        record(0);
        for (std::size_t m = 0; m < M; ++m) {
            const double z0 = normal(engine);
            const double z1 = normal(engine);
            const double z2 = normal(engine);
            const double vp = std::max(v, 0.0);
            const double sv = std::sqrt(vp);
            const double q = strategy.q[m];
            const double pi = strategy.pi[m];

            x = decay[m] * x + (base_drift + d.a * eta2 * q + hp.xi * vp * pi) * growth[m] +
                noise[m] * (d.b * q * z0 + pi * sv * z1);
            v = v + hp.kappa * (hp.theta - vp) * dt[m] + hp.sigma * sv * sqrt_dt[m] * (hp.rho * z1 + rho_perp * z2);
            if (!std::isfinite(x) || !std::isfinite(v)) throw SimulationError(p, m + 1, "non-finite state");
            if (n_rec) record(m + 1);
        }
        batch.terminal_x[p] = x;
        batch.terminal_v[p] = std::max(v, 0.0);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(opts.paths)));
    if (workers == 1) {
        for (std::size_t p = 0; p < opts.paths; ++p) run_path(p);
        return batch;
    }

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::size_t> error_path(workers, opts.paths);
    {
        std::vector<std::thread> pool;
        const std::size_t chunk = (opts.paths + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                const std::size_t begin = w * chunk;
                const std::size_t end = std::min(opts.paths, begin + chunk);
                for (std::size_t p = begin; p < end; ++p) {
                    try {
                        run_path(p);
                    } catch (...) {
                        errors[w] = std::current_exception();
                        error_path[w] = p;
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    // Report the failure with the smallest path index, whatever the schedule.
    const auto first = std::min_element(error_path.begin(), error_path.end());
    if (*first < opts.paths) std::rethrow_exception(errors[static_cast<std::size_t>(first - error_path.begin())]);
    return batch;
}

double exponential_utility(double gamma, double x) { return -std::exp(-gamma * x) / gamma; }

double inverse_exponential_utility(double gamma, double y) { return -std::log(-gamma * y) / gamma; }

SimulationResult estimate_reward(const PathBatch& batch, const AversionDistribution& dist) {
    return reward_sample(batch, dist).result;
}

std::vector<SpotCheckRow> equilibrium_spot_check(const ValidatedModel& model, const GSolution& sol,
                                                 const std::vector<Perturbation>& perturbations,
                                                 const SimulationOptions& opts) {
    const auto path = equilibrium_strategy(model, sol);
    const auto eq_schedule = schedule_from_path(path);
    const auto eq = reward_sample(simulate_paths(model, eq_schedule, opts), model.aversion());

    std::vector<SpotCheckRow> rows;
    for (const auto& pert : perturbations) {
        if (!(pert.h > 0.0)) throw std::invalid_argument("perturbation window h must be > 0");
        const auto schedule = with_initial_override(eq_schedule, path.grid, pert.h, pert.q, pert.pi);
        const auto dev = reward_sample(simulate_paths(model, schedule, opts), model.aversion());

        std::vector<double> diff(eq.influence.size());
        for (std::size_t p = 0; p < diff.size(); ++p) diff[p] = eq.influence[p] - dev.influence[p];

        SpotCheckRow row;
        row.perturbation = pert;
        row.reward_equilibrium = eq.result.reward;
        row.reward_perturbed = dev.result.reward;
        row.scaled_difference = (eq.result.reward - dev.result.reward) / pert.h;
        row.scaled_difference_se = moments(diff).se / pert.h;
        row.violation = row.scaled_difference < -3.0 * row.scaled_difference_se;
        rows.push_back(row);
    }
    return rows;
}

void write_simulation_csv(std::ostream& out, const SimulationResult& result) {
    CsvWriter csv(out);
    csv.header({"atom_index", "gamma", "utility_mean", "utility_se", "cert_equiv", "reward_J"});
    for (std::size_t i = 0; i < result.atoms.size(); ++i) {
        const auto& a = result.atoms[i];
        csv.field(i).field(a.gamma).field(a.utility_mean).field(a.utility_se).field(a.cert_equiv).field(result.reward);
        csv.end_row();
    }
}

}  // namespace eqreins
