#include "eqreins/odes.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "eqreins/csv.hpp"
#include "eqreins/strategy.hpp"

namespace eqreins {

namespace {

std::string blow_up_message(std::size_t atom, std::size_t step, double value) {
    std::ostringstream os;
    os.precision(17);
    os << "g2 blow-up: |g2| = " << std::abs(value) << " exceeds " << kBlowUpThreshold << " for atom " << atom
       << " at reversed-time step " << step;
    return os.str();
}

void require_single_atom(const ValidatedModel& model) {
    if (model.atom_count() != 1)
        throw std::invalid_argument("closed form requires a one-point aversion distribution, got " +
                                    std::to_string(model.atom_count()) + " atoms");
}

/// Right-hand side of the reversed-clock g2 system for atom i at s = T - t.
/// `sum_hp` is sum_j h_j p_j.
double forward_slope(const HestonParams& hp, double mean_gamma, double gamma, double s, double h,
                     double sum_hp) {
    const double pi = (hp.xi + hp.rho * hp.sigma * sum_hp) / mean_gamma * std::exp(-hp.r * s);
    const double g1 = -gamma * std::exp(hp.r * s);
    return hp.xi * pi * g1 + 0.5 * pi * pi * g1 * g1 - hp.kappa * h + 0.5 * hp.sigma * hp.sigma * h * h +
           hp.rho * pi * hp.sigma * g1 * h;
}

double weighted_sum(const std::vector<double>& h, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) s += h[j] * p[j];
    return s;
}

}  // namespace

BlowUpError::BlowUpError(std::size_t atom_, std::size_t step_, double value_)
    : SolverError(blow_up_message(atom_, step_, value_)), atom(atom_), step(step_), value(value_) {}

RiccatiConstants riccati_constants(const HestonParams& h) {
    RiccatiConstants c;
    c.k1 = -h.xi * h.xi;
    c.k2 = h.kappa + h.rho * h.sigma * h.xi;
    c.k3 = h.sigma * h.sigma * (1.0 - h.rho * h.rho);
    c.k4 = std::sqrt(c.k2 * c.k2 - c.k1 * c.k3);
    return c;
}

double g1_closed(double t, double gamma, double r, double T) { return -gamma * std::exp(r * (T - t)); }

double g2_closed_single(double t, const ValidatedModel& model) {
    require_single_atom(model);
    const auto c = riccati_constants(model.heston());
    const double tau = model.horizon().T - t;
    if (c.k3 == 0.0) {
        if (c.k2 == 0.0) return 0.5 * c.k1 * tau;
        return c.k1 / (2.0 * c.k2) * -std::expm1(-c.k2 * tau);
    }
    // Numerator and denominator scaled by e^{-k4 tau} so long horizons stay finite.
    const double one_minus = -std::expm1(-c.k4 * tau);
    return c.k1 * one_minus / (2.0 * c.k4 * std::exp(-c.k4 * tau) + (c.k2 + c.k4) * one_minus);
}

double g3_closed_single(double t, const ValidatedModel& model) {
    require_single_atom(model);
    const auto& ins = model.insurance();
    const auto& hp = model.heston();
    const auto& d = model.diffusion();
    const double gamma = model.aversion().atoms.front().gamma;
    const double tau = model.horizon().T - t;
    const double b2 = ins.lambda1 * ins.mu2;

    const double loading_term = -0.5 * d.a * d.a * ins.eta2 * ins.eta2 / b2 * tau;
    const double growth = hp.r == 0.0 ? tau : std::expm1(hp.r * tau) / hp.r;
    const double gap_term = -d.a * d.eta * gamma * growth;

    const auto c = riccati_constants(hp);
    double variance_term = 0.0;
    if (c.k3 == 0.0) {
        // kappa theta * integral of the linear-limit g2 over [0, tau]
        if (c.k2 == 0.0) {
            variance_term = hp.kappa * hp.theta * 0.25 * c.k1 * tau * tau;
        } else {
            const double integral = c.k1 / (2.0 * c.k2) * (tau + std::expm1(-c.k2 * tau) / c.k2);
            variance_term = hp.kappa * hp.theta * integral;
        }
    } else {
        // ln[2k4 e^{(k2+k4)tau/2} / (2k4 + (k2+k4)(e^{k4 tau} - 1))], rearranged to avoid overflow
        const double log_ratio = std::log(2.0 * c.k4) + 0.5 * (c.k2 - c.k4) * tau -
                                 std::log((c.k2 + c.k4) + (c.k4 - c.k2) * std::exp(-c.k4 * tau));
        variance_term = 2.0 * hp.kappa * hp.theta / c.k3 * log_ratio;
    }
    return loading_term + gap_term + variance_term;
}

GSolution solve_g2_coupled(const ValidatedModel& model) {
    const auto& hp = model.heston();
    const auto& hz = model.horizon();
    const auto& atoms = model.aversion().atoms;
    const std::size_t n = atoms.size();
    const std::size_t M = hz.M;
    const double l = hz.step();
    const double T = hz.T;
    const double mean_gamma = model.mean_gamma();

    GSolution sol;
    sol.grid = hz.grid();
    sol.step = l;
    for (const auto& a : atoms) {
        sol.gammas.push_back(a.gamma);
        sol.probs.push_back(a.prob);
    }
    sol.g1.assign(n, std::vector<double>(M + 1));
    sol.g2.assign(n, std::vector<double>(M + 1, 0.0));
    sol.g3.assign(n, std::vector<double>(M + 1, 0.0));
    sol.nonpositive_g2.assign(n, true);

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m <= M; ++m) sol.g1[i][m] = g1_closed(sol.grid[m], atoms[i].gamma, hp.r, T);

    // h[i] = g2[i] at t = T - s_k; h(0) = 0.
    std::vector<double> h(n, 0.0), h_pred(n), slope(n);
    for (std::size_t k = 0; k < M; ++k) {
        const double s = hz.time(k);
        const double s_next = hz.time(k + 1);

        const double sum_now = weighted_sum(h, sol.probs);
        for (std::size_t i = 0; i < n; ++i) {
            slope[i] = forward_slope(hp, mean_gamma, atoms[i].gamma, s, h[i], sum_now);
            h_pred[i] = h[i] + l * slope[i];
            if (!std::isfinite(h_pred[i]))
                throw NonFiniteError("non-finite g2 predictor for atom " + std::to_string(i) + " at step " +
                                     std::to_string(k));
        }
        const double sum_pred = weighted_sum(h_pred, sol.probs);
        for (std::size_t i = 0; i < n; ++i) {
            const double slope_next = forward_slope(hp, mean_gamma, atoms[i].gamma, s_next, h_pred[i], sum_pred);
            h[i] += 0.5 * l * (slope[i] + slope_next);
            if (!std::isfinite(h[i]))
                throw NonFiniteError("non-finite g2 for atom " + std::to_string(i) + " at step " +
                                     std::to_string(k + 1));
            if (std::abs(h[i]) > kBlowUpThreshold) throw BlowUpError(i, k + 1, h[i]);
        }
        for (std::size_t i = 0; i < n; ++i) sol.g2[i][M - (k + 1)] = h[i];
    }

    for (std::size_t i = 0; i < n; ++i)
        sol.nonpositive_g2[i] = std::all_of(sol.g2[i].begin(), sol.g2[i].end(), [](double g) { return g <= 0.0; });
    return sol;
}

void solve_g3(const ValidatedModel& model, GSolution& sol) {
    const auto& ins = model.insurance();
    const auto& hp = model.heston();
    const auto& d = model.diffusion();
    const std::size_t M = sol.steps();
    const double T = model.horizon().T;
    const double b2 = ins.lambda1 * ins.mu2;
    const double ratio = reinsurance_ratio(ins, model.mean_gamma());

    std::vector<double> driver(M + 1);
    for (std::size_t i = 0; i < sol.atoms(); ++i) {
        for (std::size_t m = 0; m <= M; ++m) {
            const double q = ratio * std::exp(-hp.r * (T - sol.grid[m]));
            const double g1 = sol.g1[i][m];
            driver[m] = (d.a * d.eta + d.a * ins.eta2 * q) * g1 + 0.5 * b2 * q * q * g1 * g1 +
                        hp.kappa * hp.theta * sol.g2[i][m];
        }
        auto& g3 = sol.g3[i];
        g3[M] = 0.0;
        for (std::size_t m = M; m-- > 0;) {
            const double dt = sol.grid[m + 1] - sol.grid[m];
            g3[m] = g3[m + 1] + 0.5 * dt * (driver[m] + driver[m + 1]);
            if (!std::isfinite(g3[m]))
                throw NonFiniteError("non-finite g3 for atom " + std::to_string(i) + " at step " + std::to_string(m));
        }
    }
}

GSolution solve_g(const ValidatedModel& model) {
    auto sol = solve_g2_coupled(model);
    solve_g3(model, sol);
    return sol;
}

std::vector<double> residual_check(const GSolution& sol, const ValidatedModel& model) {
    const auto& hp = model.heston();
    const std::size_t n = sol.atoms();
    const std::size_t M = sol.steps();
    const double mean_gamma = model.mean_gamma();
    const double T = model.horizon().T;
    std::vector<double> worst(n, 0.0);
    if (M < 3) return worst;

    // Difference quotient over [t_m, t_{m+1}] against the right-hand side at
    // the interval midpoint, with g1 and g2 averaged from the stored values.
    std::vector<double> mid(n);
    for (std::size_t m = 0; m < M; ++m) {
        const double dt = sol.grid[m + 1] - sol.grid[m];
        const double t_mid = 0.5 * (sol.grid[m] + sol.grid[m + 1]);
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            mid[j] = 0.5 * (sol.g2[j][m] + sol.g2[j][m + 1]);
            sum += mid[j] * sol.probs[j];
        }
        const double pi = (hp.xi + hp.rho * hp.sigma * sum) / mean_gamma * std::exp(-hp.r * (T - t_mid));
        for (std::size_t i = 0; i < n; ++i) {
            const double g1 = 0.5 * (sol.g1[i][m] + sol.g1[i][m + 1]);
            const double g2 = mid[i];
            const double lhs = -(sol.g2[i][m + 1] - sol.g2[i][m]) / dt;
            const double rhs = hp.xi * pi * g1 + 0.5 * pi * pi * g1 * g1 - hp.kappa * g2 +
                               0.5 * hp.sigma * hp.sigma * g2 * g2 + hp.rho * pi * hp.sigma * g1 * g2;
            worst[i] = std::max(worst[i], std::abs(lhs - rhs));
        }
    }
    return worst;
}

void write_gsolution_csv(std::ostream& out, const GSolution& sol) {
    CsvWriter csv(out);
    csv.header({"t", "atom_index", "gamma", "g1", "g2", "g3"});
    for (std::size_t m = 0; m < sol.grid.size(); ++m) {
        for (std::size_t i = 0; i < sol.atoms(); ++i) {
            csv.field(sol.grid[m]).field(i).field(sol.gammas[i]);
            csv.field(sol.g1[i][m]).field(sol.g2[i][m]).field(sol.g3[i][m]);
            csv.end_row();
        }
    }
}

}  // namespace eqreins
