#include "eqreins/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "eqreins/csv.hpp"

namespace eqreins {

std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::Reinsurance: return "reinsurance";
        case Regime::NewBusiness: return "new_business";
        case Regime::Boundary: return "boundary";
    }
    return "unknown";
}

double reinsurance_ratio(const InsuranceParams& ins, double mean_gamma) {
    return ins.mu1 * ins.eta2 / (ins.mu2 * mean_gamma);
}

double q_hat_analytic(const InsuranceParams& ins, double r, double mean_gamma, double T, double t) {
    return reinsurance_ratio(ins, mean_gamma) * std::exp(-r * (T - t));
}

Regime classify(double q) noexcept {
    if (q < 1.0) return Regime::Reinsurance;
    if (q > 1.0) return Regime::NewBusiness;
    return Regime::Boundary;
}

std::vector<double> pi_bar(const ValidatedModel& model, const GSolution& sol) {
    const auto& hp = model.heston();
    std::vector<double> out(sol.grid.size());
    for (std::size_t m = 0; m < sol.grid.size(); ++m) {
        double sum = 0.0;
        for (std::size_t i = 0; i < sol.atoms(); ++i) sum += sol.g2[i][m] * sol.probs[i];
        out[m] = (hp.xi + hp.rho * hp.sigma * sum) / model.mean_gamma();
    }
    return out;
}

StrategyPath equilibrium_strategy(const ValidatedModel& model, const GSolution& sol) {
    const auto& hp = model.heston();
    const double T = model.horizon().T;
    const auto kernel = pi_bar(model, sol);

    StrategyPath path;
    path.grid = sol.grid;
    const std::size_t n = sol.grid.size();
    path.q_hat.resize(n);
    path.pi_hat.resize(n);
    path.regime.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double t = sol.grid[m];
        const double discount = std::exp(-hp.r * (T - t));
        path.q_hat[m] = reinsurance_ratio(model.insurance(), model.mean_gamma()) * discount;
        path.pi_hat[m] = kernel[m] * discount;
        path.regime[m] = classify(path.q_hat[m]);
    }
    return path;
}

AdmissibilityReport check_admissibility(const ValidatedModel& model, const GSolution& sol) {
    const auto& hp = model.heston();
    const auto kernel = pi_bar(model, sol);
    const std::size_t n = sol.atoms();

    AdmissibilityReport rep;
    rep.grid = sol.grid;
    rep.rhs = hp.kappa * hp.kappa / (2.0 * hp.sigma * hp.sigma);
    rep.lhs.assign(n, std::vector<double>(sol.grid.size()));
    rep.g2_nonpositive.resize(n);
    rep.min_margin = std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < n; ++i) {
        rep.g2_nonpositive[i] =
            std::all_of(sol.g2[i].begin(), sol.g2[i].end(), [](double g) { return g <= 0.0; });
    }
    bool bound_ok = true;
    for (std::size_t m = 0; m < sol.grid.size(); ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = sol.gammas[i];
            const double pb = kernel[m];
            const double lhs = -8.0 * g * hp.xi * pb + 32.0 * g * g * pb * pb;
            rep.lhs[i][m] = lhs;
            rep.min_margin = std::min(rep.min_margin, rep.rhs - lhs);
            if (!(lhs <= rep.rhs)) {
                bound_ok = false;
                if (!rep.first_violation) rep.first_violation = std::make_pair(i, m);
            }
        }
    }
    rep.passed = bound_ok && std::all_of(rep.g2_nonpositive.begin(), rep.g2_nonpositive.end(), [](bool b) { return b; });
    return rep;
}

ValueSurface::ValueSurface(const ValidatedModel&, GSolution sol)
    : sol_(std::make_shared<const GSolution>(std::move(sol))) {}

ValueSurface::Coeffs ValueSurface::interpolate(double t, std::size_t atom) const {
    const auto& s = *sol_;
    const auto& grid = s.grid;
    if (t <= grid.front()) return {s.g1[atom].front(), s.g2[atom].front(), s.g3[atom].front()};
    if (t >= grid.back()) return {s.g1[atom].back(), s.g2[atom].back(), s.g3[atom].back()};
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    const auto hi = static_cast<std::size_t>(it - grid.begin());
    const auto lo = hi - 1;
    if (grid[lo] == t) return {s.g1[atom][lo], s.g2[atom][lo], s.g3[atom][lo]};
    const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    auto lerp = [&](const std::vector<double>& g) { return g[lo] + w * (g[hi] - g[lo]); };
    return {lerp(s.g1[atom]), lerp(s.g2[atom]), lerp(s.g3[atom])};
}

double ValueSurface::exponent(double t, double x, double v, std::size_t atom) const {
    const auto c = interpolate(t, atom);
    return c.g1 * x + c.g2 * v + c.g3;
}

double ValueSurface::value(double t, double x, double v) const {
    double u = 0.0;
    for (std::size_t i = 0; i < atoms(); ++i) {
        const auto c = interpolate(t, i);
        u += (c.g1 * x + c.g2 * v + c.g3) * sol_->probs[i] / sol_->gammas[i];
    }
    return -u;
}

std::optional<double> ValueSurface::atom_expectation(double t, double x, double v, std::size_t atom) const {
    const double e = exponent(t, x, v, atom);
    if (!(e <= kMaxExponent)) return std::nullopt;
    return -std::exp(e) / sol_->gammas[atom];
}

ValueSurface value_function(const ValidatedModel& model, const GSolution& sol) { return ValueSurface(model, sol); }

RegimeReport regime_classification(const ValidatedModel& model) {
    const auto& hz = model.horizon();
    const double r = model.heston().r;

    RegimeReport rep;
    rep.ratio = reinsurance_ratio(model.insurance(), model.mean_gamma());
    rep.reinsurance_throughout = rep.ratio < 1.0;
    if (!rep.reinsurance_throughout && r > 0.0) rep.crossover_time_to_maturity = std::log(rep.ratio) / r;
    rep.grid = hz.grid();
    rep.labels.reserve(rep.grid.size());
    for (double t : rep.grid) rep.labels.push_back(classify(q_hat_analytic(model.insurance(), r, model.mean_gamma(), hz.T, t)));
    return rep;
}

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

template <class Eval>
double central_difference(double x0, Eval&& eval) {
    const double h = kSensitivityRelativeStep * std::abs(x0);
    return (eval(x0 + h) - eval(x0 - h)) / (2.0 * h);
}

}  // namespace

SensitivityReport sensitivity_signs(const ValidatedModel& model, double t) {
    const auto base = model.insurance();
    const double r0 = model.heston().r;
    const double T = model.horizon().T;
    const double eg = model.mean_gamma();

    auto q_with = [&](auto mutate) {
        return [&, mutate](double value) {
            InsuranceParams ins = base;
            double r = r0;
            mutate(ins, r, value);
            return q_hat_analytic(ins, r, eg, T, t);
        };
    };

    SensitivityReport rep;
    rep.t = t;
    rep.dq_dr = central_difference(r0, q_with([](InsuranceParams&, double& r, double v) { r = v; }));
    rep.dq_deta2 = central_difference(base.eta2, q_with([](InsuranceParams& p, double&, double v) { p.eta2 = v; }));
    rep.dq_dlambda1 =
        central_difference(base.lambda1, q_with([](InsuranceParams& p, double&, double v) { p.lambda1 = v; }));
    rep.dq_dmu1 = central_difference(base.mu1, q_with([](InsuranceParams& p, double&, double v) { p.mu1 = v; }));
    rep.dq_dmu2 = central_difference(base.mu2, q_with([](InsuranceParams& p, double&, double v) { p.mu2 = v; }));

    rep.signs = {sign_of(rep.dq_dr), sign_of(rep.dq_deta2), sign_of(rep.dq_dlambda1), sign_of(rep.dq_dmu1),
                 sign_of(rep.dq_dmu2)};
    const bool at_maturity = t >= T;
    const bool r_ok = at_maturity ? rep.signs[0] == 0 : rep.signs[0] == -1;
    rep.matches_expected = r_ok && rep.signs[1] == 1 && rep.signs[2] == 0 && rep.signs[3] == 1 && rep.signs[4] == -1;
    return rep;
}

void write_strategy_csv(std::ostream& out, const StrategyPath& path) {
    CsvWriter csv(out);
    csv.header({"t", "q_hat", "pi_hat", "regime"});
    for (std::size_t m = 0; m < path.grid.size(); ++m) {
        csv.field(path.grid[m]).field(path.q_hat[m]).field(path.pi_hat[m]).field(to_string(path.regime[m]));
        csv.end_row();
    }
}

void write_admissibility_csv(std::ostream& out, const AdmissibilityReport& report) {
    CsvWriter csv(out);
    csv.header({"t", "atom_index", "lhs", "rhs", "margin"});
    for (std::size_t m = 0; m < report.grid.size(); ++m) {
        for (std::size_t i = 0; i < report.lhs.size(); ++i) {
            const double lhs = report.lhs[i][m];
            csv.field(report.grid[m]).field(i).field(lhs).field(report.rhs).field(report.rhs - lhs);
            csv.end_row();
        }
    }
}

}  // namespace eqreins
