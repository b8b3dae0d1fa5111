#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "eqreins/model.hpp"
#include "eqreins/odes.hpp"

namespace eqreins {

enum class Regime { Reinsurance, NewBusiness, Boundary };

std::string_view to_string(Regime r) noexcept;

/// a eta2 / (b^2 E[gamma]). lambda1 cancels in a / b^2, so it is evaluated as
/// mu1 eta2 / (mu2 E[gamma]).
double reinsurance_ratio(const InsuranceParams& ins, double mean_gamma);

/// Equilibrium retention q(t) = ratio * e^{-r (T - t)}. Depends on time and
/// parameters only.
double q_hat_analytic(const InsuranceParams& ins, double r, double mean_gamma, double T, double t);

/// Equilibrium strategy on the model grid; both components are deterministic
/// and state-independent.
struct StrategyPath {
    std::vector<double> grid;
    std::vector<double> q_hat;
    std::vector<double> pi_hat;  // currency held in the risky asset
    std::vector<Regime> regime;
};

Regime classify(double q) noexcept;

StrategyPath equilibrium_strategy(const ValidatedModel& model, const GSolution& sol);

/// Undiscounted investment kernel (xi + rho sigma sum_i g2_i p_i) / E[gamma]
/// at each grid point.
std::vector<double> pi_bar(const ValidatedModel& model, const GSolution& sol);

struct AdmissibilityReport {
    std::vector<double> grid;
    std::vector<std::vector<double>> lhs;  // [atom][m]: -8 g xi pibar + 32 g^2 pibar^2
    double rhs = 0.0;                      // kappa^2 / (2 sigma^2)
    std::vector<bool> g2_nonpositive;
    bool passed = false;
    /// First (atom, m) in time order where lhs > rhs, if any.
    std::optional<std::pair<std::size_t, std::size_t>> first_violation;
    /// Smallest rhs - lhs over all atoms and grid points.
    double min_margin = 0.0;
};

/// Evaluates the sufficient condition at every grid point and atom. A failed
/// check is data, not an error.
AdmissibilityReport check_admissibility(const ValidatedModel& model, const GSolution& sol);

/// Value function U and per-atom expectations Y^gamma_i built from the
/// exponents. Off-grid times interpolate the exponents linearly.
class ValueSurface {
public:
    ValueSurface(const ValidatedModel& model, GSolution sol);

    /// -sum_i (1/gamma_i) [g1 x + g2 v + g3] p_i
    double value(double t, double x, double v) const;

    /// -(1/gamma_i) exp(g1 x + g2 v + g3); nullopt when the exponent exceeds
    /// kMaxExponent.
    std::optional<double> atom_expectation(double t, double x, double v, std::size_t atom) const;

    /// Exponent g1 x + g2 v + g3 of Y^gamma_i.
    double exponent(double t, double x, double v, std::size_t atom) const;

    std::size_t atoms() const noexcept { return sol_->atoms(); }

    static constexpr double kMaxExponent = 700.0;

private:
    struct Coeffs {
        double g1, g2, g3;
    };
    Coeffs interpolate(double t, std::size_t atom) const;

    std::shared_ptr<const GSolution> sol_;
};

ValueSurface value_function(const ValidatedModel& model, const GSolution& sol);

struct RegimeReport {
    double ratio = 0.0;  // a eta2 / (b^2 E[gamma])
    bool reinsurance_throughout = false;
    /// Time to maturity below which new business is written: ln(ratio) / r.
    std::optional<double> crossover_time_to_maturity;
    std::vector<double> grid;
    std::vector<Regime> labels;
};

RegimeReport regime_classification(const ValidatedModel& model);

struct SensitivityReport {
    double t = 0.0;
    double dq_dr = 0.0;
    double dq_deta2 = 0.0;
    double dq_dlambda1 = 0.0;
    double dq_dmu1 = 0.0;
    double dq_dmu2 = 0.0;
    /// Signs of the five derivatives above in the same order, each -1, 0 or +1.
    std::vector<int> signs;
    /// Signs equal (-, +, 0, +, -); the r entry is allowed to be 0 at t = T.
    bool matches_expected = false;
};

inline constexpr double kSensitivityRelativeStep = 1e-6;

/// Central finite differences of q_hat at time t with relative step 1e-6.
SensitivityReport sensitivity_signs(const ValidatedModel& model, double t);

/// `t,q_hat,pi_hat,regime`
void write_strategy_csv(std::ostream& out, const StrategyPath& path);
/// `t,atom_index,lhs,rhs,margin`
void write_admissibility_csv(std::ostream& out, const AdmissibilityReport& report);

}  // namespace eqreins
