#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqreins {

/// Thrown when model inputs violate one or more invariants. Every violated
/// invariant is listed, not only the first one found.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> issues);

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    std::vector<std::string> issues_;
};

/// Cramér–Lundberg inputs of the insurer's surplus.
struct InsuranceParams {
    double eta1 = 0.0;     // insurer safety loading
    double eta2 = 0.0;     // reinsurer safety loading
    double lambda1 = 0.0;  // claim intensity, 1/year
    double mu1 = 0.0;      // E[Z]
    double mu2 = 0.0;      // E[Z^2]

    bool operator==(const InsuranceParams&) const = default;
};

/// Coefficients of the diffusion approximation dR = a(eta + eta2 q)dt + b q dW0.
struct DiffusionCoefficients {
    double a = 0.0;
    double b = 0.0;
    double eta = 0.0;  // eta1 - eta2, never positive

    bool operator==(const DiffusionCoefficients&) const = default;
};

/// Risk-free rate plus Heston dynamics of the risky asset; V is a variance.
struct HestonParams {
    double r = 0.0;
    double xi = 0.0;     // volatility premium, drift is r + xi V
    double kappa = 0.0;
    double theta = 0.0;  // long-run variance
    double sigma = 0.0;  // vol of vol
    double rho = 0.0;
    double v0 = 0.0;

    bool operator==(const HestonParams&) const = default;
};

struct AversionAtom {
    double gamma = 0.0;
    double prob = 0.0;

    bool operator==(const AversionAtom&) const = default;
};

/// n-point risk-aversion distribution. Atoms keep their input order and
/// duplicates are not merged.
struct AversionDistribution {
    std::vector<AversionAtom> atoms;

    std::size_t size() const noexcept { return atoms.size(); }
    double mean() const noexcept;
    double total_probability() const noexcept;

    bool operator==(const AversionDistribution&) const = default;
};

/// Uniform time grid t_m = m * T / M on [0, T].
struct Horizon {
    double T = 0.0;
    std::size_t M = 0;
    double x0 = 0.0;

    double step() const noexcept { return T / static_cast<double>(M); }
    /// Grid time t_m; t_M is pinned to T exactly.
    double time(std::size_t m) const noexcept;
    std::vector<double> grid() const;

    bool operator==(const Horizon&) const = default;
};

/// Switches used by tests and degenerate-limit studies. Production code paths
/// always validate with the defaults.
struct ValidationOptions {
    bool require_feller = true;
    bool allow_zero_rate = false;
    bool allow_zero_xi = false;
};

std::vector<std::string> insurance_issues(const InsuranceParams& ins);
std::vector<std::string> heston_issues(const HestonParams& h, const ValidationOptions& opts = {});
std::vector<std::string> distribution_issues(const AversionDistribution& dist);
std::vector<std::string> horizon_issues(const Horizon& horizon);

/// a = lambda1 mu1, b = sqrt(lambda1 mu2), eta = eta1 - eta2.
/// Throws ValidationError if the insurance invariants fail.
DiffusionCoefficients derive_diffusion(const InsuranceParams& ins);

class ValidatedModel;

ValidatedModel validate_config(const InsuranceParams& ins, const HestonParams& heston,
                               const AversionDistribution& dist, const Horizon& horizon,
                               const ValidationOptions& opts = {});

/// Immutable bundle of checked inputs shared by every downstream stage.
class ValidatedModel {
public:
    const InsuranceParams& insurance() const noexcept { return ins_; }
    const HestonParams& heston() const noexcept { return heston_; }
    const AversionDistribution& aversion() const noexcept { return dist_; }
    const Horizon& horizon() const noexcept { return horizon_; }
    const DiffusionCoefficients& diffusion() const noexcept { return diff_; }

    double mean_gamma() const noexcept { return mean_gamma_; }
    std::size_t atom_count() const noexcept { return dist_.size(); }

    bool operator==(const ValidatedModel&) const = default;

private:
    friend ValidatedModel validate_config(const InsuranceParams&, const HestonParams&,
                                          const AversionDistribution&, const Horizon&,
                                          const ValidationOptions&);
    ValidatedModel() = default;

    InsuranceParams ins_;
    HestonParams heston_;
    AversionDistribution dist_;
    Horizon horizon_;
    DiffusionCoefficients diff_;
    double mean_gamma_ = 0.0;
};

// Reference inputs: insurance and market table, plus the two two-point
// aversion settings used throughout the numerical study.
InsuranceParams reference_insurance();
/// v0 is not part of the table; the long-run variance is used.
HestonParams reference_heston();
AversionDistribution aversion_case_one();  // gamma (0.5, 4), p (0.5, 0.5)
AversionDistribution aversion_case_two();  // gamma (0.5, 4), p (0.8, 0.2)

/// Grid size keeping the step at 1e-3 years.
std::size_t default_steps(double T);

}  // namespace eqreins
