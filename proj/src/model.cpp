#include "eqreins/model.hpp"

#include <cmath>
#include <sstream>

namespace eqreins {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::ostringstream os;
    os << "invalid model configuration";
    for (const auto& issue : issues) os << "\n  - " << issue;
    return os.str();
}

bool is_finite(double x) { return std::isfinite(x); }

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::invalid_argument(join_issues(issues)), issues_(std::move(issues)) {}

double AversionDistribution::mean() const noexcept {
    double m = 0.0;
    for (const auto& atom : atoms) m += atom.gamma * atom.prob;
    return m;
}

double AversionDistribution::total_probability() const noexcept {
    double s = 0.0;
    for (const auto& atom : atoms) s += atom.prob;
    return s;
}

double Horizon::time(std::size_t m) const noexcept {
    if (m >= M) return T;
    return static_cast<double>(m) * step();
}

std::vector<double> Horizon::grid() const {
    std::vector<double> t(M + 1);
    for (std::size_t m = 0; m <= M; ++m) t[m] = time(m);
    return t;
}

std::vector<std::string> insurance_issues(const InsuranceParams& ins) {
    std::vector<std::string> issues;
    if (!(is_finite(ins.eta1) && is_finite(ins.eta2) && is_finite(ins.lambda1) &&
          is_finite(ins.mu1) && is_finite(ins.mu2))) {
        issues.emplace_back("insurance parameters must be finite");
        return issues;
    }
    if (!(ins.lambda1 > 0.0)) issues.emplace_back("lambda1 must be > 0");
    if (!(ins.mu1 > 0.0)) issues.emplace_back("mu1 must be > 0");
    if (!(ins.mu2 > 0.0)) issues.emplace_back("mu2 must be > 0");
    if (!(ins.eta1 >= 0.0)) issues.emplace_back("eta1 must be >= 0");
    if (!(ins.eta2 >= ins.eta1))
        issues.emplace_back("eta2 < eta1: reinsurer loading must not be below insurer loading");
    if (ins.mu1 > 0.0 && ins.mu2 > 0.0 && ins.mu2 < ins.mu1 * ins.mu1)
        issues.emplace_back("mu2 < mu1^2: second moment below squared first moment");
    return issues;
}

std::vector<std::string> heston_issues(const HestonParams& h, const ValidationOptions& opts) {
    std::vector<std::string> issues;
    if (!(is_finite(h.r) && is_finite(h.xi) && is_finite(h.kappa) && is_finite(h.theta) &&
          is_finite(h.sigma) && is_finite(h.rho) && is_finite(h.v0))) {
        issues.emplace_back("market parameters must be finite");
        return issues;
    }
    if (opts.allow_zero_rate ? !(h.r >= 0.0) : !(h.r > 0.0)) issues.emplace_back("r must be > 0");
    if (opts.allow_zero_xi ? !(h.xi >= 0.0) : !(h.xi > 0.0)) issues.emplace_back("xi must be > 0");
    if (!(h.kappa > 0.0)) issues.emplace_back("kappa must be > 0");
    if (!(h.theta > 0.0)) issues.emplace_back("theta must be > 0");
    if (!(h.sigma > 0.0)) issues.emplace_back("sigma must be > 0");
    if (!(h.v0 > 0.0)) issues.emplace_back("v0 must be > 0");
    if (!(h.rho >= -1.0 && h.rho <= 1.0)) issues.emplace_back("rho must lie in [-1, 1]");
    if (opts.require_feller && !(2.0 * h.kappa * h.theta > h.sigma * h.sigma))
        issues.emplace_back("Feller condition violated: 2 kappa theta <= sigma^2");
    return issues;
}

std::vector<std::string> distribution_issues(const AversionDistribution& dist) {
    std::vector<std::string> issues;
    if (dist.atoms.empty()) {
        issues.emplace_back("risk-aversion distribution has no atoms");
        return issues;
    }
    for (std::size_t i = 0; i < dist.atoms.size(); ++i) {
        const auto& atom = dist.atoms[i];
        if (!(std::isfinite(atom.gamma) && atom.gamma > 0.0))
            issues.push_back("gamma[" + std::to_string(i) + "] must be > 0");
        if (!(std::isfinite(atom.prob) && atom.prob > 0.0))
            issues.push_back("prob[" + std::to_string(i) + "] must be > 0");
    }
    const double total = dist.total_probability();
    if (!(std::abs(total - 1.0) <= 1e-12)) {
        std::ostringstream os;
        os.precision(17);
        os << "probabilities sum to " << total << ", expected 1 within 1e-12";
        issues.push_back(os.str());
    }
    if (issues.empty() && !(dist.mean() > 0.0)) issues.emplace_back("E[gamma] must be > 0");
    return issues;
}

std::vector<std::string> horizon_issues(const Horizon& horizon) {
    std::vector<std::string> issues;
    if (!(std::isfinite(horizon.T) && horizon.T > 0.0)) issues.emplace_back("T must be > 0");
    if (horizon.M < 1) issues.emplace_back("M must be >= 1");
    if (!std::isfinite(horizon.x0)) issues.emplace_back("x0 must be finite");
    return issues;
}

DiffusionCoefficients derive_diffusion(const InsuranceParams& ins) {
    auto issues = insurance_issues(ins);
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return {ins.lambda1 * ins.mu1, std::sqrt(ins.lambda1 * ins.mu2), ins.eta1 - ins.eta2};
}

ValidatedModel validate_config(const InsuranceParams& ins, const HestonParams& heston,
                               const AversionDistribution& dist, const Horizon& horizon,
                               const ValidationOptions& opts) {
    std::vector<std::string> issues = insurance_issues(ins);
    for (auto&& s : heston_issues(heston, opts)) issues.push_back(std::move(s));
    for (auto&& s : distribution_issues(dist)) issues.push_back(std::move(s));
    for (auto&& s : horizon_issues(horizon)) issues.push_back(std::move(s));
    if (!issues.empty()) throw ValidationError(std::move(issues));

    ValidatedModel model;
    model.ins_ = ins;
    model.heston_ = heston;
    model.dist_ = dist;
    model.horizon_ = horizon;
    model.diff_ = derive_diffusion(ins);
    model.mean_gamma_ = dist.mean();
    return model;
}

InsuranceParams reference_insurance() { return {0.3, 0.5, 1.0, 0.1, 0.2}; }

HestonParams reference_heston() {
    const double theta = 0.15 * 0.15;
    return {0.05, 7.0 / 15.0, 5.0, theta, 0.25, -0.5, theta};
}

AversionDistribution aversion_case_one() { return {{{0.5, 0.5}, {4.0, 0.5}}}; }

AversionDistribution aversion_case_two() { return {{{0.5, 0.8}, {4.0, 0.2}}}; }

std::size_t default_steps(double T) {
    const double m = std::round(T / 1e-3);
    return m < 1.0 ? 1 : static_cast<std::size_t>(m);
}

}  // namespace eqreins
