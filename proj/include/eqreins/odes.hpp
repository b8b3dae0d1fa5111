#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqreins/model.hpp"

namespace eqreins {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// |g2| left the bounded region; the coupled system has only local existence.
class BlowUpError : public SolverError {
public:
    BlowUpError(std::size_t atom, std::size_t step, double value);
    std::size_t atom;
    std::size_t step;
    double value;
};

class NonFiniteError : public SolverError {
public:
    using SolverError::SolverError;
};

inline constexpr double kBlowUpThreshold = 1e8;

/// Exponents of Y^gamma_i(t, x, v) = -(1/gamma_i) exp(g1 x + g2 v + g3) on the
/// model grid. Indexing is [atom][m] with m = 0..M in ascending time.
struct GSolution {
    std::vector<double> grid;
    double step = 0.0;
    std::vector<double> gammas;
    std::vector<double> probs;
    std::vector<std::vector<double>> g1;
    std::vector<std::vector<double>> g2;
    std::vector<std::vector<double>> g3;
    std::vector<bool> nonpositive_g2;

    std::size_t atoms() const noexcept { return gammas.size(); }
    std::size_t steps() const noexcept { return grid.empty() ? 0 : grid.size() - 1; }

    bool operator==(const GSolution&) const = default;
};

/// Constants of the single-aversion Riccati equation
///   dg2/dtau = 0.5 k1 - k2 g2 + 0.5 k3 g2^2,  tau = T - t.
struct RiccatiConstants {
    double k1 = 0.0;  // -xi^2
    double k2 = 0.0;  // kappa + rho sigma xi
    double k3 = 0.0;  // sigma^2 (1 - rho^2)
    double k4 = 0.0;  // sqrt(k2^2 - k1 k3)
};

RiccatiConstants riccati_constants(const HestonParams& h);

/// -gamma e^{r (T - t)}.
double g1_closed(double t, double gamma, double r, double T);

/// Closed-form g2 for a one-point aversion distribution. Independent of gamma.
/// For |rho| = 1 (k3 = 0) the linear-ODE limit is used.
/// Throws std::invalid_argument unless the model has exactly one atom.
double g2_closed_single(double t, const ValidatedModel& model);

/// Closed-form g3 for a one-point aversion distribution.
double g3_closed_single(double t, const ValidatedModel& model);

/// Coupled g2 system by one predictor and one corrector per step on the
/// reversed clock s = T - t; every atom's slope in a stage is evaluated
/// against the same previous-stage vector. Fills grid, g1 and g2; g3 is zero.
/// Throws BlowUpError or NonFiniteError.
GSolution solve_g2_coupled(const ValidatedModel& model);

/// Fills g3 by backward composite trapezoid of its driver on the grid.
void solve_g3(const ValidatedModel& model, GSolution& sol);

/// solve_g2_coupled followed by solve_g3.
GSolution solve_g(const ValidatedModel& model);

/// Max over grid intervals of |dg2/dt + RHS(g2)| per atom: the difference
/// quotient on [t_m, t_{m+1}] against the right-hand side at the midpoint,
/// using the g1 and g2 stored in `sol`. Returns zeros when M < 3.
std::vector<double> residual_check(const GSolution& sol, const ValidatedModel& model);

/// Header `t,atom_index,gamma,g1,g2,g3`, rows by ascending t then atom.
void write_gsolution_csv(std::ostream& out, const GSolution& sol);

}  // namespace eqreins
