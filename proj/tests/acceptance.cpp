// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only
// Exit status is 0 iff every selected criterion passed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "commands.hpp"
#include "eqreins/csv.hpp"
#include "eqreins/montecarlo.hpp"
#include "eqreins/odes.hpp"
#include "eqreins/strategy.hpp"

using namespace eqreins;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok " : "FAILED ") + what);
    }
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ValidatedModel reference_model(AversionDistribution dist, double T, std::size_t M,
                               HestonParams heston = reference_heston()) {
    return validate_config(reference_insurance(), heston, std::move(dist), {T, M, 1.0});
}

AversionDistribution one_point(double gamma) { return AversionDistribution{{{gamma, 1.0}}}; }

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path scratch(const std::string& name) {
    const char* root = std::getenv("EQREINS_TEST_TMP");
    auto dir = fs::path(root ? root : "tmp") / "acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (out_text) *out_text = out.str() + err.str();
    return code;
}

double max_closed_form_error(std::size_t M) {
    const auto model = reference_model(one_point(1.0), 10.0, M);
    const auto sol = solve_g2_coupled(model);
    double err = 0.0;
    for (std::size_t m = 0; m <= M; ++m)
        err = std::max(err, std::abs(sol.g2[0][m] - g2_closed_single(sol.grid[m], model)));
    return err;
}

Verdict closed_form_equivalence() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const double e1 = max_closed_form_error(2500);
    const double e2 = max_closed_form_error(5000);
    const double e3 = max_closed_form_error(10000);
    const double elapsed = seconds_since(t0);
    const double p12 = std::log2(e1 / e2);
    const double p23 = std::log2(e2 / e3);
    v.require(e3 <= 1e-6, "max|g2 - closed form| at M=10000 = " + fmt(e3) + " (<= 1e-6)");
    v.require(std::min(p12, p23) >= 1.9, "orders " + fmt(p12) + ", " + fmt(p23) + " (>= 1.9)");
    v.require(elapsed <= 1.0, "runtime " + fmt(elapsed) + " s for three solves (<= 1 s)");
    return v;
}

Verdict atom_collapse() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (double gamma : {0.5, 1.0, 4.0}) {
        const auto m1 = reference_model(one_point(gamma), 10.0, 10000);
        const auto m2 = reference_model(AversionDistribution{{{gamma, 0.5}, {gamma, 0.5}}}, 10.0, 10000);
        const auto s1 = solve_g(m1);
        const auto s2 = solve_g(m2);
        const auto p1 = equilibrium_strategy(m1, s1);
        const auto p2 = equilibrium_strategy(m2, s2);
        for (std::size_t m = 0; m <= 10000; ++m) {
            for (std::size_t i = 0; i < 2; ++i) {
                worst = std::max({worst, std::abs(s1.g1[0][m] - s2.g1[i][m]), std::abs(s1.g2[0][m] - s2.g2[i][m]),
                                  std::abs(s1.g3[0][m] - s2.g3[i][m])});
            }
            worst = std::max({worst, std::abs(p1.q_hat[m] - p2.q_hat[m]), std::abs(p1.pi_hat[m] - p2.pi_hat[m])});
        }
    }
    const double elapsed = seconds_since(t0);
    v.require(worst <= 1e-12, "max difference over g1, g2, g3, q, pi for gamma in {0.5, 1, 4} = " + fmt(worst) +
                                  " (<= 1e-12)");
    v.require(elapsed / 3.0 <= 1.0, "runtime " + fmt(elapsed / 3.0) + " s per gamma (<= 1 s)");
    return v;
}

Verdict ode_residual() {
    Verdict v;
    const auto m1 = reference_model(aversion_case_one(), 10.0, 10000);
    const auto m2 = reference_model(aversion_case_one(), 10.0, 20000);
    const auto r1 = residual_check(solve_g2_coupled(m1), m1);
    const auto r2 = residual_check(solve_g2_coupled(m2), m2);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        const double ratio = r1[i] / r2[i];
        v.require(r1[i] <= 1e-5, "atom " + std::to_string(i) + " residual " + fmt(r1[i]) + " at M=10000 (<= 1e-5)");
        v.require(ratio >= 3.5 && ratio <= 4.5, "atom " + std::to_string(i) + " ratio M=10000/20000 = " + fmt(ratio) +
                                                    " (in [3.5, 4.5])");
    }
    return v;
}

Verdict analytic_strategy_values() {
    Verdict v;
    const auto model = reference_model(aversion_case_one(), 10.0, 10000);
    const auto path = equilibrium_strategy(model, solve_g2_coupled(model));
    const double at_T = std::abs(path.q_hat.back() - 1.0 / 9.0) * 9.0;
    const double at_0 = std::abs(path.q_hat.front() - std::exp(-0.5) / 9.0) / (std::exp(-0.5) / 9.0);
    v.require(at_T <= 1e-12, "q(T) relative error " + fmt(at_T) + " (<= 1e-12)");
    v.require(at_0 <= 1e-12, "q(0) relative error " + fmt(at_0) + " (<= 1e-12)");

    auto h = reference_heston();
    h.rho = 0.0;
    double worst = 0.0;
    for (const auto& dist : {aversion_case_one(), aversion_case_two()}) {
        const auto m0 = reference_model(dist, 10.0, 10000, h);
        const auto p0 = equilibrium_strategy(m0, solve_g2_coupled(m0));
        for (std::size_t m = 0; m < p0.grid.size(); ++m) {
            const double exact = h.xi / dist.mean() * std::exp(-h.r * (10.0 - p0.grid[m]));
            worst = std::max(worst, std::abs(p0.pi_hat[m] - exact) / exact);
        }
    }
    v.require(worst <= 1e-12, "rho=0 pi relative error " + fmt(worst) + " (<= 1e-12)");
    return v;
}

Verdict admissibility_reproduction() {
    Verdict v;
    const auto dir = scratch("c5");
    for (const char* c : {"caseI", "caseII"}) {
        for (double T : {10.0, 100.0}) {
            const std::string probs = std::string(c) == "caseI" ? "0.5, 0.5" : "0.8, 0.2";
            const auto sub = dir / (std::string(c) + "_T" + std::to_string(static_cast<int>(T)));
            fs::create_directories(sub);
            std::ofstream(sub / "run.cfg") << "gammas = 0.5, 4\nprobs = " << probs << "\nT = " << T << "\n";
            std::string text;
            const int code = run_cli({"--config", (sub / "run.cfg").string(), "--out", sub.string(), "check"}, &text);

            const auto model = reference_model(std::string(c) == "caseI" ? aversion_case_one() : aversion_case_two(), T,
                                               default_steps(T));
            const auto sol = solve_g2_coupled(model);
            double g2_max = -INFINITY;
            for (const auto& row : sol.g2) g2_max = std::max(g2_max, *std::max_element(row.begin(), row.end()));
            const auto rep = check_admissibility(model, sol);
            const std::string tag = std::string(c) + " T=" + fmt(T);
            v.require(code == 0, tag + ": check exit " + std::to_string(code) + " (== 0), min margin " +
                                     fmt(rep.min_margin));
            v.require(g2_max <= 0.0, tag + ": max g2 = " + fmt(g2_max) + " (<= 0)");
        }
    }
    return v;
}

Verdict sensitivity_sign_check() {
    Verdict v;
    for (const auto& [name, dist] :
         {std::pair{"case I", aversion_case_one()}, std::pair{"case II", aversion_case_two()}}) {
        const auto model = reference_model(dist, 10.0, 10000);
        for (double t : {0.0, 5.0}) {
            const auto rep = sensitivity_signs(model, t);
            std::string signs;
            for (int s : rep.signs) signs += s > 0 ? '+' : s < 0 ? '-' : '0';
            const std::string tag = std::string(name) + " t=" + fmt(t);
            v.require(rep.matches_expected, tag + ": signs (r, eta2, lambda1, mu1, mu2) = " + signs + " (-+0+-)");
            v.require(std::abs(rep.dq_dlambda1) <= 1e-14,
                      tag + ": |dq/dlambda1| = " + fmt(std::abs(rep.dq_dlambda1)) + " (<= 1e-14)");
        }
    }
    return v;
}

Verdict figure_trends() {
    Verdict v;
    for (const auto& [name, dist] :
         {std::pair{"case I", aversion_case_one()}, std::pair{"case II", aversion_case_two()}}) {
        const auto model = reference_model(dist, 100.0, default_steps(100.0));
        const auto path = equilibrium_strategy(model, solve_g2_coupled(model));
        const std::size_t M = path.grid.size() - 1;

        std::size_t pi_rises = 0;
        bool q_increasing = true;
        bool q_in_unit = true;
        for (std::size_t m = 0; m < M; ++m) {
            if (path.pi_hat[m + 1] > path.pi_hat[m]) ++pi_rises;
            q_increasing = q_increasing && path.q_hat[m + 1] > path.q_hat[m];
        }
        for (double q : path.q_hat) q_in_unit = q_in_unit && q > 0.0 && q < 1.0;
        const double pi_peak = *std::max_element(path.pi_hat.begin(), path.pi_hat.end());
        const std::string tag = std::string(name) + " T=100";
        v.require(pi_rises == 0, tag + ": pi decreasing in t; rises on " + std::to_string(pi_rises) + " of " +
                                     std::to_string(M) + " steps, pi(0) = " + fmt(path.pi_hat.front()) +
                                     ", pi(100) = " + fmt(path.pi_hat.back()));
        v.require(std::abs(path.pi_hat.back()) <= 1e-2 * pi_peak,
                  tag + ": pi(100) / max pi = " + fmt(path.pi_hat.back() / pi_peak) + " (-> 0, <= 1e-2)");
        v.require(q_increasing, tag + ": q strictly increasing in t");
        v.require(q_in_unit, tag + ": q in (0, 1), q(0) = " + fmt(path.q_hat.front()) + ", q(100) = " +
                                 fmt(path.q_hat.back()));
    }

    // Difference curves: consecutive-value differences of pi for the kappa, sigma and rho figures.
    for (const char* fig : {"fig31", "fig32", "fig41", "fig42", "fig51"}) {
        for (const char* c : {"caseI", "caseII"}) {
            const auto spec = cli::figure_spec(std::string(fig) + "/T100/" + c);
            std::ostringstream csv;
            cli::write_sweep_csv(csv, spec.config, spec.sweep, worker_count());
            std::istringstream in(csv.str());
            std::string line;
            std::getline(in, line);
            // |diff| at distance delta before maturity, max over the value pairs.
            const std::vector<double> deltas{1.0, 0.1, 0.01, 0.001, 0.0};
            std::vector<double> near(deltas.size(), 0.0);
            double peak = 0.0;
            while (std::getline(in, line)) {
                std::stringstream ls(line);
                std::string cell;
                std::vector<double> f;
                std::getline(ls, cell, ',');
                while (std::getline(ls, cell, ',')) f.push_back(std::stod(cell));
                const double d = std::abs(f[3]);
                peak = std::max(peak, d);
                for (std::size_t k = 0; k < deltas.size(); ++k)
                    if (std::abs(f[2] - (100.0 - deltas[k])) < 1e-9) near[k] = std::max(near[k], d);
            }
            bool shrinking = true;
            std::string trail;
            for (std::size_t k = 0; k < near.size(); ++k) {
                if (k > 0) shrinking = shrinking && near[k] < near[k - 1];
                trail += (k ? ", " : "") + fmt(near[k]);
            }
            v.require(shrinking && near[3] <= 1e-2 * peak && near.back() <= 1e-12,
                      std::string(fig) + "/T100/" + c + ": |diff| at 100 - {1, 0.1, 0.01, 0.001, 0} = " + trail +
                          ", peak " + fmt(peak) + " (strictly shrinking to 0)");
        }
    }
    return v;
}

Verdict monte_carlo_sanity() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    const unsigned threads = worker_count();

    {
        const auto model = reference_model(aversion_case_one(), 10.0, 10000);
        SimulationOptions o;
        o.paths = 1000;
        o.seed = 1;
        o.threads = threads;
        const auto batch = simulate_paths(model, constant_schedule(10000, 0.0, 0.0), o);
        const auto& d = model.diffusion();
        const double r = model.heston().r;
        const double exact = std::exp(r * 10.0) + d.a * d.eta * std::expm1(r * 10.0) / r;
        double worst = 0.0;
        for (double x : batch.terminal_x) worst = std::max(worst, std::abs(x - exact) / std::abs(exact));
        v.require(worst <= 1e-10, "(i) zero-strategy X(10) relative error " + fmt(worst) + " (<= 1e-10)");
    }
    {
        // v0 away from theta so the mean actually moves.
        auto h = reference_heston();
        h.v0 = 0.04;
        const auto model = reference_model(aversion_case_one(), 1.0, 1000, h);
        SimulationOptions o;
        o.paths = 100000;
        o.seed = 2;
        o.threads = threads;
        o.record_steps = {100, 500, 1000};
        const auto batch = simulate_paths(model, constant_schedule(1000, 0.0, 0.0), o);
        double worst_z = 0.0;
        for (std::size_t k = 0; k < o.record_steps.size(); ++k) {
            const double t = model.horizon().time(o.record_steps[k]);
            double s = 0.0, ss = 0.0;
            for (std::size_t p = 0; p < batch.paths; ++p) s += batch.v_at(p, k);
            const double mean = s / batch.paths;
            for (std::size_t p = 0; p < batch.paths; ++p) ss += (batch.v_at(p, k) - mean) * (batch.v_at(p, k) - mean);
            const double se = std::sqrt(ss / (batch.paths - 1) / batch.paths);
            const double exact = h.theta + (h.v0 - h.theta) * std::exp(-h.kappa * t);
            worst_z = std::max(worst_z, std::abs(mean - exact) / se);
        }
        v.require(worst_z <= 3.0, "(ii) CIR mean at t = 0.1, 0.5, 1, N=1e5: max |error| / SE = " + fmt(worst_z) +
                                      " (<= 3)");
    }
    {
        const auto model = reference_model(aversion_case_one(), 1.0, 1000);
        const auto sol = solve_g(model);
        SimulationOptions o;
        o.paths = 100000;
        o.seed = 3;
        o.threads = threads;
        const auto res = estimate_reward(simulate_paths(model, schedule_from_path(equilibrium_strategy(model, sol)), o),
                                         model.aversion());
        const auto surf = value_function(model, sol);
        for (std::size_t i = 0; i < res.atoms.size(); ++i) {
            const double y = *surf.atom_expectation(0.0, model.horizon().x0, model.heston().v0, i);
            const double z = std::abs(res.atoms[i].utility_mean - y) / res.atoms[i].utility_se;
            v.require(z <= 3.0, "(iii) atom " + std::to_string(i) + " E[phi(X(1))] = " + fmt(res.atoms[i].utility_mean) +
                                    " vs Y(0) = " + fmt(y) + ", |diff| / SE = " + fmt(z) + " (<= 3)");
        }
    }
    const double elapsed = seconds_since(t0);
    v.require(elapsed <= 60.0, "runtime " + fmt(elapsed) + " s (<= 60 s)");
    return v;
}

Verdict equilibrium_spot_check_criterion() {
    Verdict v;
    const auto model = reference_model(aversion_case_one(), 1.0, 1000);
    const auto sol = solve_g(model);
    SimulationOptions o;
    o.paths = 100000;
    o.seed = 4;
    o.threads = worker_count();
    const auto rows = equilibrium_spot_check(model, sol, {{0.1, 1.0, 0.0}, {0.1, 0.0, 1.0}, {0.1, 0.5, -0.5}}, o);
    for (const auto& r : rows) {
        const double bound = -3.0 * r.scaled_difference_se;
        v.require(r.scaled_difference >= bound, "(q, pi) = (" + fmt(r.perturbation.q) + ", " + fmt(r.perturbation.pi) +
                                                   ") on [0, 0.1): (J_eq - J_h)/h = " + fmt(r.scaled_difference) +
                                                   " (>= " + fmt(bound) + ")");
    }
    return v;
}

Verdict determinism() {
    Verdict v;
    const auto dir = scratch("c10");
    std::ofstream(dir / "run.cfg") << "T = 1\n";
    const std::vector<std::vector<std::string>> commands{
        {"solve", "--query", "0.5,1,0.02"},
        {"simulate", "--paths", "5000", "--seed", "77"},
        {"sweep", "--param", "kappa", "--values", "3,5,7", "--observable", "pi_diff"},
        {"reproduce", "fig8/T10/caseII"},
    };
    const std::vector<std::pair<std::string, std::string>> runs{{"a", "1"}, {"b", "1"}, {"c", "4"}};
    for (const auto& [name, threads] : runs) {
        for (const auto& cmd : commands) {
            std::vector<std::string> args{"--config", (dir / "run.cfg").string(), "--out", (dir / name).string(),
                                          "--threads", threads};
            args.insert(args.end(), cmd.begin(), cmd.end());
            if (run_cli(args) != 0) {
                v.require(false, "run " + name + " " + cmd.front() + " exited non-zero");
                return v;
            }
        }
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto file = entry.path().filename().string();
        if (file.rfind("manifest_", 0) == 0) continue;  // timings differ by design
        ++compared;
        const auto ref = slurp(entry.path());
        v.require(ref == slurp(dir / "b" / file) && ref == slurp(dir / "c" / file),
                  file + " identical across repeat and 1 vs 4 threads");
    }
    v.require(compared >= 6, std::to_string(compared) + " data files compared");
    return v;
}

struct Criterion {
    int id;
    const char* title;
    std::function<Verdict()> check;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list{
        {1, "closed-form equivalence, one atom", closed_form_equivalence},
        {2, "atom-collapse equivalence", atom_collapse},
        {3, "g2 ODE residual", ode_residual},
        {4, "analytic strategy values", analytic_strategy_values},
        {5, "admissibility, cases I and II, T = 10 and 100", admissibility_reproduction},
        {6, "retention sensitivity signs", sensitivity_sign_check},
        {7, "figure-trend properties", figure_trends},
        {8, "Monte Carlo sanity", monte_carlo_sanity},
        {9, "equilibrium spot check", equilibrium_spot_check_criterion},
        {10, "determinism across repeats and thread counts", determinism},
    };
    return list;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--criterion" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    bool all_pass = true;
    bool any = false;
    for (const auto& c : criteria()) {
        if (only && c.id != only) continue;
        any = true;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        all_pass = all_pass && v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " ("
                  << fmt(seconds_since(t0)) << " s)\n";
        for (const auto& n : v.notes) std::cout << "    " << n << '\n';
    }
    if (!any) {
        std::cerr << "no criterion " << only << '\n';
        return 2;
    }
    return all_pass ? 0 : 1;
}
