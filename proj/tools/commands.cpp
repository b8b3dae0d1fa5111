#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "eqreins/csv.hpp"
#include "eqreins/montecarlo.hpp"
#include "eqreins/odes.hpp"
#include "eqreins/strategy.hpp"

namespace eqreins::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

class StageTimer {
public:
    void start(std::string name) {
        name_ = std::move(name);
        begin_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - begin_).count();
        timings_[name_] = ms;
    }
    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : timings_) j[k] = v;
        return j;
    }

private:
    std::string name_;
    std::chrono::steady_clock::time_point begin_;
    std::map<std::string, double> timings_;
};

/// Resolved inputs of one invocation.
struct Invocation {
    RunConfig config;
    fs::path out_dir;
    unsigned threads = 1;
    std::vector<std::string> sub_args;  // subcommand name and its arguments
    std::vector<std::string> outputs;
    StageTimer timer;
};

std::ofstream open_output(Invocation& inv, const std::string& name) {
    fs::create_directories(inv.out_dir);
    const auto path = inv.out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    inv.outputs.push_back(name);
    return f;
}

void write_manifest(Invocation& inv, const std::string& name) {
    json j;
    j["tool"] = "eqreins";
    j["version"] = kToolVersion;
    j["subcommand"] = inv.sub_args.empty() ? "" : inv.sub_args.front();
    j["args"] = inv.sub_args;
    j["config"] = to_config_text(inv.config);
    j["M"] = inv.config.steps();
    j["out_dir"] = inv.out_dir.string();
    j["outputs"] = inv.outputs;
    j["timings_ms"] = inv.timer.to_json();
    fs::create_directories(inv.out_dir);
    std::ofstream f(inv.out_dir / ("manifest_" + name + ".json"), std::ios::binary);
    f << j.dump(2) << '\n';
}

bool looks_like_manifest(const std::string& path) {
    std::ifstream in(path);
    char c = 0;
    while (in.get(c))
        if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
    return false;
}

std::array<double, 3> parse_query(const std::string& text) {
    const auto v = parse_number_list(text);
    if (v.size() != 3) throw ConfigError(0, "value query must be 't,x,v', got '" + text + "'");
    return {v[0], v[1], v[2]};
}

void write_value_queries(Invocation& inv, const ValidatedModel& model, const GSolution& sol,
                         const std::vector<std::string>& queries, std::ostream& out) {
    if (queries.empty()) return;
    const auto surface = value_function(model, sol);
    auto f = open_output(inv, "value_queries.csv");
    CsvWriter csv(f);
    csv.header({"t", "x", "v", "U", "atom_index", "gamma", "Y"});
    for (const auto& q : queries) {
        const auto [t, x, v] = parse_query(q);
        const double u = surface.value(t, x, v);
        out << "U(" << format_double(t) << ", " << format_double(x) << ", " << format_double(v)
            << ") = " << format_double(u) << '\n';
        for (std::size_t i = 0; i < surface.atoms(); ++i) {
            const auto y = surface.atom_expectation(t, x, v, i);
            csv.field(t).field(x).field(v).field(u).field(i).field(sol.gammas[i]);
            csv.field(y ? format_double(*y) : std::string("out_of_range"));
            csv.end_row();
        }
    }
}

int cmd_solve(Invocation& inv, const std::vector<std::string>& queries, std::ostream& out) {
    inv.timer.start("validate");
    const auto model = inv.config.validate();
    inv.timer.stop();

    inv.timer.start("solve_g");
    const auto sol = solve_g(model);
    inv.timer.stop();

    inv.timer.start("strategy");
    const auto path = equilibrium_strategy(model, sol);
    const auto regime = regime_classification(model);
    const auto residual = residual_check(sol, model);
    inv.timer.stop();

    inv.timer.start("write");
    {
        auto f = open_output(inv, "gsolution.csv");
        write_gsolution_csv(f, sol);
    }
    {
        auto f = open_output(inv, "strategy.csv");
        write_strategy_csv(f, path);
    }
    {
        json j;
        j["ratio"] = regime.ratio;
        j["reinsurance_throughout"] = regime.reinsurance_throughout;
        j["crossover_time_to_maturity"] =
            regime.crossover_time_to_maturity ? json(*regime.crossover_time_to_maturity) : json(nullptr);
        std::map<std::string, std::size_t> counts;
        for (auto r : regime.labels) ++counts[std::string(to_string(r))];
        j["grid_point_counts"] = counts;
        j["g2_nonpositive"] = sol.nonpositive_g2;
        j["max_residual"] = residual;
        auto f = open_output(inv, "regime.json");
        f << j.dump(2) << '\n';
    }
    write_value_queries(inv, model, sol, queries, out);
    inv.timer.stop();

    out << "solved " << sol.atoms() << " atom(s) on " << sol.steps() << " steps; q_hat(0) = "
        << format_double(path.q_hat.front()) << ", pi_hat(0) = " << format_double(path.pi_hat.front()) << '\n';
    write_manifest(inv, "solve");
    return kExitOk;
}

int cmd_check(Invocation& inv, const std::vector<std::string>& queries, std::ostream& out) {
    inv.timer.start("validate");
    const auto model = inv.config.validate();
    inv.timer.stop();
    inv.timer.start("solve_g");
    const auto sol = solve_g(model);
    inv.timer.stop();
    inv.timer.start("admissibility");
    const auto rep = check_admissibility(model, sol);
    inv.timer.stop();
    {
        auto f = open_output(inv, "admissibility.csv");
        write_admissibility_csv(f, rep);
    }
    write_value_queries(inv, model, sol, queries, out);

    out << "admissibility " << (rep.passed ? "PASSED" : "FAILED") << ": rhs = " << format_double(rep.rhs)
        << ", min margin = " << format_double(rep.min_margin) << '\n';
    for (std::size_t i = 0; i < rep.g2_nonpositive.size(); ++i)
        out << "  atom " << i << " (gamma " << format_double(sol.gammas[i]) << "): g2 <= 0 "
            << (rep.g2_nonpositive[i] ? "yes" : "NO") << '\n';
    if (rep.first_violation)
        out << "  first bound violation: atom " << rep.first_violation->first << " at t = "
            << format_double(rep.grid[rep.first_violation->second]) << '\n';
    write_manifest(inv, "check");
    return rep.passed ? kExitOk : kExitAdmissibility;
}

int cmd_simulate(Invocation& inv, std::size_t paths, std::optional<std::uint64_t> seed,
                 std::optional<double> horizon, const std::string& strategy, std::ostream& out) {
    if (horizon) {
        inv.config.T = *horizon;
        inv.config.M = default_steps(*horizon);
    }
    if (seed) inv.config.seed = *seed;

    inv.timer.start("validate");
    const auto model = inv.config.validate();
    inv.timer.stop();

    const std::size_t M = model.horizon().M;
    StrategySchedule schedule;
    inv.timer.start("strategy");
    if (strategy == "equilibrium") {
        schedule = schedule_from_path(equilibrium_strategy(model, solve_g(model)));
    } else if (strategy == "zero") {
        schedule = constant_schedule(M, 0.0, 0.0);
    } else if (strategy.rfind("const:", 0) == 0) {
        const auto v = parse_number_list(strategy.substr(6));
        if (v.size() != 2) throw ConfigError(0, "--strategy const:q,pi needs two numbers");
        schedule = constant_schedule(M, v[0], v[1]);
    } else {
        throw ConfigError(0, "unknown strategy '" + strategy + "' (expected equilibrium, zero or const:q,pi)");
    }
    inv.timer.stop();

    SimulationOptions opts;
    opts.paths = paths;
    opts.seed = inv.config.seed;
    opts.threads = inv.threads;
    inv.timer.start("simulate");
    const auto batch = simulate_paths(model, schedule, opts);
    const auto result = estimate_reward(batch, model.aversion());
    inv.timer.stop();
    {
        auto f = open_output(inv, "simulation.csv");
        write_simulation_csv(f, result);
    }
    out << "simulated " << paths << " paths; J = " << format_double(result.reward) << " (se "
        << format_double(result.reward_se) << ")\n";
    write_manifest(inv, "simulate");
    return kExitOk;
}

std::string sanitize_id(const std::string& id) {
    std::string s = id;
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

int cmd_sweep(Invocation& inv, const SweepSpec& spec, std::ostream& out) {
    inv.timer.start("sweep");
    std::ostringstream buffer;
    write_sweep_csv(buffer, inv.config, spec, inv.threads);
    inv.timer.stop();
    {
        auto f = open_output(inv, "sweep.csv");
        f << buffer.str();
    }
    out << "swept " << spec.param << " over " << spec.values.size() << " values (" << to_string(spec.observable)
        << ")\n";
    write_manifest(inv, "sweep");
    return kExitOk;
}

int cmd_reproduce(Invocation& inv, const std::string& id, std::ostream& out) {
    std::vector<std::string> ids;
    if (id == "all")
        ids = reproduce_ids();
    else
        ids.push_back(id);
    for (const auto& one : ids) {
        const auto fig = figure_spec(one);
        Invocation sub;
        sub.config = fig.config;
        sub.out_dir = inv.out_dir;
        sub.threads = inv.threads;
        sub.sub_args = {"reproduce", one};
        sub.timer.start("sweep");
        std::ostringstream buffer;
        write_sweep_csv(buffer, fig.config, fig.sweep, inv.threads);
        sub.timer.stop();
        {
            auto f = open_output(sub, sanitize_id(one) + ".csv");
            f << buffer.str();
        }
        write_manifest(sub, "reproduce_" + sanitize_id(one));
        out << "wrote " << sanitize_id(one) << ".csv\n";
    }
    return kExitOk;
}

struct CellResult {
    std::vector<double> grid;
    std::vector<double> values;
};

CellResult sweep_cell(const RunConfig& base, const std::string& param, double value, Observable obs) {
    RunConfig cfg = base;
    set_scalar(cfg, param, value);
    if (param == "T") cfg.M = default_steps(value);
    const auto model = cfg.validate();
    CellResult cell;
    if (obs == Observable::QHat) {
        cell.grid = model.horizon().grid();
        for (double t : cell.grid)
            cell.values.push_back(
                q_hat_analytic(model.insurance(), model.heston().r, model.mean_gamma(), model.horizon().T, t));
    } else {
        const auto sol = solve_g2_coupled(model);
        auto path = equilibrium_strategy(model, sol);
        cell.grid = std::move(path.grid);
        cell.values = std::move(path.pi_hat);
    }
    return cell;
}

}  // namespace

Observable parse_observable(const std::string& name) {
    if (name == "q_hat") return Observable::QHat;
    if (name == "pi_hat") return Observable::PiHat;
    if (name == "pi_diff") return Observable::PiDiff;
    throw ConfigError(0, "unknown observable '" + name + "' (expected q_hat, pi_hat or pi_diff)");
}

std::string to_string(Observable obs) {
    switch (obs) {
        case Observable::QHat: return "q_hat";
        case Observable::PiHat: return "pi_hat";
        case Observable::PiDiff: return "pi_diff";
    }
    return "unknown";
}

void write_sweep_csv(std::ostream& out, const RunConfig& base, const SweepSpec& spec, unsigned threads) {
    if (!is_scalar_key(spec.param)) throw ConfigError(0, "unknown sweep parameter '" + spec.param + "'");
    if (spec.values.empty()) throw ConfigError(0, "sweep needs at least one value");
    if (spec.observable == Observable::PiDiff && spec.values.size() < 2)
        throw ConfigError(0, "difference mode needs at least two values");
    if (spec.observable == Observable::PiDiff && spec.param == "T")
        throw ConfigError(0, "difference mode needs a common grid; T cannot be swept");

    const std::size_t n = spec.values.size();
    std::vector<CellResult> cells(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                cells[k] = sweep_cell(base, spec.param, spec.values[k], spec.observable);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    CsvWriter csv(out);
    if (spec.observable != Observable::PiDiff) {
        csv.header({"param", "value", "t", to_string(spec.observable)});
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t m = 0; m < cells[k].grid.size(); ++m) {
                csv.field(spec.param).field(spec.values[k]).field(cells[k].grid[m]).field(cells[k].values[m]);
                csv.end_row();
            }
        return;
    }
    csv.header({"param", "value", "base_value", "t", "pi_hat_diff"});
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const auto& lo = cells[k];
        const auto& hi = cells[k + 1];
        for (std::size_t m = 0; m < lo.grid.size(); ++m) {
            csv.field(spec.param).field(spec.values[k + 1]).field(spec.values[k]).field(lo.grid[m]);
            csv.field(hi.values[m] - lo.values[m]);
            csv.end_row();
        }
    }
}

std::vector<std::string> reproduce_ids() {
    static const std::vector<std::string> figures{"fig1",  "fig2",  "fig31", "fig32", "fig41", "fig42",
                                                  "fig51", "fig7",  "fig8",  "fig9",  "fig10", "fig11"};
    std::vector<std::string> ids;
    for (const auto& f : figures)
        for (const char* T : {"T10", "T100"})
            for (const char* c : {"caseI", "caseII"}) ids.push_back(f + "/" + T + "/" + c);
    return ids;
}

FigureSpec figure_spec(const std::string& id) {
    const auto first = id.find('/');
    const auto second = id.find('/', first == std::string::npos ? first : first + 1);
    auto unknown = [&] {
        std::string msg = "unknown reproduce id '" + id + "'; valid ids:";
        for (const auto& v : reproduce_ids()) msg += " " + v;
        return std::invalid_argument(msg);
    };
    if (first == std::string::npos || second == std::string::npos) throw unknown();
    const auto fig = id.substr(0, first);
    const auto horizon = id.substr(first + 1, second - first - 1);
    const auto aversion = id.substr(second + 1);

    FigureSpec spec;
    spec.id = id;
    if (horizon == "T10")
        spec.config.T = 10.0;
    else if (horizon == "T100")
        spec.config.T = 100.0;
    else
        throw unknown();
    spec.config.M = default_steps(spec.config.T);
    if (aversion == "caseI") {
        spec.config.gammas = {0.5, 4.0};
        spec.config.probs = {0.5, 0.5};
    } else if (aversion == "caseII") {
        spec.config.gammas = {0.5, 4.0};
        spec.config.probs = {0.8, 0.2};
    } else {
        throw unknown();
    }

    auto& sw = spec.sweep;
    if (fig == "fig1") {
        sw = {"r", {0.03, 0.05, 0.07}, Observable::PiHat};
    } else if (fig == "fig2") {
        sw = {"xi", {0.3, 7.0 / 15.0, 0.6}, Observable::PiHat};
    } else if (fig == "fig31" || fig == "fig32") {
        spec.config.heston.rho = fig == "fig31" ? -0.5 : 0.5;
        sw = {"kappa", {3.0, 5.0, 7.0}, Observable::PiDiff};
    } else if (fig == "fig41" || fig == "fig42") {
        spec.config.heston.rho = fig == "fig41" ? -0.5 : 0.5;
        sw = {"sigma", {0.15, 0.25, 0.35}, Observable::PiDiff};
    } else if (fig == "fig51") {
        sw = {"rho", {-0.5, 0.0, 0.5}, Observable::PiDiff};
    } else if (fig == "fig7") {
        sw = {"r", {0.03, 0.05, 0.07}, Observable::QHat};
    } else if (fig == "fig8") {
        sw = {"eta2", {0.4, 0.5, 0.6}, Observable::QHat};
    } else if (fig == "fig9") {
        sw = {"lambda1", {0.5, 1.0, 2.0}, Observable::QHat};
    } else if (fig == "fig10") {
        sw = {"mu1", {0.08, 0.1, 0.12}, Observable::QHat};
    } else if (fig == "fig11") {
        sw = {"mu2", {0.15, 0.2, 0.25}, Observable::QHat};
    } else {
        throw unknown();
    }
    return spec;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Equilibrium reinsurance and investment under random risk aversion"};
    std::string config_path;
    std::string out_dir = "out";
    unsigned threads = 1;
    app.add_option("--config", config_path, "Config file (key = value) or a run manifest");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.set_version_flag("--version", std::string("eqreins ") + kToolVersion);
    app.require_subcommand(0, 1);

    std::vector<std::string> solve_queries, check_queries;
    auto* solve = app.add_subcommand("solve", "Solve the exponent ODEs and the equilibrium strategy");
    solve->add_option("--query", solve_queries, "Value query t,x,v (repeatable)");
    auto* check = app.add_subcommand("check", "Check the admissibility condition on the grid");
    check->add_option("--query", check_queries, "Value query t,x,v (repeatable)");

    std::size_t paths = 10000;
    std::optional<std::uint64_t> seed;
    std::optional<double> horizon;
    std::string strategy = "equilibrium";
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of utilities and reward");
    simulate->add_option("--paths", paths)->check(CLI::PositiveNumber)->capture_default_str();
    simulate->add_option("--seed", seed);
    simulate->add_option("--horizon", horizon);
    simulate->add_option("--strategy", strategy, "equilibrium | zero | const:q,pi")->capture_default_str();

    std::string sweep_param, sweep_values, sweep_observable = "q_hat";
    auto* sweep = app.add_subcommand("sweep", "Strategy curves over a one-parameter grid");
    sweep->add_option("--param", sweep_param)->required();
    sweep->add_option("--values", sweep_values, "Comma-separated values, p/q allowed")->required();
    sweep->add_option("--observable", sweep_observable, "q_hat | pi_hat | pi_diff")->capture_default_str();

    std::string reproduce_id;
    auto* reproduce = app.add_subcommand("reproduce", "Emit figure data with the reference parameters");
    reproduce->add_option("id", reproduce_id, "e.g. fig7/T10/caseI, or 'all'")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    Invocation inv;
    inv.out_dir = out_dir;
    inv.threads = threads;
    std::vector<std::string> recorded_args;
    try {
        if (!config_path.empty()) {
            if (looks_like_manifest(config_path)) {
                std::ifstream in(config_path);
                const auto j = json::parse(in);
                inv.config = parse_config_text(j.at("config").get<std::string>());
                recorded_args = j.at("args").get<std::vector<std::string>>();
            } else {
                inv.config = load_config_file(config_path);
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    const auto* chosen = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    if (!chosen) {
        if (recorded_args.empty()) {
            err << app.help();
            return kExitConfig;
        }
        // Replay the subcommand recorded in the manifest.
        std::vector<std::string> replay{"--config", config_path, "--out", out_dir, "--threads", std::to_string(threads)};
        replay.insert(replay.end(), recorded_args.begin(), recorded_args.end());
        return run(replay, out, err);
    }
    const auto pos = std::find(args.begin(), args.end(), chosen->get_name());
    inv.sub_args.assign(pos, args.end());

    try {
        if (chosen == solve) return cmd_solve(inv, solve_queries, out);
        if (chosen == check) return cmd_check(inv, check_queries, out);
        if (chosen == simulate) return cmd_simulate(inv, paths, seed, horizon, strategy, out);
        if (chosen == sweep) {
            SweepSpec spec;
            spec.param = sweep_param;
            spec.values = parse_number_list(sweep_values);
            spec.observable = parse_observable(sweep_observable);
            return cmd_sweep(inv, spec, out);
        }
        if (chosen == reproduce) return cmd_reproduce(inv, reproduce_id, out);
    } catch (const SolverError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBlowUp;
    } catch (const SimulationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBlowUp;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}

}  // namespace eqreins::cli
