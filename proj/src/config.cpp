#include "eqreins/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eqreins/csv.hpp"

namespace eqreins {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_decimal(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    return value;
}

double& scalar_ref(RunConfig& cfg, std::string_view key) {
    if (key == "eta1") return cfg.insurance.eta1;
    if (key == "eta2") return cfg.insurance.eta2;
    if (key == "lambda1") return cfg.insurance.lambda1;
    if (key == "mu1") return cfg.insurance.mu1;
    if (key == "mu2") return cfg.insurance.mu2;
    if (key == "r") return cfg.heston.r;
    if (key == "xi") return cfg.heston.xi;
    if (key == "kappa") return cfg.heston.kappa;
    if (key == "theta") return cfg.heston.theta;
    if (key == "sigma") return cfg.heston.sigma;
    if (key == "rho") return cfg.heston.rho;
    if (key == "v0") return cfg.heston.v0;
    if (key == "T") return cfg.T;
    if (key == "x0") return cfg.x0;
    throw std::invalid_argument("unknown parameter '" + std::string(key) + "'");
}

std::uint64_t parse_unsigned(std::string_view text) {
    text = trim(text);
    std::uint64_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end)
        throw std::invalid_argument("not a non-negative integer: '" + std::string(text) + "'");
    return value;
}

}  // namespace

ConfigError::ConfigError(std::size_t line, const std::string& what)
    : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

std::size_t RunConfig::steps() const { return M ? *M : default_steps(T); }

AversionDistribution RunConfig::distribution() const {
    AversionDistribution dist;
    if (gammas.size() != probs.size())
        throw ValidationError({"gammas has " + std::to_string(gammas.size()) + " entries but probs has " +
                               std::to_string(probs.size())});
    for (std::size_t i = 0; i < gammas.size(); ++i) dist.atoms.push_back({gammas[i], probs[i]});
    return dist;
}

Horizon RunConfig::horizon() const { return {T, steps(), x0}; }

ValidatedModel RunConfig::validate(const ValidationOptions& opts) const {
    return validate_config(insurance, heston, distribution(), horizon(), opts);
}

double parse_number(std::string_view text) {
    text = trim(text);
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_decimal(text);
    const double num = parse_decimal(text.substr(0, slash));
    const double den = parse_decimal(text.substr(slash + 1));
    if (den == 0.0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    return num / den;
}

std::vector<double> parse_number_list(std::string_view text) {
    std::vector<double> values;
    while (true) {
        const auto comma = text.find(',');
        values.push_back(parse_number(text.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return values;
}

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "missing key");
        if (value.empty()) throw ConfigError(line_no, "missing value for '" + std::string(key) + "'");
        try {
            if (key == "gammas") {
                cfg.gammas = parse_number_list(value);
            } else if (key == "probs") {
                cfg.probs = parse_number_list(value);
            } else if (key == "M") {
                cfg.M = static_cast<std::size_t>(parse_unsigned(value));
            } else if (key == "seed") {
                cfg.seed = parse_unsigned(value);
            } else {
                scalar_ref(cfg, key) = parse_number(value);
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError(line_no, e.what());
        }
    }
    return cfg;
}

RunConfig parse_config_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_config(in);
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config file '" + path + "'");
    return parse_config(in);
}

std::string to_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& key : scalar_keys()) os << key << " = " << format_double(get_scalar(cfg, key)) << '\n';
    auto list = [&](const char* key, const std::vector<double>& values) {
        os << key << " = ";
        for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << format_double(values[i]);
        os << '\n';
    };
    list("gammas", cfg.gammas);
    list("probs", cfg.probs);
    os << "M = " << cfg.steps() << '\n';
    os << "seed = " << cfg.seed << '\n';
    return os.str();
}

const std::vector<std::string>& scalar_keys() {
    static const std::vector<std::string> keys{"eta1", "eta2",  "lambda1", "mu1",   "mu2", "r",  "xi",
                                               "kappa", "theta", "sigma",  "rho",   "v0",  "T",  "x0"};
    return keys;
}

bool is_scalar_key(std::string_view key) {
    for (const auto& k : scalar_keys())
        if (k == key) return true;
    return false;
}

double get_scalar(const RunConfig& cfg, std::string_view key) {
    return scalar_ref(const_cast<RunConfig&>(cfg), key);
}

void set_scalar(RunConfig& cfg, std::string_view key, double value) { scalar_ref(cfg, key) = value; }

}  // namespace eqreins
