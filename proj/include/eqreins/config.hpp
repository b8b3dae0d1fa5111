#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eqreins/model.hpp"

namespace eqreins {

/// Malformed configuration text. line() is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raw, unvalidated run inputs. Keys missing from a config file keep the
/// reference-table defaults (case I aversion, T = 10, step 1e-3).
struct RunConfig {
    InsuranceParams insurance = reference_insurance();
    HestonParams heston = reference_heston();
    std::vector<double> gammas{0.5, 4.0};
    std::vector<double> probs{0.5, 0.5};
    double T = 10.0;
    std::optional<std::size_t> M;  // defaults to round(T / 1e-3)
    double x0 = 1.0;
    std::uint64_t seed = 20240917;

    std::size_t steps() const;
    AversionDistribution distribution() const;
    Horizon horizon() const;
    ValidatedModel validate(const ValidationOptions& opts = {}) const;

    bool operator==(const RunConfig&) const = default;
};

/// Decimal literal or a ratio "p/q" of two decimals.
double parse_number(std::string_view text);
std::vector<double> parse_number_list(std::string_view text);

RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(std::string_view text);
RunConfig load_config_file(const std::string& path);

/// Canonical `key = value` rendering with 17 significant digits. M is always
/// written out, so parsing the text back describes exactly the same run.
std::string to_config_text(const RunConfig& cfg);

/// Scalar keys that sweeps may vary.
const std::vector<std::string>& scalar_keys();
bool is_scalar_key(std::string_view key);
double get_scalar(const RunConfig& cfg, std::string_view key);
void set_scalar(RunConfig& cfg, std::string_view key, double value);

}  // namespace eqreins
