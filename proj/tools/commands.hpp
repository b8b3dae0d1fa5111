#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "eqreins/config.hpp"

namespace eqreins::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitBlowUp = 2;
inline constexpr int kExitAdmissibility = 3;

inline constexpr const char* kToolVersion = "1.0.0";

/// Entry point shared by the executable and the integration tests. `args`
/// excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

enum class Observable { QHat, PiHat, PiDiff };

Observable parse_observable(const std::string& name);
std::string to_string(Observable obs);

struct SweepSpec {
    std::string param;
    std::vector<double> values;
    Observable observable = Observable::QHat;
};

/// Long-format sweep table. Level mode: `param,value,t,<observable>`.
/// Difference mode: `param,value,base_value,t,pi_hat_diff` with
/// pi_hat(t; values[k+1]) - pi_hat(t; values[k]) for consecutive values.
/// Cells run on up to `threads` workers; rows are always written in
/// (parameter, t) order.
void write_sweep_csv(std::ostream& out, const RunConfig& base, const SweepSpec& spec, unsigned threads);

struct FigureSpec {
    std::string id;  // e.g. "fig31/T100/caseII"
    RunConfig config;
    SweepSpec sweep;
};

/// Every id accepted by `reproduce`.
std::vector<std::string> reproduce_ids();

/// Throws std::invalid_argument for an unknown id.
FigureSpec figure_spec(const std::string& id);

}  // namespace eqreins::cli
