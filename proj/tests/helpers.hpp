#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "eqreins/model.hpp"

namespace eqreins::test {

inline ValidatedModel reference_model(AversionDistribution dist, double T = 10.0, std::size_t M = 10000,
                                   const ValidationOptions& opts = {}) {
    return validate_config(reference_insurance(), reference_heston(), std::move(dist), Horizon{T, M, 1.0}, opts);
}

inline AversionDistribution single_atom(double gamma) { return AversionDistribution{{{gamma, 1.0}}}; }

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* root = std::getenv("EQREINS_TEST_TMP");
    auto dir = std::filesystem::path(root ? root : "tmp") / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace eqreins::test
