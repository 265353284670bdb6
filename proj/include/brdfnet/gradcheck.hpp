#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace brdfnet {

struct GradCheckResult {
    std::string name;
    double error = 0.0;
    double tolerance = 0.0;

    bool pass() const { return error < tolerance; }
};

/// Central-difference checks (64-bit) of every layer, both networks end to end through
/// the training loss, and the three loss functions with E_c.
std::vector<GradCheckResult> run_gradchecks(std::uint64_t seed = 0);

}  // namespace brdfnet
