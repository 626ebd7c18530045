#pragma once

#include "mixlab/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mixlab {

/// Parsed experiment configuration. Sections map to the run stages; unknown
/// sections or keys are rejected so typos cannot silently corrupt runs.
struct RunConfig {
    // [run]
    std::string command;
    std::uint64_t seed = 0;
    bool seed_set = false;  // no wall-clock default; seed must be given
    std::string out_dir = ".";
    int threads = 1;

    // [system] / [kernel]: catalog name plus free numeric parameters
    std::string system_name = "kicked_linear_1d";
    std::map<std::string, double> system_params;
    std::string kernel_name = "ar1_truncgauss";
    std::map<std::string, double> kernel_params;

    // [noise]
    bool stationary = false;
    int memory_m = 16;
    double iota = 2.0;

    // [grid]
    int cells = 256;
    int noise_cells = 64;
    int product_cells = 40;

    // [mixing]
    int ensemble = 100000;
    int horizon = 30;
    int burn_in = 64;
    std::vector<double> u0;  // empty = boundary of X (first corner)

    // [reduce]
    int law_horizon = 2;
    int law_ensemble = 100000;
    int law_cells = 40;
    bool mutate = false;

    // [certify]
    double radius = 1.0;
    double delta = 0.2;
    int budget = 8;
    int pairs = 50;
    int mc_trials = 100000;
    int mc_probes = 20;
    int mc_samples = 1000000;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Round-trip serialization (manifest config echo re-parses to an equivalent
/// RunConfig).
std::string config_to_text(const RunConfig& cfg);

} // namespace mixlab
