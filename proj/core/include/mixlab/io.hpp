#pragma once

#include "mixlab/config.hpp"
#include "mixlab/mixing.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mixlab {

inline constexpr const char* kVersion = "0.1.0";

/// Log level from MIXLAB_LOG (0 = silent, 1 = info, 2 = debug). Read once.
int log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

/// FNV-1a over the raw bytes.
std::uint64_t fnv1a(const std::string& data);
std::uint64_t fnv1a_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

struct StageTiming {
    std::string name;
    double millis = 0.0;
};

struct OutputFile {
    std::string name;            // relative to the output directory
    std::uint64_t checksum = 0;  // FNV-1a of the bytes written
};

/// Everything a run leaves behind besides the data files: the config echo,
/// version, timings, verdicts, and a checksummed file inventory.
struct RunManifest {
    RunConfig config;
    std::string version = kVersion;
    int exit_code = 0;
    std::vector<StageTiming> timings;
    std::vector<std::pair<std::string, std::string>> verdicts;
    std::vector<OutputFile> files;

    std::string to_json() const;
};

/// Writes `content` under the run's output directory and records it in the
/// manifest inventory with its checksum.
void emit_file(RunManifest& manifest, const std::string& out_dir, const std::string& name,
               const std::string& content);

/// Two-column plot data for the decay curve: k vs tv and k vs the fitted
/// exponential, as separate files registered in the manifest.
void emit_plotdata(RunManifest& manifest, const std::string& out_dir,
                   const DecayCurve& curve, const RateFit& fit);

} // namespace mixlab
