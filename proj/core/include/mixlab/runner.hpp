#pragma once

#include "mixlab/io.hpp"

namespace mixlab {

/// Executes the configured command and writes its data files plus
/// manifest.json under cfg.out_dir. Returns the process exit code:
/// 0 ok, 1 internal numeric failure, 2 requested certificate failed,
/// 3 configuration error.
int run(const RunConfig& cfg);

/// Like run() but also hands back the manifest (for tests).
int run(const RunConfig& cfg, RunManifest& manifest_out);

} // namespace mixlab
