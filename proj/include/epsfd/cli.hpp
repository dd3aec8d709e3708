#pragma once

// Command-line front end: synth, ingest, train, eval, grid, sample, report.
// Factored as a library entry point so the test suite can drive commands
// in-process. Exit codes: 0 success, 1 runtime failure, 2 configuration or
// usage error.

#include <string>
#include <vector>

namespace epsfd::cli {

inline constexpr const char* artifact_version = "epsfd 0.1.0";

int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

// FNV-1a 64 over a file's bytes; used by run manifests.
std::string file_hash(const std::string& path);

}  // namespace epsfd::cli
