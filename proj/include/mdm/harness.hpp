#pragma once

#include <filesystem>
#include <string>

#include "mdm/config.hpp"
#include "mdm/diagnostics.hpp"

namespace mdm {

inline constexpr const char* kToolVersion = "mdm-correct 0.1.0";

struct HarnessOptions {
    std::filesystem::path out_dir;  // resolved output directory
    int threads = 0;                // 0 = all cores
};

// Resolve the output directory: CLI --out, then the config's out, then the
// MDM_CORRECT_OUT environment variable, then ./mdm_out.
std::filesystem::path resolve_out_dir(const ExperimentConfig& config, const std::string& cli_out);

// Executes the configured sampler for N replicas and writes samples.csv,
// summary.json and manifest.json. Output bytes depend only on (config, seed).
void run_experiment(const ExperimentConfig& config, const HarnessOptions& options);

// Expands the [sweep] axes into runs and writes one deterministic sweep.csv
// plus summary.json and manifest.json.
void run_sweep(const ExperimentConfig& config, const HarnessOptions& options);

enum class DiagnoseKind { Flip, Rank, Rates };

// flip/rank: the flipped-token study (CSV report + JSON summary).
// rates: ratio-form vs marginalized-form reverse-rate audit.
void run_diagnose(DiagnoseKind kind, const ExperimentConfig& config, const HarnessOptions& options);

// Write-to-temp, atomic rename.
void atomic_write(const std::filesystem::path& path, const std::string& contents);

}  // namespace mdm
