#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdm/samplers.hpp"
#include "mdm/target.hpp"

namespace mdm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TargetKind { AllEqual, Parity, ProductUniform, MarkovChain, Table };

struct TargetSpec {
    TargetKind kind = TargetKind::AllEqual;
    int dims = 2;
    int vocab = 2;
    double stay_prob = 0.8;  // markov_chain
    std::string table_path;  // table

    DataDistribution build() const;
};

struct SweepSpec {
    std::vector<int> steps_list;
    std::vector<Strategy> strategies;
    std::vector<ScoreType> score_types;
    std::vector<RemaskRule> rules;
    std::vector<Criterion> criteria;
};

struct DiagnoseSpec {
    std::vector<double> t_grid = {0.75, 0.6, 0.45, 0.3, 0.15};
    uint64_t n_samples = 2000;
    int flip_count = 1;
};

// Declarative experiment description. The text format is flat INI-style:
// [section] headers, "key = value" lines, '#' comments. Unknown sections or
// keys are rejected with the offending line number.
struct ExperimentConfig {
    TargetSpec target;
    ScheduleKind schedule = ScheduleKind::Linear;
    SamplerConfig sampler;
    uint64_t seed = 0;
    uint64_t replicas = 1000;
    std::string out_dir;
    std::optional<SweepSpec> sweep;
    std::optional<DiagnoseSpec> diagnose;

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig parse_file(const std::string& path);
    std::string serialize() const;

    // FNV-1a of the canonical serialization, as fixed-width hex.
    std::string hash() const;
};

std::string to_string(TargetKind k);

}  // namespace mdm
