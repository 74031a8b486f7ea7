#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdm/denoiser.hpp"
#include "mdm/samplers.hpp"

namespace mdm {

// Exact or empirical distribution over mask-free sequences.
using Law = std::map<Sequence, double>;

struct EmpiricalDistribution {
    std::map<Sequence, uint64_t> counts;
    uint64_t total = 0;

    void add(const Sequence& x) {
        ++counts[x];
        ++total;
    }
    Law to_law() const;
};

// Half the L1 distance over the union of supports.
double tv_distance(const Law& p, const Law& q);
double tv_distance(const EmpiricalDistribution& p, const DataDistribution& q0);

Law law_of(const DataDistribution& q0);

// Bootstrap standard error of the empirical TV to q0 (multinomial resamples).
double bootstrap_tv_stderr(const EmpiricalDistribution& emp, const DataDistribution& q0,
                           int resamples, uint64_t seed);

struct SizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Brute-force oracle: propagates the exact state distribution through every
// step of the configured sampler and returns the exact output law.
//
// Supported: Vanilla, TopK/TopKMargin, ReMDM, and SelfCorrect whose per-step
// remask decision depends only on the current sequence (Current-score
// likelihood or non-accumulated Top-K-margin criteria; any configuration
// when the remask budget is identically zero). History-dependent scoring
// (Cumulated, KL/Wasserstein, accumulated criteria) has no finite
// sequence-level DP and is rejected.
Law exact_sampler_law(const SamplerConfig& config, const DataDistribution& q0,
                      const NoiseSchedule& schedule);

// Run N independent replica trajectories; replica i uses the stream seed
// derive_seed(master_seed, i). Deterministic in (config, master_seed, n)
// regardless of thread count.
std::vector<Sequence> collect_samples(const SamplerConfig& config, const Denoiser& denoiser,
                                      const NoiseSchedule& schedule, int dims,
                                      uint64_t master_seed, uint64_t n, int threads);

struct FlipReport {
    struct Step {
        double t = 0.0;
        double mean_correct = 0.0;
        double mean_flipped = 0.0;
        double rank_single = 0.0;  // mean rank of flipped tokens, 1 = most likely
        double rank_accum = 0.0;   // same, ranked by accumulated log-likelihood
        double gap_stderr = 0.0;   // stderr of (mean_correct - mean_flipped)
        uint64_t n = 0;
    };
    std::vector<Step> steps;
    uint64_t skipped = 0;  // samples with too few unmasked tokens at the first grid point
};

// Masking trajectories are coupled across the grid (each coordinate owns one
// uniform), so a token flipped at the first (largest-t) grid point stays
// unmasked and its scores can be accumulated downstream, mirroring a
// generation run. Samples with fewer than flip_count + 1 unmasked tokens at
// the first grid point are skipped and counted.
FlipReport flipped_token_experiment(const DataDistribution& q0, uint64_t n_samples,
                                    const std::vector<double>& t_grid, int flip_count,
                                    const NoiseSchedule& schedule, uint64_t seed);

void write_flip_report_csv(const FlipReport& report, std::ostream& out);

struct SweepRow {
    std::string label;
    int steps = 0;
    double tv = 0.0;
    double stderr_tv = 0.0;
};

// For each (config, T) pair: N trajectories, empirical TV to q0 with a
// bootstrap standard error.
std::vector<SweepRow> tv_vs_steps_sweep(const DataDistribution& q0,
                                        const std::vector<std::pair<std::string, SamplerConfig>>& configs,
                                        const std::vector<int>& t_list, uint64_t n,
                                        const NoiseSchedule& schedule, uint64_t master_seed,
                                        int threads);

}  // namespace mdm
