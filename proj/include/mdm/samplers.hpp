#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mdm/ctmc.hpp"
#include "mdm/denoiser.hpp"
#include "mdm/rng.hpp"
#include "mdm/schedule.hpp"

namespace mdm {

enum class Strategy { Vanilla, TopK, TopKMargin, ReMDM, SelfCorrect };
enum class ScoreType { Current, Cumulated };
enum class RemaskRule { Deterministic, Stochastic };
enum class Criterion { Likelihood, TopKMargin, KL, Wasserstein };
enum class KernelRemaskMode { ScoreBased, IID, Both };
enum class TokenDraw { Argmax, Sample };
enum class WassersteinMetric { Discrete, Ordinal };

struct SamplerConfig {
    Strategy strategy = Strategy::Vanilla;
    int steps = 1;
    ScoreType score_type = ScoreType::Cumulated;
    RemaskRule rule = RemaskRule::Deterministic;
    Criterion criterion = Criterion::Likelihood;
    RemaskSchedule remask;
    KernelRemaskMode kernel_remask_mode = KernelRemaskMode::ScoreBased;
    bool reset_on_remask = true;
    TokenDraw token_draw = TokenDraw::Sample;
    // Per-step unmask counts for confidence decoding, first step first.
    // Empty = spread dims evenly over the steps.
    std::vector<int> unmask_budget;
    double stochastic_temperature = 1.0;
    bool accumulate_criterion = false;  // opt-in aggregation for non-likelihood criteria
    WassersteinMetric wasserstein_metric = WassersteinMetric::Discrete;

    void validate() const;
};

// Log-domain sentinel for a zero leave-one-out likelihood; always ordered
// below every finite score.
inline constexpr double kScoreSentinel = -1e300;

struct CorrectionState {
    std::vector<double> scores;                       // S^d, inert at masked positions
    std::optional<PositionDistributions> prev_dists;  // cached predictions, previous step
    std::vector<bool> generated;                      // position currently unmasked
};

// MaxProb: largest predicted probability. Margin: gap between the two
// largest (equals the largest when there is only one token).
double confidence_score(const Categorical& dist, bool margin);

// Remasking-priority update from leave-one-out likelihoods; only unmasked
// positions are touched.
void update_scores(CorrectionState& state, const Sequence& x, const Denoiser& denoiser,
                   ScoreType score_type);

// KL(prev || cur) with cur floored at 1e-12, or Wasserstein-1. Under the
// discrete ground metric W1 equals total variation; the ordinal variant
// treats tokens as points on the index line.
double criterion_distance(const Categorical& prev, const Categorical& cur, Criterion kind,
                          WassersteinMetric metric = WassersteinMetric::Discrete);

// Pick k positions to remask among `eligible` (unmasked position indices,
// ascending). Deterministic: the k lowest scores, ties by lowest index.
// Stochastic: sequential weighted draws without replacement, weights
// exp(-(S - max S) / temperature); sentinel scores are taken first.
std::vector<size_t> remask_select(const std::vector<double>& scores,
                                  const std::vector<size_t>& eligible, int k, RemaskRule rule,
                                  Rng& rng, double temperature = 1.0);

// One generalized reverse step with iid remasking probability sigma:
// unmasked coordinates remask with probability sigma, masked ones unmask
// with probability (alpha_s - (1-sigma) alpha_t) / (1 - alpha_t).
Sequence remdm_step(const Sequence& x_t, double alpha_t, double alpha_s, double sigma,
                    const Denoiser& denoiser, Rng& rng);

Sequence sample_vanilla(const SamplerConfig& config, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, int dims, Rng& rng);

Sequence sample_confidence(const SamplerConfig& config, const Denoiser& denoiser,
                           const NoiseSchedule& schedule, int dims, Rng& rng);

Sequence sample_remdm(const SamplerConfig& config, const Denoiser& denoiser,
                      const NoiseSchedule& schedule, int dims, Rng& rng);

Sequence self_correct_sample(const SamplerConfig& config, const Denoiser& denoiser,
                             const NoiseSchedule& schedule, int dims, Rng& rng);

// Dispatch on config.strategy.
Sequence run_sampler(const SamplerConfig& config, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, int dims, Rng& rng);

// Even split of `dims` unmask slots over `steps` steps (earlier steps get
// the remainder), used when no explicit budget is configured.
std::vector<int> default_budget(int dims, int steps);

std::string to_string(Strategy s);
std::string to_string(ScoreType s);
std::string to_string(RemaskRule r);
std::string to_string(Criterion c);
std::string to_string(KernelRemaskMode m);
std::string to_string(TokenDraw d);

}  // namespace mdm
