#include "mdm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mdm {

void SamplerConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("SamplerConfig: steps must be >= 1");
    if ((strategy == Strategy::TopK || strategy == Strategy::TopKMargin) && !unmask_budget.empty()) {
        if (static_cast<int>(unmask_budget.size()) != steps)
            throw std::invalid_argument("SamplerConfig: unmask_budget length must equal steps");
        for (int b : unmask_budget)
            if (b < 0) throw std::invalid_argument("SamplerConfig: negative unmask budget");
    }
    if (stochastic_temperature <= 0.0)
        throw std::invalid_argument("SamplerConfig: stochastic_temperature must be > 0");
}

std::vector<int> default_budget(int dims, int steps) {
    std::vector<int> budget(static_cast<size_t>(steps), dims / steps);
    for (int i = 0; i < dims % steps; ++i) ++budget[static_cast<size_t>(i)];
    return budget;
}

double confidence_score(const Categorical& dist, bool margin) {
    double best = 0.0, second = 0.0;
    for (double p : dist.probs) {
        if (p > best) {
            second = best;
            best = p;
        } else if (p > second) {
            second = p;
        }
    }
    if (!margin) return best;
    return dist.size() <= 1 ? best : best - second;
}

void update_scores(CorrectionState& state, const Sequence& x, const Denoiser& denoiser,
                   ScoreType score_type) {
    const StateSpace& space = denoiser.space();
    for (size_t d = 0; d < x.size(); ++d) {
        if (x[d] == space.mask_id()) continue;
        const double ell = denoiser.leave_one_out(x, d);
        if (score_type == ScoreType::Current) {
            // An impossible token gets the sentinel so both remask rules
            // take it first.
            state.scores[d] = ell > 0.0 ? ell : kScoreSentinel;
        } else if (ell <= 0.0 || state.scores[d] <= kScoreSentinel / 2) {
            state.scores[d] = kScoreSentinel;
        } else {
            state.scores[d] += std::log(ell);
        }
    }
}

double criterion_distance(const Categorical& prev, const Categorical& cur, Criterion kind,
                          WassersteinMetric metric) {
    if (prev.size() != cur.size())
        throw std::invalid_argument("criterion_distance: vocabulary mismatch");
    if (kind == Criterion::KL) {
        double kl = 0.0;
        for (size_t v = 0; v < prev.size(); ++v) {
            if (prev[v] <= 0.0) continue;
            kl += prev[v] * std::log(prev[v] / std::max(cur[v], 1e-12));
        }
        return std::max(kl, 0.0);
    }
    if (kind != Criterion::Wasserstein)
        throw std::invalid_argument("criterion_distance: kind must be KL or Wasserstein");
    if (metric == WassersteinMetric::Discrete) {
        double tv = 0.0;
        for (size_t v = 0; v < prev.size(); ++v) tv += std::abs(prev[v] - cur[v]);
        return 0.5 * tv;
    }
    double w1 = 0.0, cdf_diff = 0.0;
    for (size_t v = 0; v + 1 < prev.size(); ++v) {
        cdf_diff += prev[v] - cur[v];
        w1 += std::abs(cdf_diff);
    }
    return w1;
}

std::vector<size_t> remask_select(const std::vector<double>& scores,
                                  const std::vector<size_t>& eligible, int k, RemaskRule rule,
                                  Rng& rng, double temperature) {
    k = std::min<int>(k, static_cast<int>(eligible.size()));
    if (k <= 0) return {};

    if (rule == RemaskRule::Deterministic) {
        std::vector<size_t> order = eligible;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (scores[a] != scores[b]) return scores[a] < scores[b];
            return a < b;
        });
        order.resize(static_cast<size_t>(k));
        return order;
    }

    std::vector<size_t> pool = eligible;
    std::vector<size_t> selected;
    // Sentinel (zero-likelihood) positions are taken first, lowest index first.
    for (auto it = pool.begin(); it != pool.end() && static_cast<int>(selected.size()) < k;) {
        if (scores[*it] <= kScoreSentinel / 2) {
            selected.push_back(*it);
            it = pool.erase(it);
        } else {
            ++it;
        }
    }
    while (static_cast<int>(selected.size()) < k) {
        double max_score = scores[pool.front()];
        for (size_t d : pool) max_score = std::max(max_score, scores[d]);
        std::vector<double> weights(pool.size());
        for (size_t i = 0; i < pool.size(); ++i)
            weights[i] = std::exp(-(scores[pool[i]] - max_score) / temperature);
        const int pick = rng.categorical(weights);
        selected.push_back(pool[static_cast<size_t>(pick)]);
        pool.erase(pool.begin() + pick);
    }
    return selected;
}

Sequence remdm_step(const Sequence& x_t, double alpha_t, double alpha_s, double sigma,
                    const Denoiser& denoiser, Rng& rng) {
    const StateSpace& space = denoiser.space();
    if (sigma < 0.0 || sigma > 1.0 || 1.0 - alpha_s - sigma * alpha_t < -1e-12)
        throw std::invalid_argument("remdm_step: sigma outside the valid clamp range");
    const double p_unmask =
        std::clamp((alpha_s - (1.0 - sigma) * alpha_t) / (1.0 - alpha_t), 0.0, 1.0);

    Sequence x = x_t;
    const bool any_masked = masked_count(x_t, space) > 0;
    PositionDistributions predicted;
    if (any_masked) predicted = denoiser.predict(x_t);

    for (size_t d = 0; d < x.size(); ++d) {
        if (x_t[d] == space.mask_id()) {
            if (rng.uniform() < p_unmask)
                x[d] = static_cast<Token>(rng.categorical(predicted[d].probs));
        } else if (sigma > 0.0) {
            if (rng.uniform() < sigma) x[d] = space.mask_id();
        }
    }
    return x;
}

namespace {

void force_unmask(Sequence& x, const Denoiser& denoiser) {
    const StateSpace& space = denoiser.space();
    if (masked_count(x, space) == 0) return;
    const PositionDistributions predicted = denoiser.predict(x);
    for (size_t d = 0; d < x.size(); ++d)
        if (x[d] == space.mask_id()) x[d] = static_cast<Token>(predicted[d].argmax());
}

}  // namespace

Sequence sample_vanilla(const SamplerConfig& config, const Denoiser& denoiser,
                        const NoiseSchedule& schedule, int dims, Rng& rng) {
    const StateSpace& space = denoiser.space();
    Sequence x(static_cast<size_t>(dims), space.mask_id());
    const int T = config.steps;
    for (int i = T; i >= 1; --i) {
        const double t = static_cast<double>(i) / T;
        const double s = static_cast<double>(i - 1) / T;
        x = tau_leaping_step(x, t, s, schedule, denoiser, rng);
    }
    force_unmask(x, denoiser);
    return x;
}

Sequence sample_confidence(const SamplerConfig& config, const Denoiser& denoiser,
                           const NoiseSchedule& schedule, int dims, Rng& rng) {
    (void)schedule;  // confidence decoding is driven by the budget, not alpha
    const StateSpace& space = denoiser.space();
    const bool margin = config.strategy == Strategy::TopKMargin;
    std::vector<int> budget =
        config.unmask_budget.empty() ? default_budget(dims, config.steps) : config.unmask_budget;
    if (std::accumulate(budget.begin(), budget.end(), 0) != dims)
        throw std::invalid_argument("sample_confidence: unmask budget must sum to dims");

    Sequence x(static_cast<size_t>(dims), space.mask_id());
    for (int step = 0; step < config.steps; ++step) {
        std::vector<size_t> masked;
        for (size_t d = 0; d < x.size(); ++d)
            if (x[d] == space.mask_id()) masked.push_back(d);
        if (masked.empty()) break;

        const int b = std::min<int>(budget[static_cast<size_t>(step)],
                                    static_cast<int>(masked.size()));
        if (b == 0) continue;
        const PositionDistributions predicted = denoiser.predict(x);

        // Highest confidence first, ties by lowest position index.
        std::stable_sort(masked.begin(), masked.end(), [&](size_t a, size_t b2) {
            const double sa = confidence_score(predicted[a], margin);
            const double sb = confidence_score(predicted[b2], margin);
            if (sa != sb) return sa > sb;
            return a < b2;
        });
        masked.resize(static_cast<size_t>(b));
        std::sort(masked.begin(), masked.end());
        for (size_t d : masked) {
            if (config.token_draw == TokenDraw::Argmax)
                x[d] = static_cast<Token>(predicted[d].argmax());
            else
                x[d] = static_cast<Token>(rng.categorical(predicted[d].probs));
        }
    }
    force_unmask(x, denoiser);
    return x;
}

Sequence sample_remdm(const SamplerConfig& config, const Denoiser& denoiser,
                      const NoiseSchedule& schedule, int dims, Rng& rng) {
    const StateSpace& space = denoiser.space();
    Sequence x(static_cast<size_t>(dims), space.mask_id());
    const int T = config.steps;
    for (int i = T; i >= 1; --i) {
        const double t = static_cast<double>(i) / T;
        const double s = static_cast<double>(i - 1) / T;
        const AlphaValue at = schedule.eval(t);
        const AlphaValue as = schedule.eval(s);
        const double sigma = eval_sigma(config.remask, T - i + 1, T, at.alpha, as.alpha).sigma;
        x = remdm_step(x, at.alpha, as.alpha, sigma, denoiser, rng);
    }
    force_unmask(x, denoiser);
    return x;
}

Sequence self_correct_sample(const SamplerConfig& config, const Denoiser& denoiser,
                             const NoiseSchedule& schedule, int dims, Rng& rng) {
    const StateSpace& space = denoiser.space();
    const int T = config.steps;
    Sequence x(static_cast<size_t>(dims), space.mask_id());
    CorrectionState state;
    state.scores.assign(static_cast<size_t>(dims), 0.0);
    state.generated.assign(static_cast<size_t>(dims), false);

    for (int i = T; i >= 1; --i) {
        const double t = static_cast<double>(i) / T;
        const double s = static_cast<double>(i - 1) / T;
        const AlphaValue at = schedule.eval(t);
        const AlphaValue as = schedule.eval(s);
        const double sigma = eval_sigma(config.remask, T - i + 1, T, at.alpha, as.alpha).sigma;

        // (1) reverse update. Masked coordinates use the generalized kernel's
        // unmask probability; the iid remask branch runs only in IID/Both
        // mode (ScoreBased delegates all remasking to step 3).
        std::vector<bool> was_unmasked(static_cast<size_t>(dims));
        for (size_t d = 0; d < x.size(); ++d) was_unmasked[d] = x[d] != space.mask_id();

        if (masked_count(x, space) > 0) {
            const double p_unmask =
                std::clamp((as.alpha - (1.0 - sigma) * at.alpha) / (1.0 - at.alpha), 0.0, 1.0);
            const PositionDistributions predicted = denoiser.predict(x);
            partial_unmask_step(x, p_unmask, predicted, space, rng);
        }
        if (sigma > 0.0 && (config.kernel_remask_mode == KernelRemaskMode::IID ||
                            config.kernel_remask_mode == KernelRemaskMode::Both)) {
            for (size_t d = 0; d < x.size(); ++d) {
                if (!was_unmasked[d]) continue;
                if (rng.uniform() < sigma) {
                    x[d] = space.mask_id();
                    if (config.reset_on_remask) state.scores[d] = 0.0;
                }
            }
        }

        std::vector<size_t> eligible;
        for (size_t d = 0; d < x.size(); ++d)
            if (x[d] != space.mask_id()) eligible.push_back(d);

        // (2) likelihood / distance re-evaluation on the updated state.
        if (!eligible.empty()) {
            if (config.criterion == Criterion::Likelihood) {
                update_scores(state, x, denoiser, config.score_type);
            } else {
                const PositionDistributions current = denoiser.predict(x);
                for (size_t d : eligible) {
                    double value;
                    if (config.criterion == Criterion::TopKMargin) {
                        value = confidence_score(current[d], /*margin=*/true);
                    } else {
                        const bool fresh = !was_unmasked[d] || !state.prev_dists.has_value();
                        // A just-generated token has no previous distribution;
                        // its first-step distance is 0 (fully confident).
                        const double dist =
                            fresh ? 0.0
                                  : criterion_distance((*state.prev_dists)[d], current[d],
                                                       config.criterion,
                                                       config.wasserstein_metric);
                        value = -dist;  // larger distance = less confident
                    }
                    if (config.accumulate_criterion) {
                        if (config.criterion == Criterion::TopKMargin) {
                            if (value <= 0.0 || state.scores[d] <= kScoreSentinel / 2)
                                state.scores[d] = kScoreSentinel;
                            else
                                state.scores[d] += std::log(value);
                        } else {
                            state.scores[d] += value;
                        }
                    } else {
                        state.scores[d] = value;
                    }
                }
                state.prev_dists = current;
            }
        }

        // (3) remask the K_t = floor(sigma * D) lowest-priority positions.
        const int k = std::min<int>(static_cast<int>(sigma * dims),
                                    static_cast<int>(eligible.size()));
        if (k > 0) {
            const std::vector<size_t> selected = remask_select(
                state.scores, eligible, k, config.rule, rng, config.stochastic_temperature);
            for (size_t d : selected) {
                x[d] = space.mask_id();
                if (config.reset_on_remask) state.scores[d] = 0.0;
            }
        }
        for (size_t d = 0; d < x.size(); ++d) state.generated[d] = x[d] != space.mask_id();
    }
    force_unmask(x, denoiser);
    return x;
}

Sequence run_sampler(const SamplerConfig& config, const Denoiser& denoiser,
                     const NoiseSchedule& schedule, int dims, Rng& rng) {
    config.validate();
    switch (config.strategy) {
        case Strategy::Vanilla: return sample_vanilla(config, denoiser, schedule, dims, rng);
        case Strategy::TopK:
        case Strategy::TopKMargin: return sample_confidence(config, denoiser, schedule, dims, rng);
        case Strategy::ReMDM: return sample_remdm(config, denoiser, schedule, dims, rng);
        case Strategy::SelfCorrect: return self_correct_sample(config, denoiser, schedule, dims, rng);
    }
    throw std::logic_error("run_sampler: unknown strategy");
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Vanilla: return "vanilla";
        case Strategy::TopK: return "top_k";
        case Strategy::TopKMargin: return "top_k_margin";
        case Strategy::ReMDM: return "remdm";
        case Strategy::SelfCorrect: return "self_correct";
    }
    return "?";
}
std::string to_string(ScoreType s) { return s == ScoreType::Current ? "current" : "cumulated"; }
std::string to_string(RemaskRule r) {
    return r == RemaskRule::Deterministic ? "deterministic" : "stochastic";
}
std::string to_string(Criterion c) {
    switch (c) {
        case Criterion::Likelihood: return "likelihood";
        case Criterion::TopKMargin: return "top_k_margin";
        case Criterion::KL: return "kl";
        case Criterion::Wasserstein: return "wasserstein";
    }
    return "?";
}
std::string to_string(KernelRemaskMode m) {
    switch (m) {
        case KernelRemaskMode::ScoreBased: return "score_based";
        case KernelRemaskMode::IID: return "iid";
        case KernelRemaskMode::Both: return "both";
    }
    return "?";
}
std::string to_string(TokenDraw d) { return d == TokenDraw::Argmax ? "argmax" : "sample"; }

}  // namespace mdm
