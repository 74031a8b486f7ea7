#include "mdm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <thread>

namespace mdm {

Law EmpiricalDistribution::to_law() const {
    Law law;
    if (total == 0) return law;
    for (const auto& [x, c] : counts) law[x] = static_cast<double>(c) / static_cast<double>(total);
    return law;
}

double tv_distance(const Law& p, const Law& q) {
    double sum = 0.0;
    auto ip = p.begin();
    auto iq = q.begin();
    while (ip != p.end() || iq != q.end()) {
        if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
            sum += std::abs(ip->second);
            ++ip;
        } else if (ip == p.end() || iq->first < ip->first) {
            sum += std::abs(iq->second);
            ++iq;
        } else {
            sum += std::abs(ip->second - iq->second);
            ++ip;
            ++iq;
        }
    }
    return 0.5 * sum;
}

Law law_of(const DataDistribution& q0) {
    Law law;
    for (size_t j = 0; j < q0.support_size(); ++j) law[q0.support()[j]] = q0.probs()[j];
    return law;
}

double tv_distance(const EmpiricalDistribution& p, const DataDistribution& q0) {
    return tv_distance(p.to_law(), law_of(q0));
}

double bootstrap_tv_stderr(const EmpiricalDistribution& emp, const DataDistribution& q0,
                           int resamples, uint64_t seed) {
    if (emp.total == 0 || resamples < 2) return 0.0;
    std::vector<Sequence> keys;
    std::vector<double> probs;
    keys.reserve(emp.counts.size());
    for (const auto& [x, c] : emp.counts) {
        keys.push_back(x);
        probs.push_back(static_cast<double>(c) / static_cast<double>(emp.total));
    }
    const Law target = law_of(q0);
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    const uint64_t n = emp.total;
    for (int r = 0; r < resamples; ++r) {
        // Multinomial resample via binomial chain.
        std::vector<uint64_t> counts(keys.size(), 0);
        for (uint64_t i = 0; i < n; ++i) ++counts[static_cast<size_t>(rng.categorical(probs))];
        Law law;
        for (size_t k = 0; k < keys.size(); ++k)
            if (counts[k] > 0) law[keys[k]] = static_cast<double>(counts[k]) / static_cast<double>(n);
        const double tv = tv_distance(law, target);
        sum += tv;
        sumsq += tv * tv;
    }
    const double mean = sum / resamples;
    const double var = std::max(0.0, sumsq / resamples - mean * mean);
    return std::sqrt(var * resamples / (resamples - 1));
}

// ---------------------------------------------------------------------------
// Exact DP oracle
// ---------------------------------------------------------------------------

namespace {

using Options = std::vector<std::pair<Token, double>>;  // per-coordinate outcomes

void expand_product(const std::vector<Options>& options, size_t d, double w, Sequence& cur,
                    Law& out) {
    if (w <= 0.0) return;
    if (d == options.size()) {
        out[cur] += w;
        return;
    }
    for (const auto& [tok, p] : options[d]) {
        if (p <= 0.0) continue;
        cur[d] = tok;
        expand_product(options, d + 1, w * p, cur, out);
    }
}

Law product_step(const Law& law, const std::function<std::vector<Options>(const Sequence&)>& rowfn) {
    Law out;
    Sequence cur;
    for (const auto& [x, w] : law) {
        if (w <= 0.0) continue;
        const std::vector<Options> options = rowfn(x);
        cur = x;
        expand_product(options, 0, w, cur, out);
    }
    return out;
}

std::vector<size_t> unmasked_positions(const Sequence& x, const StateSpace& space) {
    std::vector<size_t> out;
    for (size_t d = 0; d < x.size(); ++d)
        if (x[d] != space.mask_id()) out.push_back(d);
    return out;
}

// Law of the sampler's remask-set selection, mirroring remask_select exactly
// (sentinel-first, then sequential weighted draws without replacement).
void enumerate_selections(const std::vector<double>& scores, std::vector<size_t> pool,
                          std::vector<size_t> selected, int k, double prob, double temperature,
                          const std::function<void(const std::vector<size_t>&, double)>& emit) {
    while (static_cast<int>(selected.size()) < k) {
        bool took_sentinel = false;
        for (auto it = pool.begin(); it != pool.end(); ++it) {
            if (scores[*it] <= kScoreSentinel / 2) {
                selected.push_back(*it);
                pool.erase(it);
                took_sentinel = true;
                break;
            }
        }
        if (!took_sentinel) break;
    }
    if (static_cast<int>(selected.size()) == k) {
        emit(selected, prob);
        return;
    }
    double max_score = scores[pool.front()];
    for (size_t d : pool) max_score = std::max(max_score, scores[d]);
    double total = 0.0;
    std::vector<double> weights(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) {
        weights[i] = std::exp(-(scores[pool[i]] - max_score) / temperature);
        total += weights[i];
    }
    for (size_t i = 0; i < pool.size(); ++i) {
        std::vector<size_t> next_pool = pool;
        next_pool.erase(next_pool.begin() + static_cast<long>(i));
        std::vector<size_t> next_sel = selected;
        next_sel.push_back(pool[i]);
        enumerate_selections(scores, std::move(next_pool), std::move(next_sel), k,
                             prob * weights[i] / total, temperature, emit);
    }
}

}  // namespace

Law exact_sampler_law(const SamplerConfig& config, const DataDistribution& q0,
                      const NoiseSchedule& schedule) {
    config.validate();
    const StateSpace& space = q0.space();
    const int D = q0.dims();
    const int V = space.vocab_size;
    double states = std::pow(static_cast<double>(V + 1), D);
    if (states > 20000.0)
        throw SizeError("exact_sampler_law: state space exceeds the desk-scale cap");

    const OracleDenoiser denoiser{q0};
    const int T = config.steps;

    // Detect whether remasking can ever fire; history-dependent scoring is
    // only rejected when it would actually influence the law.
    bool remask_possible = false;
    std::vector<double> sigmas(static_cast<size_t>(T) + 1, 0.0);
    if (config.strategy == Strategy::SelfCorrect || config.strategy == Strategy::ReMDM) {
        for (int i = T; i >= 1; --i) {
            const double at = schedule.alpha(static_cast<double>(i) / T);
            const double as = schedule.alpha(static_cast<double>(i - 1) / T);
            sigmas[static_cast<size_t>(i)] = eval_sigma(config.remask, T - i + 1, T, at, as).sigma;
            if (static_cast<int>(sigmas[static_cast<size_t>(i)] * D) > 0) remask_possible = true;
        }
    }
    if (config.strategy == Strategy::SelfCorrect && remask_possible) {
        const bool history =
            (config.criterion == Criterion::Likelihood && config.score_type == ScoreType::Cumulated) ||
            config.criterion == Criterion::KL || config.criterion == Criterion::Wasserstein ||
            config.accumulate_criterion;
        if (history)
            throw std::invalid_argument(
                "exact_sampler_law: history-dependent scores have no sequence-level DP");
    }

    Law law;
    law[Sequence(static_cast<size_t>(D), space.mask_id())] = 1.0;

    std::vector<int> budget;
    if (config.strategy == Strategy::TopK || config.strategy == Strategy::TopKMargin)
        budget = config.unmask_budget.empty() ? default_budget(D, T) : config.unmask_budget;

    for (int i = T; i >= 1; --i) {
        const double alpha_t = schedule.alpha(static_cast<double>(i) / T);
        const double alpha_s = schedule.alpha(static_cast<double>(i - 1) / T);
        const double sigma = sigmas[static_cast<size_t>(i)];

        switch (config.strategy) {
            case Strategy::Vanilla: {
                const double p = (alpha_s - alpha_t) / (1.0 - alpha_t);
                law = product_step(law, [&](const Sequence& x) {
                    std::vector<Options> options(x.size());
                    PositionDistributions pred;
                    bool have_pred = false;
                    for (size_t d = 0; d < x.size(); ++d) {
                        if (x[d] != space.mask_id()) {
                            options[d] = {{x[d], 1.0}};
                            continue;
                        }
                        if (!have_pred) {
                            pred = denoiser.predict(x);
                            have_pred = true;
                        }
                        options[d].emplace_back(space.mask_id(), 1.0 - p);
                        for (int v = 0; v < V; ++v)
                            options[d].emplace_back(static_cast<Token>(v),
                                                    p * pred[d][static_cast<size_t>(v)]);
                    }
                    return options;
                });
                break;
            }
            case Strategy::ReMDM: {
                const double p =
                    std::clamp((alpha_s - (1.0 - sigma) * alpha_t) / (1.0 - alpha_t), 0.0, 1.0);
                law = product_step(law, [&](const Sequence& x) {
                    std::vector<Options> options(x.size());
                    PositionDistributions pred;
                    bool have_pred = false;
                    for (size_t d = 0; d < x.size(); ++d) {
                        if (x[d] != space.mask_id()) {
                            options[d] = {{x[d], 1.0 - sigma}, {space.mask_id(), sigma}};
                            continue;
                        }
                        if (!have_pred) {
                            pred = denoiser.predict(x);
                            have_pred = true;
                        }
                        options[d].emplace_back(space.mask_id(), 1.0 - p);
                        for (int v = 0; v < V; ++v)
                            options[d].emplace_back(static_cast<Token>(v),
                                                    p * pred[d][static_cast<size_t>(v)]);
                    }
                    return options;
                });
                break;
            }
            case Strategy::TopK:
            case Strategy::TopKMargin: {
                const bool margin = config.strategy == Strategy::TopKMargin;
                const int step_budget = budget[static_cast<size_t>(T - i)];
                Law out;
                Sequence cur;
                for (const auto& [x, w] : law) {
                    if (w <= 0.0) continue;
                    std::vector<size_t> masked;
                    for (size_t d = 0; d < x.size(); ++d)
                        if (x[d] == space.mask_id()) masked.push_back(d);
                    const int b = std::min<int>(step_budget, static_cast<int>(masked.size()));
                    if (b == 0) {
                        out[x] += w;
                        continue;
                    }
                    const PositionDistributions pred = denoiser.predict(x);
                    std::stable_sort(masked.begin(), masked.end(), [&](size_t a, size_t b2) {
                        const double sa = confidence_score(pred[a], margin);
                        const double sb = confidence_score(pred[b2], margin);
                        if (sa != sb) return sa > sb;
                        return a < b2;
                    });
                    masked.resize(static_cast<size_t>(b));
                    std::vector<Options> options(x.size());
                    for (size_t d = 0; d < x.size(); ++d) options[d] = {{x[d], 1.0}};
                    for (size_t d : masked) {
                        if (config.token_draw == TokenDraw::Argmax) {
                            options[d] = {{static_cast<Token>(pred[d].argmax()), 1.0}};
                        } else {
                            options[d].clear();
                            for (int v = 0; v < V; ++v)
                                options[d].emplace_back(static_cast<Token>(v),
                                                        pred[d][static_cast<size_t>(v)]);
                        }
                    }
                    cur = x;
                    expand_product(options, 0, w, cur, out);
                }
                law = std::move(out);
                break;
            }
            case Strategy::SelfCorrect: {
                // Phase 1: generalized kernel (iid branch only in IID/Both mode).
                const double p =
                    std::clamp((alpha_s - (1.0 - sigma) * alpha_t) / (1.0 - alpha_t), 0.0, 1.0);
                const bool iid = sigma > 0.0 && (config.kernel_remask_mode == KernelRemaskMode::IID ||
                                                 config.kernel_remask_mode == KernelRemaskMode::Both);
                law = product_step(law, [&](const Sequence& x) {
                    std::vector<Options> options(x.size());
                    PositionDistributions pred;
                    bool have_pred = false;
                    for (size_t d = 0; d < x.size(); ++d) {
                        if (x[d] != space.mask_id()) {
                            if (iid)
                                options[d] = {{x[d], 1.0 - sigma}, {space.mask_id(), sigma}};
                            else
                                options[d] = {{x[d], 1.0}};
                            continue;
                        }
                        if (!have_pred) {
                            pred = denoiser.predict(x);
                            have_pred = true;
                        }
                        options[d].emplace_back(space.mask_id(), 1.0 - p);
                        for (int v = 0; v < V; ++v)
                            options[d].emplace_back(static_cast<Token>(v),
                                                    p * pred[d][static_cast<size_t>(v)]);
                    }
                    return options;
                });

                // Phases 2 + 3: state-local scoring and remask selection.
                const int k_raw = static_cast<int>(sigma * D);
                if (k_raw > 0) {
                    Law out;
                    for (const auto& [x, w] : law) {
                        if (w <= 0.0) continue;
                        const std::vector<size_t> eligible = unmasked_positions(x, space);
                        const int k = std::min<int>(k_raw, static_cast<int>(eligible.size()));
                        if (k == 0) {
                            out[x] += w;
                            continue;
                        }
                        std::vector<double> scores(x.size(), 0.0);
                        if (config.criterion == Criterion::Likelihood) {
                            for (size_t d : eligible) {
                                const double ell = denoiser.leave_one_out(x, d);
                                scores[d] = ell > 0.0 ? ell : 0.0;
                                if (ell <= 0.0) scores[d] = kScoreSentinel;
                            }
                        } else {  // TopKMargin (validated above)
                            const PositionDistributions pred = denoiser.predict(x);
                            for (size_t d : eligible)
                                scores[d] = confidence_score(pred[d], /*margin=*/true);
                        }
                        auto apply = [&](const std::vector<size_t>& selected, double prob) {
                            Sequence y = x;
                            for (size_t d : selected) y[d] = space.mask_id();
                            out[y] += w * prob;
                        };
                        if (config.rule == RemaskRule::Deterministic) {
                            std::vector<size_t> order = eligible;
                            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                                if (scores[a] != scores[b]) return scores[a] < scores[b];
                                return a < b;
                            });
                            order.resize(static_cast<size_t>(k));
                            apply(order, 1.0);
                        } else {
                            enumerate_selections(scores, eligible, {}, k, 1.0,
                                                 config.stochastic_temperature, apply);
                        }
                    }
                    law = std::move(out);
                }
                break;
            }
        }
    }

    // Final force-unmask (argmax), matching the samplers.
    Law out;
    for (const auto& [x, w] : law) {
        if (w <= 0.0) continue;
        if (masked_count(x, space) == 0) {
            out[x] += w;
            continue;
        }
        Sequence y = x;
        const PositionDistributions pred = denoiser.predict(x);
        for (size_t d = 0; d < y.size(); ++d)
            if (y[d] == space.mask_id()) y[d] = static_cast<Token>(pred[d].argmax());
        out[y] += w;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo machinery
// ---------------------------------------------------------------------------

std::vector<Sequence> collect_samples(const SamplerConfig& config, const Denoiser& denoiser,
                                      const NoiseSchedule& schedule, int dims,
                                      uint64_t master_seed, uint64_t n, int threads) {
    config.validate();
    std::vector<Sequence> out(n);
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<uint64_t>(n, 256))));

    auto worker = [&](uint64_t lo, uint64_t hi) {
        for (uint64_t i = lo; i < hi; ++i) {
            Rng rng(derive_seed(master_seed, i));
            out[i] = run_sampler(config, denoiser, schedule, dims, rng);
        }
    };
    if (threads == 1) {
        worker(0, n);
        return out;
    }
    std::vector<std::thread> pool;
    const uint64_t chunk = (n + threads - 1) / threads;
    for (int ti = 0; ti < threads; ++ti) {
        const uint64_t lo = chunk * static_cast<uint64_t>(ti);
        const uint64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
    return out;
}

// ---------------------------------------------------------------------------
// Flip / rank experiment
// ---------------------------------------------------------------------------

namespace {

// 1 = highest value; ties share the mean of their rank range.
std::vector<double> mean_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] > values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

FlipReport flipped_token_experiment(const DataDistribution& q0, uint64_t n_samples,
                                    const std::vector<double>& t_grid, int flip_count,
                                    const NoiseSchedule& schedule, uint64_t seed) {
    if (t_grid.empty()) throw std::invalid_argument("flipped_token_experiment: empty grid");
    if (flip_count < 1) throw std::invalid_argument("flipped_token_experiment: flip_count >= 1");
    std::vector<double> grid = t_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());

    const StateSpace& space = q0.space();
    const OracleDenoiser denoiser{q0};
    const int D = q0.dims();
    const int V = space.vocab_size;
    Rng rng(seed);

    struct Acc {
        double correct = 0.0, flipped = 0.0, rank1 = 0.0, rank_acc = 0.0;
        double diff_sum = 0.0, diff_sumsq = 0.0;
        uint64_t n = 0;
    };
    std::vector<Acc> acc(grid.size());
    uint64_t skipped = 0;

    constexpr double kLogZero = -1e18;

    for (uint64_t sample = 0; sample < n_samples; ++sample) {
        const Sequence& x0 = q0.support()[static_cast<size_t>(rng.categorical(q0.probs()))];
        std::vector<double> u(static_cast<size_t>(D));
        for (auto& v : u) v = rng.uniform();

        // Coordinate d is unmasked at t iff u_d >= 1 - alpha(t); masks are
        // nested along the grid.
        const double thresh0 = 1.0 - schedule.alpha(grid.front());
        std::vector<size_t> visible;
        for (size_t d = 0; d < u.size(); ++d)
            if (u[d] >= thresh0) visible.push_back(d);
        if (static_cast<int>(visible.size()) < flip_count + 1) {
            ++skipped;
            continue;
        }

        std::vector<bool> is_flipped(static_cast<size_t>(D), false);
        Sequence values = x0;
        std::vector<size_t> pool = visible;
        for (int f = 0; f < flip_count; ++f) {
            const int pick = rng.uniform_int(static_cast<int>(pool.size()));
            const size_t d = pool[static_cast<size_t>(pick)];
            pool.erase(pool.begin() + pick);
            is_flipped[d] = true;
            const int offset = 1 + rng.uniform_int(V - 1);
            values[d] = static_cast<Token>((values[d] + offset) % V);
        }

        std::vector<double> accum(static_cast<size_t>(D), 0.0);
        for (size_t gi = 0; gi < grid.size(); ++gi) {
            const double thresh = 1.0 - schedule.alpha(grid[gi]);
            Sequence x(static_cast<size_t>(D), space.mask_id());
            std::vector<size_t> unmasked;
            for (size_t d = 0; d < x.size(); ++d) {
                if (u[d] >= thresh) {
                    x[d] = values[d];
                    unmasked.push_back(d);
                }
            }

            std::vector<double> ell(unmasked.size());
            for (size_t k = 0; k < unmasked.size(); ++k) {
                ell[k] = denoiser.leave_one_out(x, unmasked[k]);
                accum[unmasked[k]] += ell[k] > 0.0 ? std::log(ell[k]) : kLogZero;
            }
            std::vector<double> cum(unmasked.size());
            for (size_t k = 0; k < unmasked.size(); ++k) cum[k] = accum[unmasked[k]];

            const std::vector<double> r1 = mean_ranks(ell);
            const std::vector<double> ra = mean_ranks(cum);

            double c_sum = 0.0, f_sum = 0.0, r1_sum = 0.0, ra_sum = 0.0;
            uint64_t c_n = 0, f_n = 0;
            for (size_t k = 0; k < unmasked.size(); ++k) {
                if (is_flipped[unmasked[k]]) {
                    f_sum += ell[k];
                    r1_sum += r1[k];
                    ra_sum += ra[k];
                    ++f_n;
                } else {
                    c_sum += ell[k];
                    ++c_n;
                }
            }
            const double mc = c_sum / static_cast<double>(c_n);
            const double mf = f_sum / static_cast<double>(f_n);
            acc[gi].correct += mc;
            acc[gi].flipped += mf;
            acc[gi].rank1 += r1_sum / static_cast<double>(f_n);
            acc[gi].rank_acc += ra_sum / static_cast<double>(f_n);
            const double diff = mc - mf;
            acc[gi].diff_sum += diff;
            acc[gi].diff_sumsq += diff * diff;
            ++acc[gi].n;
        }
    }

    FlipReport report;
    report.skipped = skipped;
    for (size_t gi = 0; gi < grid.size(); ++gi) {
        FlipReport::Step step;
        step.t = grid[gi];
        step.n = acc[gi].n;
        if (acc[gi].n > 0) {
            const double n = static_cast<double>(acc[gi].n);
            step.mean_correct = acc[gi].correct / n;
            step.mean_flipped = acc[gi].flipped / n;
            step.rank_single = acc[gi].rank1 / n;
            step.rank_accum = acc[gi].rank_acc / n;
            if (acc[gi].n > 1) {
                const double mean = acc[gi].diff_sum / n;
                const double var = std::max(0.0, (acc[gi].diff_sumsq / n - mean * mean) * n / (n - 1));
                step.gap_stderr = std::sqrt(var / n);
            }
        }
        report.steps.push_back(step);
    }
    return report;
}

void write_flip_report_csv(const FlipReport& report, std::ostream& out) {
    out << "step,t,mean_correct,mean_flipped,rank_single,rank_accum,n\n";
    out.precision(12);
    for (size_t i = 0; i < report.steps.size(); ++i) {
        const auto& s = report.steps[i];
        out << (i + 1) << ',' << s.t << ',' << s.mean_correct << ',' << s.mean_flipped << ','
            << s.rank_single << ',' << s.rank_accum << ',' << s.n << '\n';
    }
}

std::vector<SweepRow> tv_vs_steps_sweep(
    const DataDistribution& q0, const std::vector<std::pair<std::string, SamplerConfig>>& configs,
    const std::vector<int>& t_list, uint64_t n, const NoiseSchedule& schedule,
    uint64_t master_seed, int threads) {
    if (n < 1000) throw std::invalid_argument("tv_vs_steps_sweep: n must be >= 1000");
    const OracleDenoiser denoiser{q0};
    std::vector<SweepRow> rows;
    for (size_t ci = 0; ci < configs.size(); ++ci) {
        for (size_t ti = 0; ti < t_list.size(); ++ti) {
            SamplerConfig cfg = configs[ci].second;
            cfg.steps = t_list[ti];
            const uint64_t cell_seed = derive_seed(master_seed, 1000003ull * ci + ti);
            const std::vector<Sequence> samples =
                collect_samples(cfg, denoiser, schedule, q0.dims(), cell_seed, n, threads);
            EmpiricalDistribution emp;
            for (const auto& x : samples) emp.add(x);
            SweepRow row;
            row.label = configs[ci].first;
            row.steps = t_list[ti];
            row.tv = tv_distance(emp, q0);
            row.stderr_tv = bootstrap_tv_stderr(emp, q0, 200, derive_seed(cell_seed, 0xB00757ull));
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace mdm
