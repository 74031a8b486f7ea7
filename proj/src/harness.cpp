#include "mdm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mdm/ctmc.hpp"
#include "mdm/denoiser.hpp"
#include "mdm/schedule.hpp"

namespace mdm {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path resolve_out_dir(const ExperimentConfig& config, const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    if (!config.out_dir.empty()) return config.out_dir;
    if (const char* env = std::getenv("MDM_CORRECT_OUT"); env && *env) return env;
    return "mdm_out";
}

namespace {

std::string samples_csv(const std::vector<Sequence>& samples, int dims) {
    std::ostringstream out;
    out << "replica";
    for (int d = 0; d < dims; ++d) out << ",d" << d;
    out << '\n';
    for (size_t i = 0; i < samples.size(); ++i) {
        out << i;
        for (Token v : samples[i]) out << ',' << v;
        out << '\n';
    }
    return out.str();
}

json manifest_json(const ExperimentConfig& config, double wall_ms,
                   const std::vector<std::string>& outputs) {
    json m;
    m["config_hash"] = config.hash();
    m["tool_version"] = kToolVersion;
    m["wall_clock_ms"] = wall_ms;
    m["master_seed"] = config.seed;
    m["replicas"] = config.replicas;
    m["seed_derivation"] = "replica i uses splitmix64(master ^ 0xD1B54A32D192ED03 * (i+1))";
    m["outputs"] = outputs;
    return m;
}

struct SweepVariant {
    std::string label;
    SamplerConfig config;
};

// Axis expansion. Non-likelihood criteria ignore the score type, and
// strategies other than self_correct ignore all correction axes, so those
// axes are pinned to avoid duplicate rows.
std::vector<SweepVariant> expand_variants(const SamplerConfig& base, const SweepSpec& sweep) {
    std::vector<Strategy> strategies =
        sweep.strategies.empty() ? std::vector<Strategy>{base.strategy} : sweep.strategies;
    std::vector<ScoreType> score_types =
        sweep.score_types.empty() ? std::vector<ScoreType>{base.score_type} : sweep.score_types;
    std::vector<RemaskRule> rules =
        sweep.rules.empty() ? std::vector<RemaskRule>{base.rule} : sweep.rules;
    std::vector<Criterion> criteria =
        sweep.criteria.empty() ? std::vector<Criterion>{base.criterion} : sweep.criteria;

    std::vector<SweepVariant> variants;
    auto add = [&](const std::string& label, const SamplerConfig& cfg) {
        for (const auto& v : variants)
            if (v.label == label) return;
        variants.push_back({label, cfg});
    };
    for (Strategy strategy : strategies) {
        SamplerConfig cfg = base;
        cfg.strategy = strategy;
        if (strategy != Strategy::SelfCorrect) {
            add(to_string(strategy), cfg);
            continue;
        }
        for (Criterion criterion : criteria) {
            cfg.criterion = criterion;
            for (RemaskRule rule : rules) {
                cfg.rule = rule;
                if (criterion == Criterion::Likelihood) {
                    for (ScoreType score : score_types) {
                        cfg.score_type = score;
                        add("self_correct/" + to_string(criterion) + "/" + to_string(score) + "/" +
                                to_string(rule),
                            cfg);
                    }
                } else {
                    cfg.score_type = ScoreType::Current;
                    add("self_correct/" + to_string(criterion) + "/" + to_string(rule), cfg);
                }
            }
        }
    }
    std::sort(variants.begin(), variants.end(),
              [](const SweepVariant& a, const SweepVariant& b) { return a.label < b.label; });
    return variants;
}

}  // namespace

void run_experiment(const ExperimentConfig& config, const HarnessOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const DataDistribution q0 = config.target.build();
    const OracleDenoiser denoiser{q0};
    const NoiseSchedule schedule{config.schedule};

    const std::vector<Sequence> samples = collect_samples(
        config.sampler, denoiser, schedule, q0.dims(), config.seed, config.replicas,
        options.threads);

    EmpiricalDistribution emp;
    for (const auto& x : samples) emp.add(x);
    const double tv = tv_distance(emp, q0);
    const double se = bootstrap_tv_stderr(emp, q0, 200, derive_seed(config.seed, 0xB00757ull));

    atomic_write(options.out_dir / "samples.csv", samples_csv(samples, q0.dims()));

    json summary;
    summary["config_hash"] = config.hash();
    summary["target"] = to_string(config.target.kind);
    summary["strategy"] = to_string(config.sampler.strategy);
    summary["steps"] = config.sampler.steps;
    summary["n"] = config.replicas;
    summary["tv"] = tv;
    summary["tv_stderr"] = se;
    atomic_write(options.out_dir / "summary.json", summary.dump(2) + "\n");

    const double wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    atomic_write(options.out_dir / "manifest.json",
                 manifest_json(config, wall_ms, {"samples.csv", "summary.json"}).dump(2) + "\n");
}

void run_sweep(const ExperimentConfig& config, const HarnessOptions& options) {
    if (!config.sweep) throw ConfigError("sweep requires a [sweep] section");
    const auto start = std::chrono::steady_clock::now();
    const DataDistribution q0 = config.target.build();
    const NoiseSchedule schedule{config.schedule};

    const std::vector<SweepVariant> variants = expand_variants(config.sampler, *config.sweep);
    const std::vector<int> t_list = config.sweep->steps_list.empty()
                                        ? std::vector<int>{config.sampler.steps}
                                        : config.sweep->steps_list;

    std::vector<std::pair<std::string, SamplerConfig>> configs;
    for (const auto& v : variants) configs.emplace_back(v.label, v.config);
    const std::vector<SweepRow> rows = tv_vs_steps_sweep(q0, configs, t_list, config.replicas,
                                                         schedule, config.seed, options.threads);

    std::ostringstream csv;
    csv.precision(12);
    csv << "label,steps,tv,stderr\n";
    for (const auto& row : rows)
        csv << row.label << ',' << row.steps << ',' << row.tv << ',' << row.stderr_tv << '\n';
    atomic_write(options.out_dir / "sweep.csv", csv.str());

    // Ranking: lowest TV first, per step count.
    json summary;
    summary["config_hash"] = config.hash();
    json ranking = json::array();
    std::vector<SweepRow> sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.tv < b.tv; });
    for (const auto& row : sorted) {
        ranking.push_back(
            {{"label", row.label}, {"steps", row.steps}, {"tv", row.tv}, {"stderr", row.stderr_tv}});
    }
    summary["ranking"] = ranking;
    atomic_write(options.out_dir / "summary.json", summary.dump(2) + "\n");

    const double wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    atomic_write(options.out_dir / "manifest.json",
                 manifest_json(config, wall_ms, {"sweep.csv", "summary.json"}).dump(2) + "\n");
}

void run_diagnose(DiagnoseKind kind, const ExperimentConfig& config,
                  const HarnessOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const DataDistribution q0 = config.target.build();
    const NoiseSchedule schedule{config.schedule};
    const DiagnoseSpec spec = config.diagnose.value_or(DiagnoseSpec{});

    std::vector<std::string> outputs;
    json summary;
    summary["config_hash"] = config.hash();

    if (kind == DiagnoseKind::Flip || kind == DiagnoseKind::Rank) {
        const FlipReport report = flipped_token_experiment(q0, spec.n_samples, spec.t_grid,
                                                           spec.flip_count, schedule, config.seed);
        std::ostringstream csv;
        write_flip_report_csv(report, csv);
        const std::string name = kind == DiagnoseKind::Flip ? "flip.csv" : "rank.csv";
        atomic_write(options.out_dir / name, csv.str());
        outputs.push_back(name);
        summary["skipped"] = report.skipped;
        summary["kind"] = kind == DiagnoseKind::Flip ? "flip" : "rank";
    } else {
        // Rate-form equivalence audit on random forward-process states.
        const OracleDenoiser denoiser{q0};
        Rng rng(config.seed);
        double max_diff = 0.0;
        uint64_t evaluated = 0;
        for (uint64_t i = 0; i < spec.n_samples; ++i) {
            const Sequence& x0 = q0.support()[static_cast<size_t>(rng.categorical(q0.probs()))];
            const double t = 0.05 + 0.9 * rng.uniform();
            const Sequence x_t = forward_sample(x0, t, schedule, q0.space(), rng);
            std::vector<size_t> masked;
            for (size_t d = 0; d < x_t.size(); ++d)
                if (x_t[d] == q0.space().mask_id()) masked.push_back(d);
            if (masked.empty()) continue;
            const size_t d = masked[static_cast<size_t>(rng.uniform_int(static_cast<int>(masked.size())))];
            const Token v = static_cast<Token>(rng.uniform_int(q0.space().vocab_size));
            const double marginal = reverse_rate_marginal(x_t, d, v, t, schedule, denoiser);
            const double ratio = reverse_rate_ratio(x_t, d, v, t, schedule, q0);
            max_diff = std::max(max_diff, std::abs(marginal - ratio));
            ++evaluated;
        }
        std::printf("rates audit: %llu states, max |ratio - marginal| = %.3e\n",
                    static_cast<unsigned long long>(evaluated), max_diff);
        summary["kind"] = "rates";
        summary["states"] = evaluated;
        summary["max_abs_diff"] = max_diff;
    }

    const double wall_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    outputs.push_back("summary.json");
    atomic_write(options.out_dir / "summary.json", summary.dump(2) + "\n");
    atomic_write(options.out_dir / "manifest.json",
                 manifest_json(config, wall_ms, outputs).dump(2) + "\n");
}

}  // namespace mdm
