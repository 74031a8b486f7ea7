#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mdm/harness.hpp"

namespace {

mdm::ExperimentConfig load(const std::string& path, uint64_t* seed_override) {
    mdm::ExperimentConfig cfg = mdm::ExperimentConfig::parse_file(path);
    if (seed_override) cfg.seed = *seed_override;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked-diffusion sampling laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    bool have_seed = false;
    uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "experiment config file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
        cmd->add_option("--seed", seed, "override the config's master seed")
            ->each([&](const std::string&) { have_seed = true; });
    };

    CLI::App* run = app.add_subcommand("run", "run the configured sampler");
    add_common(run);
    CLI::App* sweep = app.add_subcommand("sweep", "expand the [sweep] axes into a grid of runs");
    add_common(sweep);
    CLI::App* diagnose = app.add_subcommand("diagnose", "run a diagnostic study");
    std::string diag_kind;
    diagnose->add_option("kind", diag_kind, "flip | rank | rates")->required();
    add_common(diagnose);

    CLI11_PARSE(app, argc, argv);

    try {
        mdm::ExperimentConfig cfg = load(config_path, have_seed ? &seed : nullptr);
        mdm::HarnessOptions options;
        options.out_dir = mdm::resolve_out_dir(cfg, out_dir);
        options.threads = threads;

        if (run->parsed()) {
            mdm::run_experiment(cfg, options);
        } else if (sweep->parsed()) {
            mdm::run_sweep(cfg, options);
        } else {
            mdm::DiagnoseKind kind;
            if (diag_kind == "flip") kind = mdm::DiagnoseKind::Flip;
            else if (diag_kind == "rank") kind = mdm::DiagnoseKind::Rank;
            else if (diag_kind == "rates") kind = mdm::DiagnoseKind::Rates;
            else {
                std::fprintf(stderr, "error: unknown diagnostic '%s' (flip|rank|rates)\n",
                             diag_kind.c_str());
                return 2;
            }
            mdm::run_diagnose(kind, cfg, options);
        }
    } catch (const mdm::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
