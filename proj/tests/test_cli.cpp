#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "mdm/config.hpp"

namespace {

const std::string kCli = MDM_CLI_PATH;

int run_cmd(const std::string& args) {
    const int status = std::system((kCli + " " + args).c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

const char* kMinimal = R"([target]
kind = all_equal
dims = 2
vocab = 2

[schedule]
kind = linear

[sampler]
strategy = vanilla
steps = 1

[run]
seed = 7
replicas = 10000
)";

}  // namespace

TEST_CASE("run emits a summary with the enumerated TV") {
    const std::string dir = "cli_min_out";
    write_file("cli_min.ini", kMinimal);
    REQUIRE(run_cmd("run cli_min.ini --out " + dir) == 0);

    const std::string summary = slurp(dir + "/summary.json");
    const auto pos = summary.find("\"tv\":");
    REQUIRE(pos != std::string::npos);
    const double tv = std::stod(summary.substr(pos + 5));
    // One-shot decoding of all_equal(2,2) has exact law TV 0.5; MC bound.
    CHECK(tv > 0.45);
    CHECK(tv < 0.55);

    const std::string samples = slurp(dir + "/samples.csv");
    CHECK(samples.rfind("replica,d0,d1\n", 0) == 0);
}

TEST_CASE("run is byte-reproducible and thread-independent") {
    write_file("cli_rep.ini", kMinimal);
    REQUIRE(run_cmd("run cli_rep.ini --out cli_rep_a --threads 1") == 0);
    REQUIRE(run_cmd("run cli_rep.ini --out cli_rep_b --threads 4") == 0);
    REQUIRE(run_cmd("run cli_rep.ini --out cli_rep_c") == 0);
    const std::string a = slurp("cli_rep_a/samples.csv");
    CHECK(a == slurp("cli_rep_b/samples.csv"));
    CHECK(a == slurp("cli_rep_c/samples.csv"));
}

TEST_CASE("--seed overrides the configured master seed") {
    write_file("cli_seed.ini", kMinimal);
    REQUIRE(run_cmd("run cli_seed.ini --out cli_seed_a --seed 99") == 0);
    REQUIRE(run_cmd("run cli_seed.ini --out cli_seed_b --seed 99") == 0);
    REQUIRE(run_cmd("run cli_seed.ini --out cli_seed_c") == 0);
    const std::string a = slurp("cli_seed_a/samples.csv");
    CHECK(a == slurp("cli_seed_b/samples.csv"));
    CHECK(a != slurp("cli_seed_c/samples.csv"));
}

TEST_CASE("invalid configs exit with code 2 and a line-anchored message") {
    write_file("cli_bad.ini", "[target]\nkind = all_equal\nfoo = 1\n");
    const int code = run_cmd("run cli_bad.ini --out cli_bad_out 2> cli_bad.err");
    CHECK(code == 2);
    const std::string err = slurp("cli_bad.err");
    CHECK(err.find("foo") != std::string::npos);
    CHECK(err.find("line 3") != std::string::npos);

    CHECK(run_cmd("run no_such_config.ini 2> /dev/null") == 2);
}

TEST_CASE("runtime failures exit with code 1") {
    // Table target pointing at a directory cannot be loaded.
    write_file("cli_rt.ini",
               "[target]\nkind = table\ntable_path = .\nvocab = 2\n\n[run]\nreplicas = 10\n");
    CHECK(run_cmd("run cli_rt.ini --out cli_rt_out 2> /dev/null") == 1);
}

TEST_CASE("sweep writes one deterministic row per variant and step") {
    const std::string cfg = std::string(kMinimal) +
                            "\n[sweep]\nsteps_list = 1, 2\nstrategies = vanilla, top_k\n";
    write_file("cli_sweep.ini", cfg);
    REQUIRE(run_cmd("sweep cli_sweep.ini --out cli_sweep_out --threads 2") == 0);
    const std::string csv = slurp("cli_sweep_out/sweep.csv");
    CHECK(csv.rfind("label,steps,tv,stderr\n", 0) == 0);
    int rows = 0;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 5);  // header + 2 strategies x 2 step counts

    REQUIRE(run_cmd("sweep cli_sweep.ini --out cli_sweep_out2 --threads 4") == 0);
    CHECK(csv == slurp("cli_sweep_out2/sweep.csv"));
}

TEST_CASE("diagnose subcommands emit their reports") {
    const std::string cfg = std::string(kMinimal) +
                            "\n[diagnose]\nt_grid = 0.6, 0.3\nn_samples = 300\nflip_count = 1\n";
    write_file("cli_diag.ini", cfg);
    REQUIRE(run_cmd("diagnose flip cli_diag.ini --out cli_diag_flip") == 0);
    const std::string flip = slurp("cli_diag_flip/flip.csv");
    CHECK(flip.rfind("step,t,mean_correct,mean_flipped,rank_single,rank_accum,n\n", 0) == 0);

    REQUIRE(run_cmd("diagnose rank cli_diag.ini --out cli_diag_rank") == 0);
    slurp("cli_diag_rank/rank.csv");

    REQUIRE(run_cmd("diagnose rates cli_diag.ini --out cli_diag_rates > /dev/null") == 0);
    const std::string summary = slurp("cli_diag_rates/summary.json");
    CHECK(summary.find("max_abs_diff") != std::string::npos);
}
