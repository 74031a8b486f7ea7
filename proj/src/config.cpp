#include "mdm/config.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace mdm {

DataDistribution TargetSpec::build() const {
    switch (kind) {
        case TargetKind::AllEqual: return DataDistribution::all_equal(dims, vocab);
        case TargetKind::Parity: return DataDistribution::parity(dims);
        case TargetKind::ProductUniform: return DataDistribution::product_uniform(dims, vocab);
        case TargetKind::MarkovChain:
            return DataDistribution::markov_chain_peaked(dims, vocab, stay_prob);
        case TargetKind::Table: return DataDistribution::load_table_file(table_path, vocab);
    }
    throw std::logic_error("TargetSpec: unknown kind");
}

std::string to_string(TargetKind k) {
    switch (k) {
        case TargetKind::AllEqual: return "all_equal";
        case TargetKind::Parity: return "parity";
        case TargetKind::ProductUniform: return "product_uniform";
        case TargetKind::MarkovChain: return "markov_chain";
        case TargetKind::Table: return "table";
    }
    return "?";
}

namespace {

[[noreturn]] void fail(int line, const std::string& message) {
    throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T parse_enum(const std::string& value, int line,
             const std::vector<std::pair<std::string, T>>& table, const std::string& what) {
    for (const auto& [name, v] : table)
        if (name == value) return v;
    fail(line, "invalid " + what + " '" + value + "'");
}

const std::vector<std::pair<std::string, TargetKind>> kTargetKinds = {
    {"all_equal", TargetKind::AllEqual},           {"parity", TargetKind::Parity},
    {"product_uniform", TargetKind::ProductUniform}, {"markov_chain", TargetKind::MarkovChain},
    {"table", TargetKind::Table}};
const std::vector<std::pair<std::string, ScheduleKind>> kScheduleKinds = {
    {"linear", ScheduleKind::Linear}, {"cosine", ScheduleKind::Cosine}};
const std::vector<std::pair<std::string, RemaskKind>> kRemaskKinds = {
    {"constant", RemaskKind::Constant},
    {"capped_constant", RemaskKind::CappedConstant},
    {"zero_tail", RemaskKind::ZeroTail}};
const std::vector<std::pair<std::string, Strategy>> kStrategies = {
    {"vanilla", Strategy::Vanilla},       {"top_k", Strategy::TopK},
    {"top_k_margin", Strategy::TopKMargin}, {"remdm", Strategy::ReMDM},
    {"self_correct", Strategy::SelfCorrect}};
const std::vector<std::pair<std::string, ScoreType>> kScoreTypes = {
    {"current", ScoreType::Current}, {"cumulated", ScoreType::Cumulated}};
const std::vector<std::pair<std::string, RemaskRule>> kRules = {
    {"deterministic", RemaskRule::Deterministic}, {"stochastic", RemaskRule::Stochastic}};
const std::vector<std::pair<std::string, Criterion>> kCriteria = {
    {"likelihood", Criterion::Likelihood},
    {"top_k_margin", Criterion::TopKMargin},
    {"kl", Criterion::KL},
    {"wasserstein", Criterion::Wasserstein}};
const std::vector<std::pair<std::string, KernelRemaskMode>> kKernelModes = {
    {"score_based", KernelRemaskMode::ScoreBased},
    {"iid", KernelRemaskMode::IID},
    {"both", KernelRemaskMode::Both}};
const std::vector<std::pair<std::string, TokenDraw>> kTokenDraws = {
    {"argmax", TokenDraw::Argmax}, {"sample", TokenDraw::Sample}};
const std::vector<std::pair<std::string, WassersteinMetric>> kMetrics = {
    {"discrete", WassersteinMetric::Discrete}, {"ordinal", WassersteinMetric::Ordinal}};

long long parse_int(const std::string& v, int line) {
    try {
        size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        fail(line, "invalid integer '" + v + "'");
    }
}

double parse_double(const std::string& v, int line) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        fail(line, "invalid number '" + v + "'");
    }
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(line, "invalid boolean '" + v + "' (expected true/false)");
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        const auto hash = s.find('#');
        if (hash != std::string::npos) s.erase(hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "target" && section != "schedule" && section != "sampler" &&
                section != "remask" && section != "run" && section != "sweep" &&
                section != "diagnose")
                fail(line, "unknown section '" + section + "'");
            if (section == "sweep" && !cfg.sweep) cfg.sweep.emplace();
            if (section == "diagnose" && !cfg.diagnose) cfg.diagnose.emplace();
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected 'key = value'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (section.empty()) fail(line, "key '" + key + "' outside any section");

        if (section == "target") {
            if (key == "kind") cfg.target.kind = parse_enum(value, line, kTargetKinds, "target kind");
            else if (key == "dims") cfg.target.dims = static_cast<int>(parse_int(value, line));
            else if (key == "vocab") cfg.target.vocab = static_cast<int>(parse_int(value, line));
            else if (key == "stay_prob") cfg.target.stay_prob = parse_double(value, line);
            else if (key == "table_path") cfg.target.table_path = value;
            else fail(line, "unknown key '" + key + "' in [target]");
        } else if (section == "schedule") {
            if (key == "kind") cfg.schedule = parse_enum(value, line, kScheduleKinds, "schedule kind");
            else fail(line, "unknown key '" + key + "' in [schedule]");
        } else if (section == "sampler") {
            auto& sp = cfg.sampler;
            if (key == "strategy") sp.strategy = parse_enum(value, line, kStrategies, "strategy");
            else if (key == "steps") sp.steps = static_cast<int>(parse_int(value, line));
            else if (key == "score_type") sp.score_type = parse_enum(value, line, kScoreTypes, "score_type");
            else if (key == "rule") sp.rule = parse_enum(value, line, kRules, "rule");
            else if (key == "criterion") sp.criterion = parse_enum(value, line, kCriteria, "criterion");
            else if (key == "kernel_remask_mode")
                sp.kernel_remask_mode = parse_enum(value, line, kKernelModes, "kernel_remask_mode");
            else if (key == "reset_on_remask") sp.reset_on_remask = parse_bool(value, line);
            else if (key == "token_draw") sp.token_draw = parse_enum(value, line, kTokenDraws, "token_draw");
            else if (key == "stochastic_temperature") sp.stochastic_temperature = parse_double(value, line);
            else if (key == "accumulate_criterion") sp.accumulate_criterion = parse_bool(value, line);
            else if (key == "wasserstein_metric")
                sp.wasserstein_metric = parse_enum(value, line, kMetrics, "wasserstein_metric");
            else if (key == "unmask_budget") {
                sp.unmask_budget.clear();
                for (const auto& item : split_list(value))
                    sp.unmask_budget.push_back(static_cast<int>(parse_int(item, line)));
            } else fail(line, "unknown key '" + key + "' in [sampler]");
        } else if (section == "remask") {
            auto& rm = cfg.sampler.remask;
            if (key == "kind") rm.kind = parse_enum(value, line, kRemaskKinds, "remask kind");
            else if (key == "eta") rm.eta = parse_double(value, line);
            else if (key == "tail_off") rm.tail_off = static_cast<int>(parse_int(value, line));
            else fail(line, "unknown key '" + key + "' in [remask]");
        } else if (section == "run") {
            if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(value, line));
            else if (key == "replicas") cfg.replicas = static_cast<uint64_t>(parse_int(value, line));
            else if (key == "out") cfg.out_dir = value;
            else fail(line, "unknown key '" + key + "' in [run]");
        } else if (section == "sweep") {
            auto& sw = *cfg.sweep;
            if (key == "steps_list") {
                for (const auto& item : split_list(value))
                    sw.steps_list.push_back(static_cast<int>(parse_int(item, line)));
            } else if (key == "strategies") {
                for (const auto& item : split_list(value))
                    sw.strategies.push_back(parse_enum(item, line, kStrategies, "strategy"));
            } else if (key == "score_types") {
                for (const auto& item : split_list(value))
                    sw.score_types.push_back(parse_enum(item, line, kScoreTypes, "score_type"));
            } else if (key == "rules") {
                for (const auto& item : split_list(value))
                    sw.rules.push_back(parse_enum(item, line, kRules, "rule"));
            } else if (key == "criteria") {
                for (const auto& item : split_list(value))
                    sw.criteria.push_back(parse_enum(item, line, kCriteria, "criterion"));
            } else fail(line, "unknown key '" + key + "' in [sweep]");
        } else if (section == "diagnose") {
            auto& dg = *cfg.diagnose;
            if (key == "t_grid") {
                dg.t_grid.clear();
                for (const auto& item : split_list(value)) dg.t_grid.push_back(parse_double(item, line));
            } else if (key == "n_samples") {
                dg.n_samples = static_cast<uint64_t>(parse_int(value, line));
            } else if (key == "flip_count") {
                dg.flip_count = static_cast<int>(parse_int(value, line));
            } else fail(line, "unknown key '" + key + "' in [diagnose]");
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "[target]\n";
    out << "kind = " << to_string(target.kind) << "\n";
    out << "dims = " << target.dims << "\n";
    out << "vocab = " << target.vocab << "\n";
    if (target.kind == TargetKind::MarkovChain) out << "stay_prob = " << target.stay_prob << "\n";
    if (target.kind == TargetKind::Table) out << "table_path = " << target.table_path << "\n";

    out << "\n[schedule]\n";
    out << "kind = " << to_string(schedule) << "\n";

    out << "\n[sampler]\n";
    out << "strategy = " << to_string(sampler.strategy) << "\n";
    out << "steps = " << sampler.steps << "\n";
    out << "score_type = " << to_string(sampler.score_type) << "\n";
    out << "rule = " << to_string(sampler.rule) << "\n";
    out << "criterion = " << to_string(sampler.criterion) << "\n";
    out << "kernel_remask_mode = " << to_string(sampler.kernel_remask_mode) << "\n";
    out << "reset_on_remask = " << (sampler.reset_on_remask ? "true" : "false") << "\n";
    out << "token_draw = " << to_string(sampler.token_draw) << "\n";
    out << "stochastic_temperature = " << sampler.stochastic_temperature << "\n";
    out << "accumulate_criterion = " << (sampler.accumulate_criterion ? "true" : "false") << "\n";
    out << "wasserstein_metric = "
        << (sampler.wasserstein_metric == WassersteinMetric::Discrete ? "discrete" : "ordinal")
        << "\n";
    if (!sampler.unmask_budget.empty()) {
        out << "unmask_budget = ";
        for (size_t i = 0; i < sampler.unmask_budget.size(); ++i)
            out << (i ? "," : "") << sampler.unmask_budget[i];
        out << "\n";
    }

    out << "\n[remask]\n";
    out << "kind = " << to_string(sampler.remask.kind) << "\n";
    out << "eta = " << sampler.remask.eta << "\n";
    out << "tail_off = " << sampler.remask.tail_off << "\n";

    out << "\n[run]\n";
    out << "seed = " << seed << "\n";
    out << "replicas = " << replicas << "\n";
    if (!out_dir.empty()) out << "out = " << out_dir << "\n";

    if (sweep) {
        out << "\n[sweep]\n";
        auto write_list = [&](const std::string& key, const auto& items, auto fmt) {
            if (items.empty()) return;
            out << key << " = ";
            for (size_t i = 0; i < items.size(); ++i) out << (i ? "," : "") << fmt(items[i]);
            out << "\n";
        };
        write_list("steps_list", sweep->steps_list, [](int v) { return std::to_string(v); });
        write_list("strategies", sweep->strategies, [](Strategy v) { return to_string(v); });
        write_list("score_types", sweep->score_types, [](ScoreType v) { return to_string(v); });
        write_list("rules", sweep->rules, [](RemaskRule v) { return to_string(v); });
        write_list("criteria", sweep->criteria, [](Criterion v) { return to_string(v); });
    }
    if (diagnose) {
        out << "\n[diagnose]\n";
        out << "t_grid = ";
        for (size_t i = 0; i < diagnose->t_grid.size(); ++i)
            out << (i ? "," : "") << diagnose->t_grid[i];
        out << "\n";
        out << "n_samples = " << diagnose->n_samples << "\n";
        out << "flip_count = " << diagnose->flip_count << "\n";
    }
    return out.str();
}

std::string ExperimentConfig::hash() const {
    const std::string s = serialize();
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace mdm
