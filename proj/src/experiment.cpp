#include "reflecsched/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "parallel.hpp"
#include "reflecsched/hash.hpp"
#include "reflecsched/io.hpp"

namespace reflecsched {

using nlohmann::json;

std::string_view to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::Rule: return "rule";
        case PolicyKind::BaseRandomized: return "base-randomized";
        case PolicyKind::LlmDirect: return "llm-direct";
        case PolicyKind::LlmDirectNoStatic: return "llm-direct-nostatic";
        case PolicyKind::ReflecSched: return "reflecsched";
    }
    return "?";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view text) {
    for (auto k : {PolicyKind::Rule, PolicyKind::BaseRandomized, PolicyKind::LlmDirect, PolicyKind::LlmDirectNoStatic,
                   PolicyKind::ReflecSched}) {
        if (text == to_string(k)) return k;
    }
    return std::nullopt;
}

std::string PolicySpec::label() const {
    if (!name.empty()) return name;
    switch (kind) {
        case PolicyKind::Rule: return rule ? std::string(to_string(*rule)) : "rule";
        case PolicyKind::BaseRandomized: return "BaseRandomized";
        case PolicyKind::LlmDirect: return "LLM-Direct";
        case PolicyKind::LlmDirectNoStatic: return "LLM-Direct-NoStatic";
        case PolicyKind::ReflecSched: {
            std::string out = "ReflecSched";
            if (max_level) out += "-L" + std::to_string(*max_level);
            if (rollouts_per_level) out += "-R" + std::to_string(*rollouts_per_level);
            if (base_horizon) out += "-H" + std::to_string(*base_horizon);
            return out;
        }
    }
    return "?";
}

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Mock: return "mock";
        case BackendKind::Remote: return "remote";
        case BackendKind::Replay: return "replay";
        case BackendKind::Record: return "record";
    }
    return "?";
}

std::optional<BackendKind> parse_backend_kind(std::string_view text) {
    for (auto k : {BackendKind::Mock, BackendKind::Remote, BackendKind::Replay, BackendKind::Record}) {
        if (text == to_string(k)) return k;
    }
    return std::nullopt;
}

std::vector<PolicySpec> ExperimentConfig::default_policies(std::span<const RuleId> pool) {
    std::vector<PolicySpec> out;
    out.push_back({PolicyKind::ReflecSched, {}, {}, {}, {}, {}});
    out.push_back({PolicyKind::LlmDirect, {}, {}, {}, {}, {}});
    out.push_back({PolicyKind::BaseRandomized, {}, {}, {}, {}, {}});
    for (RuleId r : dominance_pool(pool)) out.push_back({PolicyKind::Rule, {}, r, {}, {}, {}});
    return out;
}

void ExperimentConfig::validate() const {
    if (policies.empty()) throw ConfigError("config: at least one policy is required");
    if (suite.empty()) throw ConfigError("config: suite manifest path is required");
    if (runs_per_pair < 1) throw ConfigError("config: runs_per_pair must be >= 1");
    try {
        reflection.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: reflection: ") + e.what());
    }
    std::set<std::string> labels;
    for (const auto& p : policies) {
        if (p.kind == PolicyKind::Rule && !p.rule) throw ConfigError("config: rule policy without a rule");
        if (!labels.insert(p.label()).second) throw ConfigError("config: duplicate policy label " + p.label());
    }
    const bool needs_model = std::any_of(policies.begin(), policies.end(), [](const auto& p) { return p.needs_model(); });
    if (needs_model && backend.kind != BackendKind::Mock) {
        if (backend.kind != BackendKind::Replay && backend.endpoint.base_url.empty()) {
            throw ConfigError("config: backend needs endpoint.base_url");
        }
        if ((backend.kind == BackendKind::Replay || backend.kind == BackendKind::Record) && backend.cassette.empty()) {
            throw ConfigError("config: backend needs a cassette path");
        }
    }
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

PolicySpec policy_from_json(const json& item, std::size_t index) {
    const std::string where = "/policies/" + std::to_string(index);
    PolicySpec spec;
    if (item.is_string()) {
        // Shorthand: a rule name or a policy label.
        const auto text = item.get<std::string>();
        if (const auto rule = parse_rule(text)) {
            spec.kind = PolicyKind::Rule;
            spec.rule = *rule;
        } else if (text == "ReflecSched") {
            spec.kind = PolicyKind::ReflecSched;
        } else if (text == "LLM-Direct") {
            spec.kind = PolicyKind::LlmDirect;
        } else if (text == "LLM-Direct-NoStatic") {
            spec.kind = PolicyKind::LlmDirectNoStatic;
        } else if (text == "BaseRandomized") {
            spec.kind = PolicyKind::BaseRandomized;
        } else if (const auto kind = parse_policy_kind(text)) {
            spec.kind = *kind;
        } else {
            throw FormatError(where, "unknown policy '" + text + "'");
        }
        return spec;
    }
    if (!item.is_object()) throw FormatError(where, "policy must be a string or an object");
    const auto kind = parse_policy_kind(item.value("kind", std::string("reflecsched")));
    if (!kind) throw FormatError(where + "/kind", "unknown policy kind");
    spec.kind = *kind;
    spec.name = item.value("name", std::string());
    if (item.contains("rule")) {
        const auto rule = parse_rule(item["rule"].get<std::string>());
        if (!rule) throw FormatError(where + "/rule", "unknown rule");
        spec.rule = *rule;
    }
    if (item.contains("max_level")) spec.max_level = item["max_level"].get<int>();
    if (item.contains("rollouts_per_level")) spec.rollouts_per_level = item["rollouts_per_level"].get<int>();
    if (item.contains("base_horizon")) spec.base_horizon = item["base_horizon"].get<int>();
    return spec;
}

json policy_to_json(const PolicySpec& spec) {
    json out = {{"kind", std::string(to_string(spec.kind))}, {"name", spec.label()}};
    if (spec.rule) out["rule"] = std::string(to_string(*spec.rule));
    if (spec.max_level) out["max_level"] = *spec.max_level;
    if (spec.rollouts_per_level) out["rollouts_per_level"] = *spec.rollouts_per_level;
    if (spec.base_horizon) out["base_horizon"] = *spec.base_horizon;
    return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw FormatError("", "config must be a JSON object");
    static const std::set<std::string> known = {"suite",   "policies", "runs_per_pair", "reflection",       "backend",
                                                "seed",    "out",      "workers",       "reference",        "gantt",
                                                "verify_dominance"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) throw FormatError("/" + key, "unknown configuration key");
    }
    ExperimentConfig c;
    try {
        if (doc.contains("suite")) c.suite = resolve(base_dir, doc["suite"].get<std::string>());
        if (doc.contains("out")) c.out = resolve(base_dir, doc["out"].get<std::string>());
        c.runs_per_pair = doc.value("runs_per_pair", c.runs_per_pair);
        if (doc.contains("seed")) {
            c.seed = doc["seed"].is_string() ? std::stoull(doc["seed"].get<std::string>(), nullptr, 0)
                                             : doc["seed"].get<std::uint64_t>();
        }
        c.workers = doc.value("workers", c.workers);
        c.reference = doc.value("reference", c.reference);
        c.gantt = doc.value("gantt", c.gantt);
        c.verify_dominance = doc.value("verify_dominance", c.verify_dominance);
        if (doc.contains("reflection")) {
            const auto& r = doc["reflection"];
            c.reflection.max_level = r.value("max_level", c.reflection.max_level);
            c.reflection.rollouts_per_level = r.value("rollouts_per_level", c.reflection.rollouts_per_level);
            c.reflection.base_horizon = r.value("base_horizon", c.reflection.base_horizon);
            c.reflection.guidance_mix = r.value("guidance_mix", c.reflection.guidance_mix);
            c.reflection.workers = r.value("workers", c.reflection.workers);
            if (r.contains("pool")) c.reflection.pool = parse_rule_pool(r["pool"].get<std::vector<std::string>>());
        }
        if (doc.contains("backend")) {
            const auto& b = doc["backend"];
            const auto kind = parse_backend_kind(b.value("kind", std::string("mock")));
            if (!kind) throw FormatError("/backend/kind", "unknown backend kind");
            c.backend.kind = *kind;
            auto& e = c.backend.endpoint;
            e.base_url = b.value("base_url", e.base_url);
            e.model_name = b.value("model", e.model_name);
            e.api_key_env = b.value("api_key_env", e.api_key_env);
            e.timeout_s = b.value("timeout_s", e.timeout_s);
            e.max_retries = b.value("max_retries", e.max_retries);
            e.concurrency_cap = b.value("concurrency_cap", e.concurrency_cap);
            if (b.contains("cassette")) c.backend.cassette = resolve(base_dir, b["cassette"].get<std::string>());
        }
        if (doc.contains("policies")) {
            const auto& list = doc["policies"];
            if (!list.is_array()) throw FormatError("/policies", "expected an array");
            for (std::size_t i = 0; i < list.size(); ++i) c.policies.push_back(policy_from_json(list[i], i));
        } else {
            c.policies = ExperimentConfig::default_policies(c.reflection.pool);
        }
    } catch (const json::exception& e) {
        throw FormatError("", std::string("config: ") + e.what());
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json policies = json::array();
    for (const auto& p : c.policies) policies.push_back(policy_to_json(p));
    std::vector<std::string> pool;
    for (RuleId r : c.reflection.pool) pool.emplace_back(to_string(r));
    return {{"suite", c.suite.string()},
            {"policies", policies},
            {"runs_per_pair", c.runs_per_pair},
            {"reflection",
             {{"max_level", c.reflection.max_level},
              {"rollouts_per_level", c.reflection.rollouts_per_level},
              {"base_horizon", c.reflection.base_horizon},
              {"guidance_mix", c.reflection.guidance_mix},
              {"workers", c.reflection.workers},
              {"pool", pool}}},
            {"backend",
             {{"kind", std::string(to_string(c.backend.kind))},
              {"base_url", c.backend.endpoint.base_url},
              {"model", c.backend.endpoint.model_name},
              {"api_key_env", c.backend.endpoint.api_key_env},
              {"timeout_s", c.backend.endpoint.timeout_s},
              {"max_retries", c.backend.endpoint.max_retries},
              {"concurrency_cap", c.backend.endpoint.concurrency_cap},
              {"cassette", c.backend.cassette.string()}}},
            {"seed", c.seed},
            {"out", c.out.string()},
            {"workers", c.workers},
            {"reference", c.reference},
            {"gantt", c.gantt},
            {"verify_dominance", c.verify_dominance}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string(), e.what());
    }
    return config_from_json(doc, path.parent_path());
}

std::string Cell::key() const { return instance_id + "|" + policy + "|" + std::to_string(run_index); }

std::uint64_t cell_seed(std::uint64_t master, const std::string& instance_id, int run_index) {
    return Rng::derive(Rng::derive(master, fnv1a64(instance_id)), static_cast<std::uint64_t>(run_index));
}

PolicyFactory::PolicyFactory(const ExperimentConfig& config) : config_(config) {
    const bool needs_model =
        std::any_of(config.policies.begin(), config.policies.end(), [](const auto& p) { return p.needs_model(); });
    if (!needs_model) return;
    const auto& b = config.backend;
    switch (b.kind) {
        case BackendKind::Mock: break;
        case BackendKind::Remote: transport_ = std::make_shared<HttpTransport>(b.endpoint); break;
        case BackendKind::Replay:
            transport_ = std::make_shared<CassetteTransport>(b.cassette, CassetteTransport::Mode::Replay);
            break;
        case BackendKind::Record:
            transport_ = std::make_shared<CassetteTransport>(b.cassette, CassetteTransport::Mode::Record,
                                                             std::make_shared<HttpTransport>(b.endpoint));
            break;
    }
    if (transport_) client_ = std::make_shared<ChatClient>(transport_, b.endpoint);
}

PolicyFactory::PolicyFactory(const ExperimentConfig& config, std::shared_ptr<ChatTransport> transport)
    : config_(config), transport_(std::move(transport)) {
    if (transport_) client_ = std::make_shared<ChatClient>(transport_, config.backend.endpoint);
}

void PolicyFactory::check_reachable(std::span<const PolicySpec> specs) const {
    const bool needs_model = std::any_of(specs.begin(), specs.end(), [](const auto& p) { return p.needs_model(); });
    if (!needs_model || !transport_) return;
    if (!transport_->probe()) {
        throw ConfigError("model endpoint unreachable: " + config_.backend.endpoint.base_url +
                          " (use backend kind 'mock' for offline runs)");
    }
}

std::unique_ptr<Policy> PolicyFactory::make(const PolicySpec& spec, TokenLedger* ledger,
                                            SamplingProfile profile) const {
    const auto pool = config_.reflection.pool;
    auto decider = [&]() -> std::shared_ptr<Decider> {
        if (client_) return std::make_shared<ChatDecider>(client_, profile, ledger);
        return std::make_shared<FaithfulMockDecider>(pool);
    };
    switch (spec.kind) {
        case PolicyKind::Rule: return std::make_unique<PureRulePolicy>(*spec.rule);
        case PolicyKind::BaseRandomized: return std::make_unique<BaseRandomizedPolicy>(pool);
        case PolicyKind::LlmDirect: return std::make_unique<LlmDirectPolicy>(decider(), true);
        case PolicyKind::LlmDirectNoStatic: return std::make_unique<LlmDirectPolicy>(decider(), false);
        case PolicyKind::ReflecSched: {
            ReflectionConfig rc = config_.reflection;
            if (spec.max_level) rc.max_level = *spec.max_level;
            if (spec.rollouts_per_level) rc.rollouts_per_level = *spec.rollouts_per_level;
            if (spec.base_horizon) rc.base_horizon = *spec.base_horizon;
            std::shared_ptr<Reflector> reflector;
            if (client_) {
                reflector = std::make_shared<RemoteReflector>(client_, SamplingProfile::decision(), ledger);
            } else {
                reflector = std::make_shared<FaithfulMockReflector>();
            }
            return std::make_unique<ReflecSchedPolicy>(rc, reflector, decider(), spec.label());
        }
    }
    throw ConfigError("unknown policy kind");
}

std::vector<LoadedInstance> load_experiment_suite(const ExperimentConfig& config, std::vector<std::string>& flags) {
    LoadedSuite suite;
    try {
        suite = load_suite(config.suite);
    } catch (const std::exception& e) {
        throw ConfigError("cannot load suite " + config.suite.string() + ": " + e.what());
    }
    std::vector<LoadedInstance> out;
    for (auto& e : suite.entries) {
        auto inst = std::make_shared<const Instance>(std::move(e.instance));
        if (e.designated && config.verify_dominance) {
            const double margin =
                inst->metadata.contains("margin") ? std::stod(inst->metadata.at("margin")) : 0.02;
            const auto check = check_dominance(inst, *e.designated, margin, config.reflection.pool);
            if (!check.holds) {
                flags.push_back("dropped " + inst->id + ": designated rule " + std::string(to_string(*e.designated)) +
                                " does not dominate");
                continue;
            }
        }
        out.push_back({std::move(inst), e.designated});
    }
    return out;
}

std::vector<Cell> execution_matrix(const ExperimentConfig& config, std::span<const LoadedInstance> instances) {
    std::vector<Cell> cells;
    for (const auto& li : instances) {
        for (const auto& p : config.policies) {
            for (int r = 0; r < config.runs_per_pair; ++r) {
                cells.push_back({li.instance->id, p.label(), r, cell_seed(config.seed, li.instance->id, r)});
            }
        }
    }
    return cells;
}

namespace {

std::string file_stem(const Cell& c) {
    std::string s = c.instance_id + "__" + c.policy + "__" + std::to_string(c.run_index);
    for (char& ch : s) {
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
    }
    return s;
}

std::map<std::string, RunRecord> read_journal(const std::filesystem::path& path) {
    std::map<std::string, RunRecord> out;
    if (!std::filesystem::exists(path)) return out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto r = run_record_from_json(json::parse(line));
            out[Cell{r.instance_id, r.policy, r.run_index, 0}.key()] = std::move(r);
        } catch (const std::exception&) {
            // A line cut short by an interruption; that cell runs again.
        }
    }
    return out;
}

std::string default_reference(const ExperimentConfig& config) {
    if (!config.reference.empty()) return config.reference;
    for (const auto& p : config.policies) {
        if (p.kind == PolicyKind::ReflecSched) return p.label();
    }
    return {};
}

}  // namespace

RunSummary cmd_run(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    std::vector<std::string> load_flags;
    const auto instances = load_experiment_suite(config, load_flags);
    if (instances.empty()) throw ConfigError("suite has no usable instances");
    const auto cells = execution_matrix(config, instances);

    const PolicyFactory factory =
        options.transport ? PolicyFactory(config, options.transport) : PolicyFactory(config);
    factory.check_reachable(config.policies);

    std::map<std::string, std::shared_ptr<const Instance>> by_id;
    for (const auto& li : instances) by_id[li.instance->id] = li.instance;
    std::map<std::string, const PolicySpec*> spec_of;
    for (const auto& p : config.policies) spec_of[p.label()] = &p;

    const auto out = config.out;
    std::filesystem::create_directories(out / "logs");
    std::filesystem::create_directories(out / "schedules");
    if (config.gantt) std::filesystem::create_directories(out / "gantt");
    const auto journal_path = out / "journal.jsonl";
    auto done = read_journal(journal_path);

    std::vector<const Cell*> pending;
    RunSummary summary;
    for (const auto& c : cells) {
        if (done.contains(c.key())) {
            ++summary.skipped;
        } else {
            pending.push_back(&c);
        }
    }
    if (options.max_cells && pending.size() > *options.max_cells) pending.resize(*options.max_cells);

    std::mutex mutex;
    // A torn last line must not swallow the next record.
    const bool torn = std::filesystem::exists(journal_path) && [&] {
        const auto text = read_text(journal_path);
        return !text.empty() && text.back() != '\n';
    }();
    std::ofstream journal(journal_path, std::ios::app);
    if (!journal) throw std::runtime_error("cannot open journal " + journal_path.string());
    if (torn) journal << "\n";

    detail::parallel_for(pending.size(), config.workers, [&](std::size_t i) {
        const Cell& cell = *pending[i];
        try {
            const auto& instance = by_id.at(cell.instance_id);
            TokenLedger ledger;
            auto policy = factory.make(*spec_of.at(cell.policy), &ledger, options.decision_profile);
            const auto result = run_policy(instance, *policy, cell.seed);

            const auto validity = validate_schedule(*instance, result.schedule, {.require_complete = true});
            if (!validity.valid()) throw InvariantViolation("invalid schedule: " + validity.violations.front().detail);
            if (compute_makespan(result.schedule) != result.makespan) throw InvariantViolation("makespan mismatch");

            const std::string stem = file_stem(cell);
            RunRecord rec;
            rec.instance_id = cell.instance_id;
            rec.policy = cell.policy;
            rec.run_index = cell.run_index;
            rec.makespan = result.makespan;
            if (!result.decision_log.empty()) rec.gdr = gdr(result.decision_log);
            const auto tokens = ledger.total();
            rec.prompt_tokens = tokens.prompt_tokens;
            rec.completion_tokens = tokens.completion_tokens;
            rec.flags = result.flags;
            rec.decision_log = "logs/" + stem + ".jsonl";
            rec.schedule = "schedules/" + stem + ".csv";
            write_text(out / rec.decision_log, decision_log_to_jsonl(result.decision_log, *instance));
            write_text(out / rec.schedule, schedule_to_csv(result.schedule, *instance));
            if (config.gantt) write_text(out / "gantt" / (stem + ".svg"), export_gantt(result.schedule, *instance));

            std::lock_guard lock(mutex);
            journal << to_json(rec).dump() << "\n";
            journal.flush();
            done[cell.key()] = rec;
            ++summary.executed;
            if (options.log) {
                *options.log << "[cell] " << cell.key() << " makespan=" << to_units(rec.makespan) << "\n";
            }
        } catch (const std::exception& e) {
            std::lock_guard lock(mutex);
            summary.failures.push_back(cell.key() + ": " + e.what());
            if (options.log) *options.log << "[fail] " << cell.key() << ": " << e.what() << "\n";
        }
    });
    journal.close();
    std::sort(summary.failures.begin(), summary.failures.end());

    std::vector<RunRecord> records;
    for (const auto& c : cells) {
        if (const auto it = done.find(c.key()); it != done.end()) records.push_back(it->second);
    }
    if (records.empty()) return summary;
    summary.report = aggregate(records, {default_reference(config)});
    for (const auto& f : load_flags) summary.report.flags.push_back(f);
    std::sort(summary.report.flags.begin(), summary.report.flags.end());

    summary.report_json = out / "report.json";
    summary.report_csv = out / "report.csv";
    summary.summary_svg = out / "summary.svg";
    write_text(summary.report_json, report_to_json(summary.report).dump(2) + "\n");
    write_text(summary.report_csv, report_to_csv(summary.report));
    write_text(summary.summary_svg, report_summary_svg(summary.report));
    return summary;
}

void print_dry_run(const ExperimentConfig& config, std::ostream& os) {
    config.validate();
    std::vector<std::string> flags;
    const auto instances = load_experiment_suite(config, flags);
    const auto cells = execution_matrix(config, instances);
    os << "suite: " << config.suite.string() << " (" << instances.size() << " instances)\n";
    os << "policies:";
    for (const auto& p : config.policies) os << " " << p.label();
    os << "\nruns per pair: " << config.runs_per_pair << "\nbackend: " << to_string(config.backend.kind)
       << "\nreflection: L=" << config.reflection.max_level << " R=" << config.reflection.rollouts_per_level
       << " h0=" << config.reflection.base_horizon << "\nout: " << config.out.string() << "\n";
    for (const auto& f : flags) os << "flag: " << f << "\n";
    os << "cells: " << cells.size() << "\n";
    for (const auto& c : cells) {
        os << c.instance_id << "\t" << c.policy << "\t" << c.run_index << "\t" << to_hex(c.seed) << "\n";
    }
}

namespace {

std::string ablation_svg(const std::vector<std::pair<int, double>>& l0, double full, const std::string& full_label) {
    double max_v = full;
    for (const auto& [r, v] : l0) max_v = std::max(max_v, v);
    max_v = std::max(max_v * 1.15, 0.1);
    const double left = 60, top = 30, w = 480, h = 240;
    const auto x_of = [&](std::size_t i) {
        return left + (l0.size() <= 1 ? w / 2 : w * static_cast<double>(i) / static_cast<double>(l0.size() - 1));
    };
    const auto y_of = [&](double v) { return top + h - h * v / max_v; };
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width="600" height="320" font-family="sans-serif" font-size="11">)"
       << "\n";
    os << R"(<rect width="100%" height="100%" fill="white"/>)" << "\n";
    os << R"(<text x="10" y="18">mean RPD (%) vs search breadth R</text>)" << "\n";
    os << R"(<line x1=")" << left << R"(" y1=")" << top + h << R"(" x2=")" << left + w << R"(" y2=")" << top + h
       << R"(" stroke="black"/>)" << "\n";
    os << R"(<polyline fill="none" stroke="#4c78a8" stroke-width="2" points=")";
    for (std::size_t i = 0; i < l0.size(); ++i) os << (i ? " " : "") << x_of(i) << "," << y_of(l0[i].second);
    os << R"("/>)" << "\n";
    for (std::size_t i = 0; i < l0.size(); ++i) {
        os << R"(<circle cx=")" << x_of(i) << R"(" cy=")" << y_of(l0[i].second) << R"(" r="3" fill="#4c78a8"/>)"
           << "\n";
        os << R"(<text x=")" << x_of(i) - 8 << R"(" y=")" << top + h + 16 << R"(">R=)" << l0[i].first << "</text>\n";
    }
    os << R"(<line x1=")" << left << R"(" y1=")" << y_of(full) << R"(" x2=")" << left + w << R"(" y2=")"
       << y_of(full) << R"(" stroke="#e45756" stroke-dasharray="5,3"/>)" << "\n";
    os << R"(<text x=")" << left + 4 << R"(" y=")" << y_of(full) - 4 << R"(" fill="#e45756">)" << full_label << " "
       << full << "</text>\n";
    os << R"(<text x=")" << left + w - 80 << R"(" y=")" << top + 12 << R"(" fill="#4c78a8">L=0</text>)" << "\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace

RunSummary cmd_ablate(ExperimentConfig config, const AblationOptions& ablation, const RunOptions& options) {
    if (ablation.breadths.empty()) throw ConfigError("ablate: no breadths given");
    PolicySpec full{PolicyKind::ReflecSched, {}, {}, config.reflection.max_level,
                    config.reflection.rollouts_per_level, {}};
    config.policies = {full};
    for (int r : ablation.breadths) {
        if (r < 1) throw ConfigError("ablate: breadth must be >= 1");
        config.policies.push_back({PolicyKind::ReflecSched, {}, {}, 0, r, {}});
    }
    config.reference = full.label();
    auto summary = cmd_run(config, options);
    if (summary.report.mean_rpd.empty()) return summary;

    std::vector<std::pair<int, double>> l0;
    json l0_json = json::object();
    for (int r : ablation.breadths) {
        const auto label = PolicySpec{PolicyKind::ReflecSched, {}, {}, 0, r, {}}.label();
        const auto it = summary.report.mean_rpd.find(label);
        if (it == summary.report.mean_rpd.end()) continue;
        l0.emplace_back(r, it->second);
        l0_json[std::to_string(r)] = it->second;
    }
    const double full_rpd = summary.report.mean_rpd.contains(full.label()) ? summary.report.mean_rpd.at(full.label()) : 0;
    bool full_no_worse = true;
    for (const auto& [r, v] : l0) full_no_worse = full_no_worse && full_rpd <= v;
    // Whether L=0 keeps improving beyond R=8; reported, not enforced.
    std::optional<bool> improves_beyond_8;
    for (std::size_t i = 0; i + 1 < l0.size(); ++i) {
        if (l0[i].first >= 8) {
            const bool better = l0.back().second < l0[i].second;
            improves_beyond_8 = better;
            break;
        }
    }
    json doc = {{"full", {{"policy", full.label()}, {"mean_rpd", full_rpd}}},
                {"l0_mean_rpd", l0_json},
                {"full_no_worse_than_every_l0", full_no_worse},
                {"l0_improves_beyond_r8", improves_beyond_8 ? json(*improves_beyond_8) : json()}};
    write_text(config.out / "ablation.json", doc.dump(2) + "\n");
    write_text(config.out / "ablation.svg", ablation_svg(l0, full_rpd, full.label()));
    return summary;
}

namespace {

json distribution(std::vector<double> v) {
    if (v.empty()) return nullptr;
    std::sort(v.begin(), v.end());
    const auto q = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
    };
    double sum = 0;
    for (double x : v) sum += x;
    return {{"n", v.size()}, {"min", v.front()}, {"q1", q(0.25)},  {"median", q(0.5)},
            {"q3", q(0.75)}, {"max", v.back()}, {"mean", sum / static_cast<double>(v.size())}};
}

}  // namespace

json cmd_diagnose(ExperimentConfig config, const RunOptions& options) {
    config.policies = {
        {PolicyKind::LlmDirect, {}, {}, {}, {}, {}},   {PolicyKind::LlmDirectNoStatic, {}, {}, {}, {}, {}},
        {PolicyKind::ReflecSched, {}, {}, {}, {}, {}}, {PolicyKind::BaseRandomized, {}, {}, {}, {}, {}},
        {PolicyKind::Rule, {}, RuleId::EET, {}, {}, {}},
    };
    config.reference = "LLM-Direct";
    RunOptions opts = options;
    opts.decision_profile = SamplingProfile::diagnostic_vote();
    const auto summary = cmd_run(config, opts);
    const auto& rep = summary.report;

    // (a) makespan without the static block relative to with it.
    std::vector<double> ratios;
    for (const auto& inst : rep.instances) {
        const auto& row = rep.mean_makespan.at(inst);
        if (row.contains("LLM-Direct") && row.contains("LLM-Direct-NoStatic") && row.at("LLM-Direct") > 0) {
            ratios.push_back(row.at("LLM-Direct-NoStatic") / row.at("LLM-Direct"));
        }
    }

    // (b) deviation from the designated rule on curated instances.
    std::vector<std::string> flags;
    json pdr = json::object();
    const auto instances = load_experiment_suite(config, flags);
    std::map<std::string, std::vector<double>> dev;
    for (const auto& li : instances) {
        if (!li.designated) continue;
        const double ref = to_units(rule_makespan(li.instance, *li.designated));
        const auto row = rep.mean_makespan.find(li.instance->id);
        if (row == rep.mean_makespan.end() || ref <= 0) continue;
        for (const auto& [policy, m] : row->second) dev[policy].push_back(rpd(m, ref));
    }
    for (const auto& [policy, v] : dev) pdr[policy] = distribution(v)["mean"];

    json doc = {{"static_block_ratio", distribution(ratios)},
                {"pdr_utilization_rpd", dev.empty() ? json() : pdr},
                {"gdr", rep.mean_gdr},
                {"sampling", {{"temperature", opts.decision_profile.temperature},
                              {"samples", opts.decision_profile.samples}}},
                {"failures", summary.failures}};
    write_text(config.out / "diagnose.json", doc.dump(2) + "\n");
    return doc;
}

}  // namespace reflecsched
