#include "reflecsched/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace reflecsched {

double rpd(double makespan, double best) {
    if (!(best > 0.0)) throw std::invalid_argument("rpd: best makespan must be positive");
    return 100.0 * (makespan - best) / best;
}

double win_rate(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("win_rate: vectors differ in length");
    if (a.empty()) throw std::invalid_argument("win_rate: no pairs");
    std::size_t wins = 0;
    for (std::size_t i = 0; i < a.size(); ++i) wins += a[i] < b[i] ? 1 : 0;
    return 100.0 * static_cast<double>(wins) / static_cast<double>(a.size());
}

double gdr(std::span<const DecisionPoint> log) {
    if (log.empty()) throw std::invalid_argument("gdr: empty decision log");
    std::size_t greedy = 0;
    for (const auto& p : log) {
        if (p.greedy_set.empty()) throw std::invalid_argument("gdr: decision point without greedy set");
        greedy += std::find(p.greedy_set.begin(), p.greedy_set.end(), p.chosen) != p.greedy_set.end() ? 1 : 0;
    }
    return static_cast<double>(greedy) / static_cast<double>(log.size());
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

WilcoxonOutcome wilcoxon_signed_rank(std::span<const double> differences, WilcoxonMethod method) {
    if (differences.empty()) throw std::invalid_argument("wilcoxon_signed_rank: no pairs");
    std::vector<double> d;
    for (double x : differences) {
        if (!std::isfinite(x)) throw std::invalid_argument("wilcoxon_signed_rank: non-finite difference");
        if (x != 0.0) d.push_back(x);
    }
    if (d.empty()) return WilcoxonNoSignal{differences.size()};
    const std::size_t m = d.size();

    // Mid-ranks of |d|, doubled so they stay integral.
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<std::int64_t> rank2(m);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        while (j + 1 < m && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = static_cast<std::int64_t>(i + j + 2);
        i = j + 1;
    }

    WilcoxonResult r;
    r.n = m;
    std::int64_t plus2 = 0;
    std::int64_t total2 = 0;
    for (std::size_t i = 0; i < m; ++i) {
        total2 += rank2[i];
        if (d[i] > 0) plus2 += rank2[i];
    }
    r.w_plus = static_cast<double>(plus2) / 2.0;
    r.w_minus = static_cast<double>(total2 - plus2) / 2.0;
    r.statistic = std::min(r.w_plus, r.w_minus);

    const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && m <= 20);
    if (exact) {
        if (m > 30) throw std::invalid_argument("wilcoxon_signed_rank: exact method limited to 30 pairs");
        // Number of sign assignments reaching each doubled W+.
        std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
        ways[0] = 1.0;
        std::int64_t reach = 0;
        for (std::size_t i = 0; i < m; ++i) {
            reach += rank2[i];
            for (std::int64_t s = reach; s >= rank2[i]; --s) {
                ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - rank2[i])];
            }
        }
        const double all = std::ldexp(1.0, static_cast<int>(m));
        double ge = 0.0;
        double le = 0.0;
        for (std::int64_t s = 0; s <= total2; ++s) {
            if (s >= plus2) ge += ways[static_cast<std::size_t>(s)];
            if (s <= plus2) le += ways[static_cast<std::size_t>(s)];
        }
        r.p_greater = ge / all;
        r.p_less = le / all;
        r.exact = true;
    } else {
        const auto md = static_cast<double>(m);
        const double mean = md * (md + 1.0) / 4.0;
        const double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - tie_term / 48.0;
        const double sd = std::sqrt(var);
        r.p_greater = 1.0 - normal_cdf((r.w_plus - mean - 0.5) / sd);
        r.p_less = normal_cdf((r.w_plus - mean + 0.5) / sd);
        r.p_greater = std::clamp(r.p_greater, 0.0, 1.0);
        r.p_less = std::clamp(r.p_less, 0.0, 1.0);
    }
    r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, r.p_less));
    return r;
}

WilcoxonOutcome wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
    if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: vectors differ in length");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return wilcoxon_signed_rank(d, method);
}

nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json doc = {{"instance_id", r.instance_id},
                          {"policy", r.policy},
                          {"run_index", r.run_index},
                          {"makespan", r.makespan},
                          {"prompt_tokens", r.prompt_tokens},
                          {"completion_tokens", r.completion_tokens},
                          {"flags", r.flags},
                          {"decision_log", r.decision_log},
                          {"schedule", r.schedule}};
    doc["gdr"] = r.gdr ? nlohmann::json(*r.gdr) : nlohmann::json();
    return doc;
}

RunRecord run_record_from_json(const nlohmann::json& doc) {
    RunRecord r;
    r.instance_id = doc.at("instance_id").get<std::string>();
    r.policy = doc.at("policy").get<std::string>();
    r.run_index = doc.at("run_index").get<int>();
    r.makespan = doc.at("makespan").get<Time>();
    if (doc.contains("gdr") && !doc["gdr"].is_null()) r.gdr = doc["gdr"].get<double>();
    r.prompt_tokens = doc.value("prompt_tokens", std::int64_t{0});
    r.completion_tokens = doc.value("completion_tokens", std::int64_t{0});
    r.flags = doc.value("flags", std::vector<std::string>{});
    r.decision_log = doc.value("decision_log", std::string{});
    r.schedule = doc.value("schedule", std::string{});
    return r;
}

MetricsReport aggregate(std::span<const RunRecord> records, const AggregateConfig& config) {
    if (records.empty()) throw std::invalid_argument("aggregate: no run records");
    MetricsReport rep;
    std::map<std::string, std::map<std::string, std::vector<double>>> spans;
    std::map<std::string, std::vector<double>> gdrs;
    std::set<std::string> policies;
    std::set<std::string> instances;
    for (const auto& r : records) {
        spans[r.instance_id][r.policy].push_back(to_units(r.makespan));
        policies.insert(r.policy);
        instances.insert(r.instance_id);
        if (r.gdr) gdrs[r.policy].push_back(*r.gdr);
        rep.tokens[r.policy] += r.prompt_tokens + r.completion_tokens;
        for (const auto& f : r.flags) {
            rep.flags.push_back(r.instance_id + "/" + r.policy + "/" + std::to_string(r.run_index) + ": " + f);
        }
    }
    rep.policies.assign(policies.begin(), policies.end());
    rep.instances.assign(instances.begin(), instances.end());
    if (!config.reference.empty() && !policies.contains(config.reference)) {
        rep.flags.push_back("reference policy " + config.reference + " has no records");
    }

    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };

    std::map<std::string, std::vector<double>> rpd_by_policy;
    for (const auto& inst : rep.instances) {
        const auto& row = spans[inst];
        // Best makespan over every policy and every run.
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [p, v] : row) best = std::min(best, *std::min_element(v.begin(), v.end()));
        rep.best[inst] = best;
        for (const auto& p : rep.policies) {
            const auto it = row.find(p);
            if (it == row.end()) {
                rep.flags.push_back("missing cell: " + inst + " x " + p);
                continue;
            }
            auto& runs = rep.run_rpd[inst][p];
            for (double x : it->second) runs.push_back(rpd(x, best));
            const double m = mean(it->second);
            const double value = mean(runs);
            rep.rpd[inst][p] = value;
            rep.mean_makespan[inst][p] = m;
            rpd_by_policy[p].push_back(value);
        }
    }
    for (const auto& [p, v] : rpd_by_policy) rep.mean_rpd[p] = mean(v);
    for (const auto& [p, v] : gdrs) rep.mean_gdr[p] = mean(v);

    const auto pair_stats = [&](const std::string& a, const std::string& b) {
        PairStats ps;
        ps.a = a;
        ps.b = b;
        std::vector<double> va;
        std::vector<double> vb;
        for (const auto& inst : rep.instances) {
            const auto& row = rep.mean_makespan[inst];
            if (row.contains(a) && row.contains(b)) {
                va.push_back(row.at(a));
                vb.push_back(row.at(b));
            }
        }
        ps.instances = va.size();
        if (!va.empty()) {
            ps.win_rate = win_rate(va, vb);
            const auto outcome = wilcoxon_signed_rank(va, vb);
            if (const auto* w = std::get_if<WilcoxonResult>(&outcome)) ps.wilcoxon = *w;
        }
        return ps;
    };
    if (!config.reference.empty()) {
        if (policies.contains(config.reference)) {
            for (const auto& p : rep.policies) {
                if (p != config.reference) rep.pairs.push_back(pair_stats(config.reference, p));
            }
        }
    } else {
        for (std::size_t i = 0; i < rep.policies.size(); ++i) {
            for (std::size_t j = i + 1; j < rep.policies.size(); ++j) {
                rep.pairs.push_back(pair_stats(rep.policies[i], rep.policies[j]));
            }
        }
    }
    std::sort(rep.flags.begin(), rep.flags.end());
    return rep;
}

nlohmann::json report_to_json(const MetricsReport& rep) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& ps : rep.pairs) {
        nlohmann::json item = {{"a", ps.a}, {"b", ps.b}, {"win_rate", ps.win_rate}, {"instances", ps.instances}};
        if (ps.wilcoxon) {
            item["wilcoxon"] = {{"statistic", ps.wilcoxon->statistic}, {"w_plus", ps.wilcoxon->w_plus},
                                {"w_minus", ps.wilcoxon->w_minus},     {"n", ps.wilcoxon->n},
                                {"p_two_sided", ps.wilcoxon->p_two_sided}, {"p_a_better", ps.wilcoxon->p_less},
                                {"p_b_better", ps.wilcoxon->p_greater}, {"exact", ps.wilcoxon->exact}};
        } else {
            item["wilcoxon"] = nullptr;
        }
        pairs.push_back(std::move(item));
    }
    return {{"policies", rep.policies},   {"instances", rep.instances}, {"best_makespan", rep.best},
            {"rpd", rep.rpd},             {"run_rpd", rep.run_rpd},     {"mean_makespan", rep.mean_makespan},
            {"mean_rpd", rep.mean_rpd},   {"mean_gdr", rep.mean_gdr},   {"tokens", rep.tokens},
            {"pairs", std::move(pairs)}, {"flags", rep.flags}};
}

std::string report_to_csv(const MetricsReport& rep) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "instance_id,policy,mean_makespan,best_makespan,rpd\n";
    for (const auto& inst : rep.instances) {
        const auto mm = rep.mean_makespan.find(inst);
        const auto rr = rep.rpd.find(inst);
        if (mm == rep.mean_makespan.end()) continue;
        for (const auto& p : rep.policies) {
            if (!mm->second.contains(p)) continue;
            os << inst << "," << p << "," << mm->second.at(p) << "," << rep.best.at(inst) << "," << rr->second.at(p)
               << "\n";
        }
    }
    return os.str();
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v, int precision = 2) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

}  // namespace

std::string report_summary_svg(const MetricsReport& rep) {
    const double w = 120.0 * static_cast<double>(std::max<std::size_t>(rep.policies.size(), 1)) + 120.0;
    const double h = 360.0;
    const double left = 60.0;
    const double top = 30.0;
    const double plot_h = 250.0;
    double max_rpd = 1.0;
    for (const auto& [p, v] : rep.mean_rpd) max_rpd = std::max(max_rpd, v);
    max_rpd *= 1.1;

    std::map<std::string, double> wins;
    for (const auto& ps : rep.pairs) {
        if (ps.a != ps.b) wins[ps.b] = ps.win_rate;
    }

    std::ostringstream os;
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << num(w, 0) << R"(" height=")" << num(h, 0)
       << R"(" font-family="sans-serif" font-size="11">)" << "\n";
    os << R"(<rect width="100%" height="100%" fill="white"/>)" << "\n";
    os << R"(<line x1=")" << left << R"(" y1=")" << top + plot_h << R"(" x2=")" << w - 60 << R"(" y2=")"
       << top + plot_h << R"(" stroke="black"/>)" << "\n";
    os << R"(<text x="10" y=")" << top - 10 << R"(">mean RPD (%) bars, win rate (%) line</text>)" << "\n";
    std::vector<std::pair<double, double>> line;
    for (std::size_t i = 0; i < rep.policies.size(); ++i) {
        const auto& p = rep.policies[i];
        const double v = rep.mean_rpd.contains(p) ? rep.mean_rpd.at(p) : 0.0;
        const double bh = plot_h * v / max_rpd;
        const double x = left + 120.0 * static_cast<double>(i) + 20.0;
        os << R"(<rect x=")" << num(x) << R"(" y=")" << num(top + plot_h - bh) << R"(" width="80" height=")"
           << num(bh) << R"(" fill="#4c78a8"/>)" << "\n";
        os << R"(<text x=")" << num(x) << R"(" y=")" << num(top + plot_h - bh - 4) << R"(">)" << num(v) << "</text>\n";
        os << R"(<text x=")" << num(x) << R"(" y=")" << num(top + plot_h + 16) << R"(">)" << xml_escape(p)
           << "</text>\n";
        if (const auto it = wins.find(p); it != wins.end()) {
            line.emplace_back(x + 40.0, top + plot_h - plot_h * it->second / 100.0);
        }
    }
    if (!line.empty()) {
        os << R"(<polyline fill="none" stroke="#e45756" stroke-width="2" points=")";
        for (std::size_t i = 0; i < line.size(); ++i) os << (i ? " " : "") << num(line[i].first) << "," << num(line[i].second);
        os << R"("/>)" << "\n";
        for (const auto& [x, y] : line) {
            os << R"(<circle cx=")" << num(x) << R"(" cy=")" << num(y) << R"(" r="3" fill="#e45756"/>)" << "\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

std::string export_gantt(const ScheduleRecord& schedule, const Instance& instance) {
    const auto report = validate_schedule(instance, schedule);
    if (!report.valid()) {
        throw std::invalid_argument("export_gantt: invalid schedule: " + report.violations.front().detail);
    }
    const auto jobs = all_jobs(instance);
    const Time makespan = std::max<Time>(compute_makespan(schedule), 1);
    Time horizon = makespan;
    const auto windows = breakdown_windows(instance);
    for (const auto& lane : windows) {
        for (const auto& w : lane) horizon = std::max(horizon, w.end);
    }

    const double left = 50.0;
    const double width = 900.0;
    const double lane_h = 28.0;
    const double top = 30.0;
    const double height = top + lane_h * instance.num_machines + 40.0;
    const auto x_of = [&](Time t) { return left + width * static_cast<double>(t) / static_cast<double>(horizon); };
    const auto y_of = [&](MachineId m) { return top + lane_h * m; };

    std::ostringstream os;
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << num(left + width + 40, 0) << R"(" height=")"
       << num(height, 0) << R"(" font-family="sans-serif" font-size="10">)" << "\n";
    os << R"svg(<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">)svg"
       << R"(<line x1="0" y1="0" x2="0" y2="6" stroke="#c00" stroke-width="2"/></pattern></defs>)" << "\n";
    os << R"(<rect width="100%" height="100%" fill="white"/>)" << "\n";
    os << R"(<text x="10" y="18">)" << xml_escape(instance.id) << "</text>\n";
    for (int m = 0; m < instance.num_machines; ++m) {
        os << R"(<text x="10" y=")" << num(y_of(m) + lane_h * 0.65) << R"(">M)" << m << "</text>\n";
        os << R"(<line x1=")" << left << R"(" y1=")" << num(y_of(m) + lane_h) << R"(" x2=")" << left + width
           << R"(" y2=")" << num(y_of(m) + lane_h) << R"(" stroke="#ddd"/>)" << "\n";
    }
    for (int m = 0; m < instance.num_machines; ++m) {
        for (const auto& w : windows[static_cast<std::size_t>(m)]) {
            os << R"(<rect class="breakdown" x=")" << num(x_of(w.begin)) << R"(" y=")" << num(y_of(m) + 2)
               << R"(" width=")" << num(x_of(w.end) - x_of(w.begin)) << R"(" height=")" << num(lane_h - 4)
               << R"svg(" fill="url(#hatch)" stroke="#c00"/>)svg" << "\n";
        }
    }
    for (const auto& e : schedule.entries) {
        const double hue = std::fmod(static_cast<double>(e.job) * 57.0, 360.0);
        const std::string label = xml_escape(jobs[e.job].get().id) + "." + std::to_string(e.op_index);
        bool first = true;
        for (const auto& iv : e.active_intervals()) {
            os << R"(<rect class="op" x=")" << num(x_of(iv.begin)) << R"(" y=")" << num(y_of(e.machine) + 4)
               << R"(" width=")" << num(x_of(iv.end) - x_of(iv.begin)) << R"(" height=")" << num(lane_h - 8)
               << R"svg(" fill="hsl()svg" << num(hue, 0) << R"svg(,60%,70%)" stroke="black" stroke-width="0.5"/>)svg" << "\n";
            if (first) {
                os << R"(<text x=")" << num(x_of(iv.begin) + 2) << R"(" y=")" << num(y_of(e.machine) + lane_h * 0.62)
                   << R"(">)" << label << "</text>\n";
                first = false;
            }
        }
    }
    const double mx = x_of(makespan);
    const double bottom = top + lane_h * instance.num_machines;
    os << R"(<line x1=")" << num(mx) << R"(" y1=")" << top << R"(" x2=")" << num(mx) << R"(" y2=")" << num(bottom + 6)
       << R"(" stroke="black" stroke-dasharray="4,2"/>)" << "\n";
    os << R"(<text class="makespan" x=")" << num(mx - 40) << R"(" y=")" << num(bottom + 20) << R"(">makespan )"
       << num(to_units(makespan)) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace reflecsched
