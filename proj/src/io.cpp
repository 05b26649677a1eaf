#include "reflecsched/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace reflecsched {

using nlohmann::json;

namespace {

json job_to_json(const Job& job) {
    json ops = json::array();
    for (const auto& op : job.operations) {
        json eligible = json::object();
        for (const auto& [m, pt] : op.eligible) eligible[std::to_string(m)] = pt;
        ops.push_back({{"eligible", std::move(eligible)}});
    }
    return {{"job_id", job.id}, {"arrival_time", job.arrival_time}, {"operations", std::move(ops)}};
}

// Schema reader that tracks a JSON pointer for diagnostics.
class Reader {
public:
    const json& field(const json& obj, const std::string& where, const char* key) const {
        if (!obj.is_object()) throw FormatError(where, "expected an object");
        const auto it = obj.find(key);
        if (it == obj.end()) throw FormatError(where + "/" + key, "missing field");
        return *it;
    }

    std::string string_field(const json& obj, const std::string& where, const char* key) const {
        const json& v = field(obj, where, key);
        if (!v.is_string()) throw FormatError(where + "/" + key, "expected a string");
        return v.get<std::string>();
    }

    std::int64_t int_field(const json& obj, const std::string& where, const char* key) const {
        const json& v = field(obj, where, key);
        if (!v.is_number_integer()) throw FormatError(where + "/" + key, "expected an integer");
        return v.get<std::int64_t>();
    }

    const json& array_field(const json& obj, const std::string& where, const char* key) const {
        const json& v = field(obj, where, key);
        if (!v.is_array()) throw FormatError(where + "/" + key, "expected an array");
        return v;
    }

    Job job(const json& doc, const std::string& where, int num_machines) const {
        Job job;
        job.id = string_field(doc, where, "job_id");
        job.arrival_time = int_field(doc, where, "arrival_time");
        if (job.arrival_time < 0) throw FormatError(where + "/arrival_time", "must be non-negative");
        const json& ops = array_field(doc, where, "operations");
        if (ops.empty()) throw FormatError(where + "/operations", "job needs at least one operation");
        for (std::size_t k = 0; k < ops.size(); ++k) {
            const std::string op_where = where + "/operations/" + std::to_string(k);
            const json& eligible = field(ops[k], op_where, "eligible");
            if (!eligible.is_object() || eligible.empty()) {
                throw FormatError(op_where + "/eligible", "expected a non-empty object");
            }
            Operation op;
            for (const auto& [key, value] : eligible.items()) {
                const std::string m_where = op_where + "/eligible/" + key;
                int m = -1;
                const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), m);
                if (ec != std::errc{} || ptr != key.data() + key.size() || m < 0) {
                    throw FormatError(m_where, "machine id must be a non-negative integer");
                }
                if (m >= num_machines) throw FormatError(m_where, "machine id out of range");
                if (!value.is_number_integer() || value.get<std::int64_t>() <= 0) {
                    throw FormatError(m_where, "processing time must be a positive integer");
                }
                op.eligible[m] = value.get<Time>();
            }
            job.operations.push_back(std::move(op));
        }
        return job;
    }
};

}  // namespace

json instance_to_json(const Instance& instance) {
    json jobs = json::array();
    for (const auto& job : instance.initial_jobs) jobs.push_back(job_to_json(job));
    json events = json::array();
    for (const auto& event : instance.events) {
        json kind;
        if (const auto* a = event.arrival()) {
            kind = {{"type", "job_arrival"}, {"job", job_to_json(a->job)}};
        } else {
            const auto& b = *event.breakdown();
            kind = {{"type", "breakdown"},
                    {"machine", b.machine},
                    {"start_time", b.start_time},
                    {"repair_duration", b.repair_duration}};
        }
        events.push_back({{"event_id", event.id}, {"reveal_time", event.reveal_time}, {"kind", std::move(kind)}});
    }
    json doc = {{"instance_id", instance.id},
                {"num_machines", instance.num_machines},
                {"scale_tag", std::string(to_string(instance.scale_tag))},
                {"jobs", std::move(jobs)},
                {"events", std::move(events)}};
    if (!instance.metadata.empty()) doc["metadata"] = instance.metadata;
    return doc;
}

Instance instance_from_json(const json& doc) {
    const Reader r;
    Instance inst;
    inst.id = r.string_field(doc, "", "instance_id");
    inst.num_machines = static_cast<int>(r.int_field(doc, "", "num_machines"));
    if (inst.num_machines <= 0) throw FormatError("/num_machines", "must be positive");
    const auto tag = parse_scale_tag(r.string_field(doc, "", "scale_tag"));
    if (!tag) throw FormatError("/scale_tag", "expected \"Normal\" or \"Small\"");
    inst.scale_tag = *tag;

    const json& jobs = r.array_field(doc, "", "jobs");
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const std::string where = "/jobs/" + std::to_string(i);
        Job job = r.job(jobs[i], where, inst.num_machines);
        if (job.arrival_time != 0) throw FormatError(where + "/arrival_time", "initial jobs arrive at 0");
        inst.initial_jobs.push_back(std::move(job));
    }

    const json& events = r.array_field(doc, "", "events");
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::string where = "/events/" + std::to_string(i);
        DynamicEvent ev;
        ev.id = r.string_field(events[i], where, "event_id");
        ev.reveal_time = r.int_field(events[i], where, "reveal_time");
        const json& kind = r.field(events[i], where, "kind");
        const std::string kind_where = where + "/kind";
        const std::string type = r.string_field(kind, kind_where, "type");
        if (type == "job_arrival") {
            Job job = r.job(r.field(kind, kind_where, "job"), kind_where + "/job", inst.num_machines);
            if (job.arrival_time != ev.reveal_time) {
                throw FormatError(kind_where + "/job/arrival_time", "must equal the event's reveal_time");
            }
            ev.kind = JobArrival{std::move(job)};
        } else if (type == "breakdown") {
            MachineBreakdown b;
            b.machine = static_cast<MachineId>(r.int_field(kind, kind_where, "machine"));
            b.start_time = r.int_field(kind, kind_where, "start_time");
            b.repair_duration = r.int_field(kind, kind_where, "repair_duration");
            if (b.machine < 0 || b.machine >= inst.num_machines) {
                throw FormatError(kind_where + "/machine", "machine id out of range");
            }
            if (b.start_time < ev.reveal_time) throw FormatError(kind_where + "/start_time", "before reveal_time");
            if (b.repair_duration <= 0) throw FormatError(kind_where + "/repair_duration", "must be positive");
            ev.kind = b;
        } else {
            throw FormatError(kind_where + "/type", "unknown event type '" + type + "'");
        }
        inst.events.push_back(std::move(ev));
    }

    if (const auto it = doc.find("metadata"); it != doc.end()) {
        if (!it->is_object()) throw FormatError("/metadata", "expected an object");
        for (const auto& [key, value] : it->items()) {
            if (!value.is_string()) throw FormatError("/metadata/" + key, "expected a string");
            inst.metadata[key] = value.get<std::string>();
        }
    }

    if (const auto problems = check_instance(inst); !problems.empty()) throw FormatError("", problems.front());
    return inst;
}

std::string canonical_json(const Instance& instance) { return instance_to_json(instance).dump(); }

Instance parse_instance(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError("byte " + std::to_string(e.byte), "invalid JSON");
    }
    return instance_from_json(doc);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

Instance read_instance(const std::filesystem::path& path) { return parse_instance(read_text(path)); }

void write_instance(const Instance& instance, const std::filesystem::path& path) {
    write_text(path, canonical_json(instance) + "\n");
}

std::string schedule_to_csv(const ScheduleRecord& schedule, const Instance& instance) {
    const auto jobs = all_jobs(instance);
    std::ostringstream os;
    os << "job_id,op_index,machine_id,start,end,interruptions\n";
    for (const auto& e : schedule.entries) {
        os << (e.job < jobs.size() ? jobs[e.job].get().id : "#" + std::to_string(e.job)) << ',' << e.op_index << ','
           << e.machine << ',' << e.start << ',' << e.end << ',';
        for (std::size_t i = 0; i < e.interruptions.size(); ++i) {
            if (i) os << ';';
            os << e.interruptions[i].begin << '-' << e.interruptions[i].end;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

std::int64_t parse_int(std::string_view text, const std::string& where) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) throw FormatError(where, "expected an integer");
    return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

ScheduleRecord schedule_from_csv(const std::string& text, const Instance& instance) {
    ScheduleRecord schedule;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 || line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        const auto cols = split(line, ',');
        if (cols.size() != 6) throw FormatError(where, "expected 6 columns");
        ScheduleEntry e;
        const auto job = find_job(instance, cols[0]);
        if (!job) throw FormatError(where, "unknown job '" + cols[0] + "'");
        e.job = *job;
        e.op_index = static_cast<int>(parse_int(cols[1], where));
        e.machine = static_cast<MachineId>(parse_int(cols[2], where));
        e.start = parse_int(cols[3], where);
        e.end = parse_int(cols[4], where);
        if (!cols[5].empty()) {
            for (const auto& pair : split(cols[5], ';')) {
                const auto dash = pair.find('-', 1);
                if (dash == std::string::npos) throw FormatError(where, "malformed interruption '" + pair + "'");
                e.interruptions.push_back({parse_int(std::string_view(pair).substr(0, dash), where),
                                           parse_int(std::string_view(pair).substr(dash + 1), where)});
            }
        }
        schedule.entries.push_back(std::move(e));
    }
    return schedule;
}

}  // namespace reflecsched
