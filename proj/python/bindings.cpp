#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reflecsched/bench.hpp"
#include "reflecsched/decision.hpp"
#include "reflecsched/eval.hpp"
#include "reflecsched/io.hpp"
#include "reflecsched/sim.hpp"

namespace py = pybind11;
using namespace reflecsched;

namespace {

RuleId rule_from(const std::string& name) {
    const auto r = parse_rule(name);
    if (!r) throw py::value_error("unknown rule: " + name);
    return *r;
}

ScaleTag scale_from(const std::string& name) {
    const auto s = parse_scale_tag(name);
    if (!s) throw py::value_error("unknown scale: " + name);
    return *s;
}

py::dict action_dict(const Action& a, const ShopState& st) {
    py::dict d;
    d["job"] = st.job(a.job).id;
    d["op_index"] = a.op_index;
    d["machine"] = a.machine;
    d["processing_time"] = to_units(st.processing_time(a));
    d["completion"] = to_units(st.completion_estimate(a));
    return d;
}

py::dict result_dict(const RunResult& r, const Instance& inst) {
    py::dict d;
    d["makespan"] = to_units(r.makespan);
    d["schedule_csv"] = schedule_to_csv(r.schedule, inst);
    d["decision_log"] = decision_log_to_jsonl(r.decision_log, inst);
    d["decisions"] = r.decision_log.size();
    d["gdr"] = r.decision_log.empty() ? py::object(py::none()) : py::object(py::float_(gdr(r.decision_log)));
    d["flags"] = r.flags;
    return d;
}

std::unique_ptr<Policy> make_policy(const std::string& name, int max_level, int rollouts, int horizon) {
    if (name == "ReflecSched") {
        ReflectionConfig c;
        c.max_level = max_level;
        c.rollouts_per_level = rollouts;
        c.base_horizon = horizon;
        c.validate();
        return std::make_unique<ReflecSchedPolicy>(c, std::make_shared<FaithfulMockReflector>(),
                                                   std::make_shared<FaithfulMockDecider>());
    }
    if (name == "LLM-Direct") return std::make_unique<LlmDirectPolicy>(std::make_shared<FaithfulMockDecider>());
    if (name == "BaseRandomized") return std::make_unique<BaseRandomizedPolicy>();
    return std::make_unique<PureRulePolicy>(rule_from(name));
}

py::dict wilcoxon_dict(const WilcoxonOutcome& out) {
    py::dict d;
    if (const auto* none = std::get_if<WilcoxonNoSignal>(&out)) {
        d["n"] = none->n;
        d["no_signal"] = true;
        return d;
    }
    const auto& w = std::get<WilcoxonResult>(out);
    d["no_signal"] = false;
    d["n"] = w.n;
    d["statistic"] = w.statistic;
    d["w_plus"] = w.w_plus;
    d["w_minus"] = w.w_minus;
    d["p_two_sided"] = w.p_two_sided;
    d["p_greater"] = w.p_greater;
    d["p_less"] = w.p_less;
    d["exact"] = w.exact;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic flexible job-shop scheduling engine";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<GenerationExhausted>(m, "GenerationExhausted", PyExc_RuntimeError);
    py::register_exception<PolicyError>(m, "PolicyError", PyExc_RuntimeError);

    py::class_<Instance>(m, "Instance")
        .def_static("from_json", [](const std::string& text) { return parse_instance(text); }, py::arg("text"))
        .def_static("load", [](const std::string& path) { return read_instance(path); }, py::arg("path"))
        .def("to_json", [](const Instance& i) { return instance_to_json(i).dump(2); })
        .def("save", [](const Instance& i, const std::string& path) { write_instance(i, path); }, py::arg("path"))
        .def_readonly("id", &Instance::id)
        .def_readonly("num_machines", &Instance::num_machines)
        .def_readonly("metadata", &Instance::metadata)
        .def_property_readonly("scale", [](const Instance& i) { return std::string(to_string(i.scale_tag)); })
        .def_property_readonly("num_jobs", [](const Instance& i) { return all_jobs(i).size(); })
        .def_property_readonly("num_events", [](const Instance& i) { return i.events.size(); })
        .def_property_readonly("total_operations", [](const Instance& i) { return total_operations(i); })
        .def("__eq__", [](const Instance& a, const Instance& b) { return a == b; })
        .def("__repr__", [](const Instance& i) {
            return "<Instance " + i.id + " machines=" + std::to_string(i.num_machines) +
                   " operations=" + std::to_string(total_operations(i)) + ">";
        });

    m.def(
        "generate",
        [](const std::string& scale, std::uint64_t seed) {
            return generate_gen_instance(GenParams::defaults(scale_from(scale)), seed);
        },
        py::arg("scale") = "Small", py::arg("seed") = 0, "Random instance with the default parameters of a scale.");

    m.def(
        "generate_pdr",
        [](const std::string& rule, std::uint64_t seed, const std::string& scale, double margin, int max_attempts) {
            PdrBenchSpec spec;
            spec.target = rule_from(rule);
            spec.params = GenParams::defaults(scale_from(scale));
            spec.margin = margin;
            spec.max_attempts = max_attempts;
            py::gil_scoped_release release;
            return generate_pdr_instance(spec, seed);
        },
        py::arg("rule"), py::arg("seed") = 0, py::arg("scale") = "Small", py::arg("margin") = 0.02,
        py::arg("max_attempts") = 2000, "Instance on which `rule` beats every other rule by `margin`.");

    m.def("rules", [] {
        std::vector<std::string> out;
        for (RuleId r : default_rule_pool()) out.emplace_back(to_string(r));
        return out;
    });

    m.def(
        "rule_makespan",
        [](const Instance& inst, const std::string& rule, std::uint64_t seed) {
            return to_units(rule_makespan(std::make_shared<const Instance>(inst), rule_from(rule), seed));
        },
        py::arg("instance"), py::arg("rule"), py::arg("seed") = 0);

    m.def(
        "run",
        [](const Instance& inst, const std::string& policy, std::uint64_t seed, int max_level, int rollouts,
           int horizon) {
            auto p = make_policy(policy, max_level, rollouts, horizon);
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_policy(std::make_shared<const Instance>(inst), *p, seed);
            }
            return result_dict(r, inst);
        },
        py::arg("instance"), py::arg("policy"), py::arg("seed") = 0, py::arg("max_level") = 2,
        py::arg("rollouts") = 8, py::arg("horizon") = 3,
        "Runs a rule, BaseRandomized, or a mock-backed LLM-Direct / ReflecSched policy.");

    m.def(
        "run_callback",
        [](const Instance& inst, const std::function<std::size_t(py::list)>& choose, std::uint64_t seed) {
            FunctionPolicy p("callback", [&](const ShopState& st, std::span<const Action> actions) {
                py::list offered;
                for (const auto& a : actions) offered.append(action_dict(a, st));
                const std::size_t k = choose(offered);
                if (k >= actions.size()) throw py::index_error("action index out of range");
                return actions[k];
            });
            return result_dict(run_policy(std::make_shared<const Instance>(inst), p, seed), inst);
        },
        py::arg("instance"), py::arg("choose"), py::arg("seed") = 0,
        "Runs a policy whose choice comes from `choose(actions) -> index`.");

    m.def(
        "validate",
        [](const Instance& inst, const std::string& csv, bool require_complete) {
            const auto report = validate_schedule(inst, schedule_from_csv(csv, inst), {require_complete});
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& v : report.violations) out.emplace_back(std::string(to_string(v.kind)), v.detail);
            return out;
        },
        py::arg("instance"), py::arg("schedule_csv"), py::arg("require_complete") = true,
        "Violations of a schedule; empty when valid.");

    m.def(
        "gantt",
        [](const Instance& inst, const std::string& csv) { return export_gantt(schedule_from_csv(csv, inst), inst); },
        py::arg("instance"), py::arg("schedule_csv"));

    m.def("rpd", &rpd, py::arg("makespan"), py::arg("best"));
    m.def(
        "win_rate", [](const std::vector<double>& a, const std::vector<double>& b) { return win_rate(a, b); },
        py::arg("a"), py::arg("b"));
    m.def(
        "wilcoxon",
        [](const std::vector<double>& d, const std::string& method) {
            WilcoxonMethod wm = WilcoxonMethod::Auto;
            if (method == "exact") wm = WilcoxonMethod::Exact;
            else if (method == "normal") wm = WilcoxonMethod::Normal;
            else if (method != "auto") throw py::value_error("method must be auto, exact or normal");
            return wilcoxon_dict(wilcoxon_signed_rank(d, wm));
        },
        py::arg("differences"), py::arg("method") = "auto");
}
