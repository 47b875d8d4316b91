#include "mindos/net.hpp"
#include "mindos/service.hpp"
#include "mindos/thought_stream.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace mindos;

namespace {

json parse_arg(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Malformed, std::string(what) + " is not valid JSON");
    return j;
}

StoreKind store_arg(const std::string& name) {
    const auto store = parse_store_kind(name);
    if (!store) throw Error(ErrorCode::Malformed, "unknown store '" + name + "'");
    return *store;
}

std::string plans_json(const std::vector<LayoutPlan>& plans) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : plans) arr.push_back(to_json(p));
    return arr.dump();
}

class PyService {
public:
    PyService(const std::string& models_json, std::optional<std::string> data_dir, std::optional<std::string> base_dir) {
        auto models = std::make_shared<ModelRegistry>();
        load_model_config(*models, parse_arg(models_json, "model config"),
                          base_dir ? std::filesystem::path(*base_dir) : std::filesystem::path());
        ServiceConfig cfg;
        if (data_dir) cfg.data_dir = std::filesystem::path(*data_dir);
        service_ = std::make_unique<MindService>(std::move(models), std::move(cfg));
    }

    std::string create_agent(const std::string& config_json) {
        return service_->create_agent(parse_agent_config(config_json));
    }
    std::string agent_config(const std::string& id) const { return dump_json(to_json(service_->agent_config(id))); }
    std::vector<std::string> agent_ids() const { return service_->agent_ids(); }

    std::string import_tools(const std::string& id, const std::string& document,
                             const std::map<std::string, std::string>& server_variables,
                             std::optional<std::string> base_url) {
        ImportOptions options;
        options.server_variables = server_variables;
        options.base_url = std::move(base_url);
        json out = json::array();
        for (const auto& s : service_->import_tools(id, document, options)) out.push_back(to_json(s));
        return dump_json(out);
    }

    std::size_t add_knowledge(const std::string& id, const std::string& store, const std::string& doc_id,
                              const std::string& text) {
        return service_->add_knowledge(id, store_arg(store), doc_id, text);
    }

    std::string search(const std::string& id, const std::string& store, const std::string& query, std::size_t k) {
        json hits = json::array();
        for (const auto& h : service_->search(id, store_arg(store), query, k))
            hits.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}, {"text", h.text}, {"doc_id", h.source_doc}});
        return dump_json(hits);
    }

    std::string start_session(const std::string& id, const std::string& mode) {
        const auto m = parse_session_mode(mode);
        if (!m) throw Error(ErrorCode::Malformed, "mode must be goal_directed or self_taught");
        return service_->start_session(id, *m)->id();
    }

    std::string submit_event(const std::string& sid, const std::string& event_json) {
        const InputEvent event = input_event_from_json(parse_arg(event_json, "event"));
        return plans_json(service_->submit_event(sid, event));
    }

    std::string apply_feedback(const std::string& sid, const std::string& feedback_json) {
        const auto outcome = service_->apply_feedback(sid, feedback_from_json(parse_arg(feedback_json, "feedback")));
        json out;
        out["outputs"] = json::parse(plans_json(outcome.outputs));
        out["workflow"] = outcome.workflow ? to_json(*outcome.workflow) : json(nullptr);
        return dump_json(out);
    }

    std::string session_state(const std::string& sid) const {
        auto s = service_->session(sid);
        json goals = json::array();
        for (const auto& g : s->goal_stack()) goals.push_back(to_json(g));
        json out;
        out["session_id"] = s->id();
        out["agent_id"] = s->agent_id();
        out["mode"] = to_string(s->mode());
        out["status"] = to_string(s->status());
        out["step_count"] = s->step_count();
        out["goal_stack"] = std::move(goals);
        return dump_json(out);
    }

    std::string trace(const std::string& sid) const {
        json out = json::array();
        for (const auto& t : service_->session(sid)->trace()) out.push_back(to_json(t));
        return dump_json(out);
    }

    void persist_agent(const std::string& id) { service_->persist_agent(id); }
    std::string export_bundle(const std::string& id) const { return service_->export_bundle(id); }
    std::string import_bundle(const std::string& bytes) { return service_->import_bundle(bytes); }

private:
    std::unique_ptr<MindService> service_;
};

} // namespace

PYBIND11_MODULE(_core, m) {
    static py::exception<Error> mind_error(m, "MindError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::tuple args = py::make_tuple(std::string(to_string(e.code())), std::string(e.what()));
            PyErr_SetObject(mind_error.ptr(), args.ptr());
        }
    });

    m.def("set_offline_mode", &set_offline_mode, py::arg("offline"));
    m.def("offline_mode", &offline_mode);

    m.def("embed_text", [](const std::string& text) {
        const Embedding e = embed_text(text);
        return std::vector<double>(e.begin(), e.end());
    });
    m.def("parse_directive", [](const std::string& completion) {
        const auto out = parse_directive(completion);
        if (const auto* err = std::get_if<ParseError>(&out))
            throw Error(ErrorCode::Malformed, std::string(to_string(err->reason)));
        return dump_json(to_json(std::get<Directive>(out)));
    });
    m.def(
        "import_openapi",
        [](const std::string& document, const std::map<std::string, std::string>& server_variables) {
            ImportOptions options;
            options.server_variables = server_variables;
            json out = json::array();
            for (const auto& s : import_openapi(document, options)) out.push_back(to_json(s));
            return dump_json(out);
        },
        py::arg("document"), py::arg("server_variables") = std::map<std::string, std::string>{});
    m.def("render_replay", [](const std::string& log) {
        std::istringstream in(log);
        return render_replay(in);
    });

    py::class_<PyService>(m, "Service")
        .def(py::init<const std::string&, std::optional<std::string>, std::optional<std::string>>(),
             py::arg("models_json"), py::arg("data_dir") = std::nullopt, py::arg("base_dir") = std::nullopt)
        .def("create_agent", &PyService::create_agent)
        .def("agent_config", &PyService::agent_config)
        .def("agent_ids", &PyService::agent_ids)
        .def("import_tools", &PyService::import_tools, py::arg("agent_id"), py::arg("document"),
             py::arg("server_variables") = std::map<std::string, std::string>{}, py::arg("base_url") = std::nullopt,
             py::call_guard<py::gil_scoped_release>())
        .def("add_knowledge", &PyService::add_knowledge)
        .def("search", &PyService::search, py::arg("agent_id"), py::arg("store"), py::arg("query"), py::arg("k") = 4)
        .def("start_session", &PyService::start_session, py::arg("agent_id"), py::arg("mode") = "goal_directed")
        .def("submit_event", &PyService::submit_event, py::call_guard<py::gil_scoped_release>())
        .def("apply_feedback", &PyService::apply_feedback, py::call_guard<py::gil_scoped_release>())
        .def("session_state", &PyService::session_state)
        .def("trace", &PyService::trace)
        .def("persist_agent", &PyService::persist_agent)
        .def("export_bundle", &PyService::export_bundle)
        .def("import_bundle", &PyService::import_bundle);
}
