#include "mindos/service.hpp"

#include <httplib.h>

namespace mindos {

namespace {

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownAgent:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownTool:
    case ErrorCode::UnknownElement:
    case ErrorCode::NotFound:
        return 404;
    case ErrorCode::DuplicateToolId:
    case ErrorCode::DuplicateDoc:
    case ErrorCode::DuplicateTriggerId:
    case ErrorCode::DuplicateModelId:
    case ErrorCode::SessionHalted:
    case ErrorCode::WrongMode:
    case ErrorCode::NoCurrentGoal:
    case ErrorCode::PolicyDenied:
        return 409;
    case ErrorCode::InvalidConfig:
        return 422;
    case ErrorCode::ProviderUnreachable:
    case ErrorCode::UpstreamError:
        return 502;
    case ErrorCode::NoModels:
    case ErrorCode::CorruptState:
        return 500;
    default:
        return 400;
    }
}

ordered_json to_ordered(const json& j) { return ordered_json::parse(j.dump()); }

void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(dump_json(body), "application/json");
}

json parse_body(const httplib::Request& req) {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Malformed, "request body is not valid JSON");
    return j;
}

ordered_json plans_json(const std::vector<LayoutPlan>& plans) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : plans) arr.push_back(to_json(p));
    return arr;
}

ordered_json session_json(const Session& s, int step_limit) {
    ordered_json goals = ordered_json::array();
    for (const auto& g : s.goal_stack()) goals.push_back(to_ordered(to_json(g)));
    ordered_json j;
    j["session_id"] = s.id();
    j["agent_id"] = s.agent_id();
    j["mode"] = to_string(s.mode());
    j["status"] = to_string(s.status());
    j["step_count"] = s.step_count();
    j["step_limit"] = step_limit;
    j["goal_stack"] = std::move(goals);
    return j;
}

template <typename F>
httplib::Server::Handler guarded(F&& fn) {
    return [fn = std::forward<F>(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ValidationError& e) {
            json violations = json::array();
            for (const auto& v : e.violations()) violations.push_back({{"field", v.field}, {"reason", v.reason}});
            send_json(res, 422, json{{"error", "InvalidConfig"}, {"message", e.what()}, {"violations", violations}});
        } catch (const Error& e) {
            send_json(res, http_status(e.code()), json{{"error", to_string(e.code())}, {"message", e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 500, json{{"error", "Internal"}, {"message", e.what()}});
        }
    };
}

constexpr const char* kId = "([A-Za-z0-9_\\-]+)";

std::string route(const std::string& pattern) {
    std::string out;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern.compare(i, 4, "{id}") == 0) {
            out += kId;
            i += 3;
        } else {
            out += pattern[i];
        }
    }
    return out;
}

} // namespace

std::unique_ptr<httplib::Server> make_http_server(MindService& service) {
    auto server = std::make_unique<httplib::Server>();
    MindService* svc = &service;

    server->Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, json{{"status", "ok"}});
    }));

    server->Post("/agents", guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = svc->create_agent(agent_config_from_json(parse_body(req)));
        send_json(res, 201, json{{"agent_id", id}});
    }));

    server->Get("/agents", guarded([svc](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, json{{"agents", svc->agent_ids()}});
    }));

    server->Get(route("/agents/{id}"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        json tools = json::array();
        for (const auto& s : svc->agent_tools(id)) tools.push_back(to_json(s));
        json config = to_json(svc->agent_config(id));
        send_json(res, 200, json{{"config", std::move(config)}, {"tools", std::move(tools)}});
    }));

    server->Put(route("/agents/{id}/triggers"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const json body = parse_body(req);
        const json list = body.is_object() && body.contains("triggers") ? body["triggers"] : body;
        if (!list.is_array()) throw Error(ErrorCode::Malformed, "expected a list of triggers");
        std::vector<Trigger> triggers;
        for (const auto& t : list) triggers.push_back(trigger_from_json(t));
        svc->set_triggers(id, std::move(triggers));
        json out = json::array();
        for (const auto& t : svc->agent_config(id).triggers) out.push_back(to_json(t));
        send_json(res, 200, json{{"triggers", std::move(out)}});
    }));

    server->Post(route("/agents/{id}/tools:import"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        ImportOptions options;
        std::string document = req.body;
        const json wrapped = json::parse(req.body, nullptr, false);
        if (!wrapped.is_discarded() && wrapped.is_object() && wrapped.contains("document") &&
            !wrapped.contains("openapi")) {
            document = wrapped["document"].get<std::string>();
            const json vars = wrapped.value("server_variables", json::object());
            for (const auto& [k, v] : vars.items())
                options.server_variables[k] = v.is_string() ? v.get<std::string>() : v.dump();
            if (wrapped.contains("base_url")) options.base_url = wrapped["base_url"].get<std::string>();
        }
        for (const auto& [key, value] : req.params) {
            if (key.rfind("server_var.", 0) == 0) options.server_variables[key.substr(11)] = value;
            if (key == "base_url") options.base_url = value;
        }
        json tools = json::array();
        for (const auto& s : svc->import_tools(id, document, options)) tools.push_back(to_json(s));
        send_json(res, 201, json{{"tools", std::move(tools)}});
    }));

    server->Post(route("/agents/{id}/knowledge"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        std::string store_name, doc_id, text;
        if (req.is_multipart_form_data()) {
            if (!req.has_file("file")) throw Error(ErrorCode::Malformed, "multipart field 'file' is required");
            const auto file = req.get_file_value("file");
            text = file.content;
            doc_id = file.filename;
            if (req.has_file("store")) store_name = req.get_file_value("store").content;
            if (req.has_file("doc_id")) doc_id = req.get_file_value("doc_id").content;
        } else {
            const json body = parse_body(req);
            store_name = body.value("store", "");
            doc_id = body.value("doc_id", "");
            text = body.value("text", "");
        }
        if (req.has_param("store")) store_name = req.get_param_value("store");
        const auto store = parse_store_kind(store_name);
        if (!store) throw Error(ErrorCode::Malformed, "unknown store '" + store_name + "'");
        if (doc_id.empty()) throw Error(ErrorCode::Malformed, "doc_id (or file name) is required");
        const std::size_t chunks = svc->add_knowledge(id, *store, doc_id, text);
        send_json(res, 201, json{{"doc_id", doc_id}, {"store", to_string(*store)}, {"chunks", chunks}});
    }));

    server->Get(route("/agents/{id}/search"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const auto store = parse_store_kind(req.has_param("store") ? req.get_param_value("store") : "domain_knowledge");
        if (!store) throw Error(ErrorCode::Malformed, "unknown store");
        const std::size_t k = req.has_param("k") ? std::stoul(req.get_param_value("k")) : 4;
        json hits = json::array();
        for (const auto& h : svc->search(id, *store, req.get_param_value("q"), k))
            hits.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}, {"text", h.text}, {"doc_id", h.source_doc}});
        send_json(res, 200, json{{"hits", std::move(hits)}});
    }));

    server->Get(route("/agents/{id}/export"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        res.set_content(svc->export_bundle(req.matches[1]), "application/json");
    }));

    server->Post("/bundles", guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = svc->import_bundle(req.body);
        send_json(res, 201, json{{"agent_id", id}});
    }));

    server->Post(route("/agents/{id}/sessions"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        const json body = req.body.empty() ? json::object() : parse_body(req);
        const std::string mode_name = body.value("mode", "goal_directed");
        const auto mode = parse_session_mode(mode_name);
        if (!mode) throw Error(ErrorCode::Malformed, "mode must be goal_directed or self_taught");
        auto session = svc->start_session(id, *mode);
        send_json(res, 201, session_json(*session, svc->agent_config(id).step_limit));
    }));

    server->Get(route("/sessions/{id}"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        auto session = svc->session(req.matches[1]);
        send_json(res, 200, session_json(*session, svc->agent_config(session->agent_id()).step_limit));
    }));

    server->Post(route("/sessions/{id}/events"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        auto session = svc->session(req.matches[1]);
        const auto outputs = session->submit_event(input_event_from_json(parse_body(req)));
        ordered_json body = session_json(*session, svc->agent_config(session->agent_id()).step_limit);
        body["outputs"] = plans_json(outputs);
        send_json(res, 200, body);
    }));

    server->Post(route("/sessions/{id}/feedback"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        auto session = svc->session(req.matches[1]);
        const auto outcome = session->apply_feedback(feedback_from_json(parse_body(req)));
        ordered_json body = session_json(*session, svc->agent_config(session->agent_id()).step_limit);
        body["outputs"] = plans_json(outcome.outputs);
        body["workflow"] = outcome.workflow ? to_ordered(to_json(*outcome.workflow)) : ordered_json(nullptr);
        send_json(res, 200, body);
    }));

    server->Get(route("/sessions/{id}/outputs"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        ordered_json body;
        body["outputs"] = plans_json(svc->session(req.matches[1])->outputs());
        send_json(res, 200, body);
    }));

    server->Get(route("/sessions/{id}/trace"), guarded([svc](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1];
        auto session = svc->session(id);
        if (!svc->traces().has(id)) throw Error(ErrorCode::UnknownSession, id);
        const bool follow = req.get_param_value("follow") != "0";
        std::size_t start = 0;
        if (req.has_header("Last-Event-ID")) start = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
        auto cursor = std::make_shared<std::size_t>(start);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream", [svc, id, session, follow, cursor](std::size_t, httplib::DataSink& sink) {
                TraceBroker& broker = svc->traces();
                const auto entries = broker.wait_from(id, *cursor, std::chrono::milliseconds(follow ? 250 : 0));
                for (const auto& data : entries) {
                    const std::string frame =
                        "id: " + std::to_string(*cursor) + "\nevent: cycle\ndata: " + data + "\n\n";
                    if (!sink.write(frame.data(), frame.size())) return false;
                    ++*cursor;
                }
                const bool drained = *cursor >= broker.size(id);
                if (drained && (!follow || broker.shutting_down() || session->status() == SessionStatus::halted)) {
                    sink.done();
                    return true;
                }
                return sink.is_writable();
            });
    }));

    return server;
}

} // namespace mindos
