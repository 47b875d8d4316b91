#include "mindos/net.hpp"
#include "mindos/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace mindos {

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::atomic<httplib::Server*> g_server{nullptr};

extern "C" void on_signal(int) {
    if (auto* s = g_server.load()) s->stop();
}

void print_plan(std::ostream& out, const LayoutPlan& plan) {
    for (const auto& e : plan.elements) {
        switch (e.kind) {
        case ElementKind::text_block: out << "agent> " << e.text << '\n'; break;
        case ElementKind::file_ref: out << "  [file] " << e.text << '\n'; break;
        case ElementKind::button: out << "  [" << e.label << "] /click " << e.element_id << '\n'; break;
        case ElementKind::option_list:
            out << "  " << e.label << " (/click " << e.element_id << "):";
            for (const auto& o : e.options) out << ' ' << o;
            out << '\n';
            break;
        }
    }
}

int run_chat(MindService& service, const std::string& agent_id, SessionMode mode, std::istream& in, std::ostream& out) {
    auto session = service.start_session(agent_id, mode);
    out << "session " << session->id() << " (" << to_string(mode) << "); /quit to leave\n";
    std::optional<LayoutPlan> last;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line == "/quit") break;
        try {
            std::vector<LayoutPlan> outputs;
            if (line.rfind("/click ", 0) == 0) {
                if (!last) throw Error(ErrorCode::UnknownElement, line.substr(7));
                outputs = session->submit_event(resolve_action(*last, line.substr(7)));
            } else if (line == "/accept" || line.rfind("/reject", 0) == 0) {
                Feedback fb;
                fb.verdict = line == "/accept" ? FeedbackVerdict::accept : FeedbackVerdict::reject;
                if (line.size() > 8) fb.note = line.substr(8);
                auto outcome = session->apply_feedback(fb);
                outputs = std::move(outcome.outputs);
                if (outcome.workflow) out << "workflow stored: " << outcome.workflow->trace_id << '\n';
            } else {
                outputs = session->submit_event(Utterance{line});
            }
            for (const auto& p : outputs) print_plan(out, p);
            if (!outputs.empty()) last = outputs.back();
            if (session->status() == SessionStatus::halted) {
                out << "session halted\n";
                break;
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ProviderUnreachable || e.code() == ErrorCode::NoModels) throw;
            out << "error: " << e.what() << '\n';
        }
    }
    return 0;
}

std::pair<std::string, int> split_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "bind must be host:port, got " + bind);
    return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

} // namespace

int cli_dispatch(const std::vector<std::string>& argv, std::istream& in, std::ostream& out, std::ostream& err) {
    EnvSettings env = read_env();
    std::string data_dir = env.data_dir.string();
    std::string model_config = env.model_config ? env.model_config->string() : "";
    bool offline = false;

    CLI::App app{"MindOS agent runtime", "mindos"};
    app.require_subcommand(1);
    app.add_option("--data-dir", data_dir, "data directory (MINDOS_DATA_DIR)");
    app.add_option("--model-config", model_config, "model registry JSON (MINDOS_MODEL_CONFIG)");
    app.add_flag("--offline", offline, "refuse non-loopback network access (MINDOS_OFFLINE)");

    auto* serve = app.add_subcommand("serve", "start the HTTP service");
    std::string bind = env.bind;
    serve->add_option("--bind", bind, "host:port (MINDOS_BIND)");

    auto* agent = app.add_subcommand("agent", "agent management");
    agent->require_subcommand(1);
    auto* agent_create = agent->add_subcommand("create", "create an agent from a config file");
    std::string config_file;
    agent_create->add_option("-f,--file", config_file, "AgentConfig JSON")->required();
    auto* agent_show = agent->add_subcommand("show", "print an agent's config");
    std::string show_id;
    agent_show->add_option("agent_id", show_id)->required();
    auto* agent_export = agent->add_subcommand("export", "write a canonical bundle");
    std::string export_id, export_out;
    agent_export->add_option("agent_id", export_id)->required();
    agent_export->add_option("-o,--output", export_out, "output file (stdout by default)");
    auto* agent_import = agent->add_subcommand("import", "import a bundle");
    std::string import_file;
    agent_import->add_option("bundle", import_file)->required();

    auto* chat = app.add_subcommand("chat", "interactive session over the event API");
    std::string chat_agent, chat_mode = "goal_directed";
    chat->add_option("agent_id", chat_agent)->required();
    chat->add_option("--mode", chat_mode)->check(CLI::IsMember({"goal_directed", "self_taught"}));

    auto* tools = app.add_subcommand("tools", "tool management");
    tools->require_subcommand(1);
    auto* tools_import = tools->add_subcommand("import", "import an OpenAPI document");
    std::string openapi_file, tools_agent, base_url;
    std::vector<std::string> server_vars;
    tools_import->add_option("file", openapi_file)->required();
    tools_import->add_option("--agent", tools_agent)->required();
    tools_import->add_option("--server-var", server_vars, "name=value override for a server variable");
    tools_import->add_option("--base-url", base_url, "replaces the document's server URL");

    auto* knowledge = app.add_subcommand("knowledge", "long-term memory");
    knowledge->require_subcommand(1);
    auto* knowledge_add = knowledge->add_subcommand("add", "ingest a text document");
    std::string knowledge_file, knowledge_agent, knowledge_store, doc_id;
    knowledge_add->add_option("file", knowledge_file)->required();
    knowledge_add->add_option("--agent", knowledge_agent)->required();
    knowledge_add->add_option("--store", knowledge_store)
        ->required()
        ->check(CLI::IsMember({"agent_profile", "user_profile", "user_structured", "domain_knowledge", "tools"}));
    knowledge_add->add_option("--doc-id", doc_id, "defaults to the file name");

    auto* replay = app.add_subcommand("replay", "re-render a recorded session trace");
    std::string trace_file;
    replay->add_option("trace_file", trace_file)->required();

    std::vector<std::string> args(argv.rbegin(), argv.rend());
    if (!args.empty()) args.pop_back(); // program name
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (offline) set_offline_mode(true);
        auto open_service = [&](bool with_models) {
            ServiceConfig cfg;
            cfg.data_dir = fs::path(data_dir);
            auto models = with_models ? load_models(model_config.empty() ? std::nullopt
                                                                         : std::optional<fs::path>(model_config))
                                      : std::make_shared<ModelRegistry>();
            return std::make_unique<MindService>(std::move(models), std::move(cfg));
        };

        if (*replay) {
            std::ifstream log(trace_file);
            if (!log) throw Error(ErrorCode::NotFound, "cannot read " + trace_file);
            out << render_replay(log);
            return 0;
        }
        if (*serve) {
            auto service = open_service(true);
            auto server = make_http_server(*service);
            const auto [host, port] = split_bind(bind);
            g_server = server.get();
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            int bound = port;
            if (port == 0) {
                bound = server->bind_to_any_port(host);
            } else if (!server->bind_to_port(host, port)) {
                g_server = nullptr;
                throw Error(ErrorCode::InvalidConfig, "cannot bind " + bind);
            }
            out << "listening on " << host << ':' << bound << std::endl;
            server->listen_after_bind();
            g_server = nullptr;
            service->traces().shutdown();
            return 0;
        }
        if (*agent_create) {
            auto service = open_service(false);
            out << service->create_agent(parse_agent_config(read_text(config_file))) << '\n';
            return 0;
        }
        if (*agent_show) {
            auto service = open_service(false);
            out << dump_json(to_json(service->agent_config(show_id)), 2) << '\n';
            return 0;
        }
        if (*agent_export) {
            auto service = open_service(false);
            const std::string bundle = service->export_bundle(export_id);
            if (export_out.empty()) {
                out << bundle;
            } else {
                std::ofstream f(export_out, std::ios::binary | std::ios::trunc);
                f << bundle;
            }
            return 0;
        }
        if (*agent_import) {
            auto service = open_service(false);
            out << service->import_bundle(read_text(import_file)) << '\n';
            return 0;
        }
        if (*chat) {
            auto service = open_service(true);
            return run_chat(*service, chat_agent, *parse_session_mode(chat_mode), in, out);
        }
        if (*tools_import) {
            auto service = open_service(false);
            ImportOptions options;
            for (const auto& kv : server_vars) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) {
                    err << "usage error: --server-var expects name=value\n";
                    return 2;
                }
                options.server_variables[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            if (!base_url.empty()) options.base_url = base_url;
            for (const auto& s : service->import_tools(tools_agent, read_text(openapi_file), options))
                out << s.tool_id << ' ' << s.method << ' ' << s.endpoint << '\n';
            return 0;
        }
        if (*knowledge_add) {
            auto service = open_service(false);
            const std::string id = doc_id.empty() ? fs::path(knowledge_file).filename().string() : doc_id;
            const auto chunks =
                service->add_knowledge(knowledge_agent, *parse_store_kind(knowledge_store), id, read_text(knowledge_file));
            service->persist_agent(knowledge_agent);
            out << id << ": " << chunks << " chunks\n";
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 2;
}

} // namespace mindos
