#include "mindos/service.hpp"

#include "mindos/net.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace mindos {

namespace {

std::string describe(const ValidationReport& report) {
    std::string out;
    for (const auto& v : report) {
        if (!out.empty()) out += "; ";
        out += v.field + " " + v.reason;
    }
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::NotFound, path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::CorruptState, path.string() + ": invalid JSON");
    return j;
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        out << text;
        if (!out) throw Error(ErrorCode::CorruptState, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

} // namespace

ValidationError::ValidationError(ValidationReport report)
    : Error(ErrorCode::InvalidConfig, describe(report)), report_(std::move(report)) {}

// ---------------------------------------------------------------------------
// trace broker

void TraceBroker::open(const std::string& session_id) {
    std::lock_guard lock(mu_);
    backlog_[session_id];
}

void TraceBroker::publish(const std::string& session_id, const CycleTrace& trace) {
    {
        std::lock_guard lock(mu_);
        backlog_[session_id].push_back(dump_json(to_json(trace)));
    }
    cv_.notify_all();
}

bool TraceBroker::has(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    return backlog_.count(session_id) > 0;
}

std::size_t TraceBroker::size(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    const auto it = backlog_.find(session_id);
    if (it == backlog_.end()) throw Error(ErrorCode::UnknownSession, session_id);
    return it->second.size();
}

std::vector<std::string> TraceBroker::wait_from(const std::string& session_id, std::size_t from,
                                                std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    auto it = backlog_.find(session_id);
    if (it == backlog_.end()) throw Error(ErrorCode::UnknownSession, session_id);
    cv_.wait_for(lock, timeout, [&] { return shutdown_ || it->second.size() > from; });
    if (it->second.size() <= from) return {};
    return {it->second.begin() + static_cast<std::ptrdiff_t>(from), it->second.end()};
}

void TraceBroker::shutdown() {
    {
        std::lock_guard lock(mu_);
        shutdown_ = true;
    }
    cv_.notify_all();
}

bool TraceBroker::shutting_down() const {
    std::lock_guard lock(mu_);
    return shutdown_;
}

// ---------------------------------------------------------------------------
// service

MindService::MindService(std::shared_ptr<ModelRegistry> models, ServiceConfig config)
    : models_(models ? std::move(models) : std::make_shared<ModelRegistry>()),
      config_(std::move(config)),
      runtime_(models_, config_.clock) {
    if (!config_.data_dir) return;
    const fs::path agents = *config_.data_dir / "agents";
    fs::create_directories(agents);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(agents))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) load_agent(id);
}

MindService::~MindService() { traces_.shutdown(); }

std::optional<fs::path> MindService::agent_dir(const std::string& agent_id) const {
    if (!config_.data_dir) return std::nullopt;
    return *config_.data_dir / "agents" / agent_id;
}

std::optional<fs::path> MindService::trace_log_path(const std::string& session_id) const {
    if (!config_.data_dir) return std::nullopt;
    return *config_.data_dir / "sessions" / (session_id + ".trace.jsonl");
}

std::mutex& MindService::agent_mutex(const std::string& agent_id) {
    std::lock_guard lock(locks_mu_);
    auto& m = agent_locks_[agent_id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

std::shared_ptr<Agent> MindService::build_agent(const AgentConfig& config) {
    const auto dir = agent_dir(config.agent_id);
    auto memory = std::make_shared<MemoryIndex>(dir ? std::optional<fs::path>(*dir / "memory") : std::nullopt,
                                                config.memory_policy);
    WebSearchConfig web;
    web.endpoint = config_.web_search_endpoint;
    web.fixtures = config_.web_search_fixtures;
    web.clock = config_.clock;
    if (dir) web.cache_file = *dir / "web_cache.json";
    auto tools = std::make_shared<ToolRegistry>(memory, std::make_shared<WebSearchService>(std::move(web)));
    auto workflows =
        std::make_shared<WorkflowStore>(dir ? std::optional<fs::path>(*dir / "workflows.jsonl") : std::nullopt);
    return std::make_shared<Agent>(config, std::move(memory), std::move(tools), std::move(workflows));
}

void MindService::write_agent_files(const Agent& agent) const {
    const auto dir = agent_dir(agent.id());
    if (!dir) return;
    const json config_doc{{"format_version", kStorageVersion}, {"config", to_json(agent.config())}};
    write_file_atomic(*dir / "agent.json", dump_json(config_doc, 2) + "\n");
    json specs = json::array();
    for (const auto& s : agent.tools().tools(false)) specs.push_back(to_json(s));
    const json tools_doc{{"format_version", kStorageVersion}, {"tools", std::move(specs)}};
    write_file_atomic(*dir / "tools.json", dump_json(tools_doc, 2) + "\n");
}

std::string MindService::create_agent(AgentConfig config) {
    std::lock_guard lock(create_mu_);
    if (config.agent_id.empty()) {
        do {
            config.agent_id = make_id("agt");
        } while (runtime_.has_agent(config.agent_id));
    }
    if (auto report = validate_agent_config(config); !report.empty()) throw ValidationError(std::move(report));
    if (runtime_.has_agent(config.agent_id))
        throw Error(ErrorCode::InvalidConfig, "agent_id " + config.agent_id + " already exists");
    auto agent = build_agent(config);
    write_agent_files(*agent);
    runtime_.add_agent(agent);
    return config.agent_id;
}

AgentConfig MindService::agent_config(const std::string& agent_id) const { return runtime_.agent(agent_id)->config(); }

std::vector<std::string> MindService::agent_ids() const { return runtime_.agent_ids(); }

std::vector<ToolSpec> MindService::agent_tools(const std::string& agent_id) const {
    return runtime_.agent(agent_id)->tools().tools(false);
}

void MindService::set_triggers(const std::string& agent_id, std::vector<Trigger> triggers) {
    auto agent = runtime_.agent(agent_id);
    std::lock_guard lock(agent_mutex(agent_id));
    AgentConfig cfg = agent->config();
    cfg.triggers = std::move(triggers);
    if (auto report = validate_agent_config(cfg); !report.empty()) throw ValidationError(std::move(report));
    agent->set_config(std::move(cfg));
    write_agent_files(*agent);
}

std::vector<ToolSpec> MindService::import_tools(const std::string& agent_id, std::string_view document,
                                                const ImportOptions& options) {
    auto agent = runtime_.agent(agent_id);
    std::vector<ToolSpec> specs = import_openapi(document, options);
    std::lock_guard lock(agent_mutex(agent_id));
    std::set<std::string> seen;
    for (const auto& s : specs) {
        if (agent->tools().lookup(s.tool_id) || !seen.insert(s.tool_id).second)
            throw Error(ErrorCode::DuplicateToolId, s.tool_id);
    }
    AgentConfig cfg = agent->config();
    for (const auto& s : specs) {
        agent->tools().register_tool(s);
        if (std::find(cfg.tool_ids.begin(), cfg.tool_ids.end(), s.tool_id) == cfg.tool_ids.end())
            cfg.tool_ids.push_back(s.tool_id);
    }
    agent->set_config(std::move(cfg));
    write_agent_files(*agent);
    return specs;
}

std::size_t MindService::add_knowledge(const std::string& agent_id, StoreKind store, const std::string& doc_id,
                                       std::string_view text) {
    auto agent = runtime_.agent(agent_id);
    std::lock_guard lock(agent_mutex(agent_id));
    return agent->memory().ingest_document(store, doc_id, text);
}

std::vector<SearchHit> MindService::search(const std::string& agent_id, StoreKind store, std::string_view query,
                                           std::size_t k) const {
    return runtime_.agent(agent_id)->memory().search(store, query, k);
}

std::shared_ptr<Session> MindService::start_session(const std::string& agent_id, SessionMode mode) {
    auto session = runtime_.start_session(agent_id, mode);
    traces_.open(session->id());
    const auto log = trace_log_path(session->id());
    if (log) fs::create_directories(log->parent_path());
    session->set_trace_sink([this, id = session->id(), log](const CycleTrace& t) {
        if (log) {
            std::ofstream out(*log, std::ios::app);
            out << dump_json(to_json(t)) << '\n';
        }
        traces_.publish(id, t);
    });
    return session;
}

std::shared_ptr<Session> MindService::session(const std::string& session_id) const {
    return runtime_.session(session_id);
}

std::vector<LayoutPlan> MindService::submit_event(const std::string& session_id, const InputEvent& event) {
    return session(session_id)->submit_event(event);
}

FeedbackOutcome MindService::apply_feedback(const std::string& session_id, const Feedback& feedback) {
    return session(session_id)->apply_feedback(feedback);
}

void MindService::persist_agent(const std::string& agent_id) {
    auto agent = runtime_.agent(agent_id);
    std::lock_guard lock(agent_mutex(agent_id));
    agent->memory().flush();
    write_agent_files(*agent);
}

std::shared_ptr<Agent> MindService::load_agent(const std::string& agent_id) {
    const auto dir = agent_dir(agent_id);
    if (!dir || !fs::exists(*dir / "agent.json")) throw Error(ErrorCode::NotFound, "agent " + agent_id);
    const json doc = read_json_file(*dir / "agent.json");
    if (!doc.is_object() || doc.value("format_version", 0) != kStorageVersion || !doc.contains("config"))
        throw Error(ErrorCode::CorruptState, agent_id + ": unsupported agent.json format");
    AgentConfig config;
    try {
        config = agent_config_from_json(doc["config"]);
    } catch (const Error& e) {
        throw Error(ErrorCode::CorruptState, agent_id + ": " + e.what());
    }
    if (config.agent_id != agent_id) throw Error(ErrorCode::CorruptState, agent_id + ": id does not match directory");
    auto agent = build_agent(config);
    if (fs::exists(*dir / "tools.json")) {
        const json tools = read_json_file(*dir / "tools.json");
        if (!tools.is_object() || tools.value("format_version", 0) != kStorageVersion || !tools.contains("tools"))
            throw Error(ErrorCode::CorruptState, agent_id + ": unsupported tools.json format");
        for (const auto& spec : tools["tools"]) {
            try {
                agent->tools().register_tool(tool_spec_from_json(spec));
            } catch (const Error& e) {
                throw Error(ErrorCode::CorruptState, agent_id + ": " + e.what());
            }
        }
    }
    runtime_.add_agent(agent);
    return agent;
}

std::string MindService::export_bundle(const std::string& agent_id) const {
    auto agent = runtime_.agent(agent_id);
    agent->memory().flush();
    json tools = json::array();
    for (const auto& s : agent->tools().tools(false)) tools.push_back(to_json(s));
    json memory = json::object();
    for (const auto& [file, lines] : agent->memory().manifest()) memory[file] = lines;
    json workflows = json::array();
    for (const auto& w : agent->workflows().all()) workflows.push_back(to_json(w));
    const json bundle{{"version", kBundleVersion},
                      {"config", to_json(agent->config())},
                      {"tools", std::move(tools)},
                      {"memory_manifest", std::move(memory)},
                      {"workflow_traces", std::move(workflows)}};
    return dump_json(bundle) + "\n";
}

std::string MindService::import_bundle(std::string_view bytes) {
    const json bundle = json::parse(bytes, nullptr, false);
    if (bundle.is_discarded() || !bundle.is_object()) throw Error(ErrorCode::Malformed, "bundle is not a JSON object");
    if (!bundle.contains("version") || !bundle["version"].is_number_integer())
        throw Error(ErrorCode::Malformed, "bundle lacks an integer version");
    if (bundle["version"].get<int>() != kBundleVersion)
        throw Error(ErrorCode::VersionUnsupported, "bundle version " + dump_json(bundle["version"]));

    AgentConfig config;
    std::vector<ToolSpec> tools;
    MemoryManifest manifest;
    std::vector<WorkflowTrace> workflows;
    try {
        config = agent_config_from_json(bundle.at("config"));
        for (const auto& s : bundle.at("tools")) tools.push_back(tool_spec_from_json(s));
        for (const auto& [file, lines] : bundle.at("memory_manifest").items())
            manifest[file] = lines.get<std::vector<json>>();
        for (const auto& w : bundle.at("workflow_traces")) workflows.push_back(workflow_from_json(w));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("bundle: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::Malformed, std::string("bundle: ") + e.what());
    }

    std::lock_guard lock(create_mu_);
    if (config.agent_id.empty() || runtime_.has_agent(config.agent_id)) {
        do {
            config.agent_id = make_id("agt");
        } while (runtime_.has_agent(config.agent_id));
    }
    if (auto report = validate_agent_config(config); !report.empty()) throw ValidationError(std::move(report));
    if (const auto dir = agent_dir(config.agent_id); dir && fs::exists(*dir)) fs::remove_all(*dir);
    auto agent = build_agent(config);
    try {
        agent->memory().load_manifest(manifest);
    } catch (const Error& e) {
        throw Error(ErrorCode::Malformed, std::string("bundle: ") + e.what());
    }
    for (auto& s : tools) agent->tools().register_tool(std::move(s));
    agent->workflows().replace_all(std::move(workflows));
    write_agent_files(*agent);
    runtime_.add_agent(agent);
    return config.agent_id;
}

// ---------------------------------------------------------------------------
// environment

EnvSettings read_env() {
    EnvSettings s;
    if (const char* v = std::getenv("MINDOS_DATA_DIR"); v && *v) s.data_dir = v;
    if (const char* v = std::getenv("MINDOS_BIND"); v && *v) s.bind = v;
    if (const char* v = std::getenv("MINDOS_MODEL_CONFIG"); v && *v) s.model_config = fs::path(v);
    s.offline = offline_mode();
    return s;
}

std::shared_ptr<ModelRegistry> load_models(const std::optional<fs::path>& config_file) {
    auto registry = std::make_shared<ModelRegistry>();
    if (!config_file) return registry;
    std::ifstream in(*config_file);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read model config " + config_file->string());
    const json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, config_file->string() + ": invalid JSON");
    load_model_config(*registry, j, config_file->parent_path());
    return registry;
}

// ---------------------------------------------------------------------------
// replay

std::string render_replay(std::istream& trace_log) {
    std::ostringstream out;
    std::string line;
    std::size_t expected = 0;
    while (std::getline(trace_log, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::Malformed, "trace line " + std::to_string(expected) + " is not JSON");
        const CycleTrace t = cycle_trace_from_json(j);
        if (t.cycle_index != expected)
            throw Error(ErrorCode::Malformed, "expected cycle " + std::to_string(expected) + ", found " +
                                                  std::to_string(t.cycle_index));
        ++expected;
        out << "cycle " << t.cycle_index << '\n';
        if (t.perception) out << "  perception: " << *t.perception << '\n';
        if (t.directive) out << "  directive: " << dump_json(to_json(*t.directive)) << '\n';
        out << "  verdict: " << dump_json(to_json(t.verdict)) << '\n';
        for (const auto& e : t.effects) out << "  effect: " << e << '\n';
        out << "  provider calls: " << t.provider_calls() << ", step " << t.step_count << '\n';
        std::string goals;
        for (const auto& g : t.goal_stack) goals += (goals.empty() ? "" : " > ") + g.text;
        out << "  goal stack: " << (goals.empty() ? "(empty)" : goals) << '\n';
    }
    out << expected << " cycles\n";
    return out.str();
}

} // namespace mindos
