#pragma once
// Service layer: file-backed agents, bundles, trace streaming, the REST
// server and the command line.

#include "mindos/orchestrator.hpp"

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace mindos {

inline constexpr int kStorageVersion = 1;
inline constexpr int kBundleVersion = 1;

class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& violations() const noexcept { return report_; }

private:
    ValidationReport report_;
};

/// Ordered per-session backlog of serialized CycleTraces.
class TraceBroker {
public:
    void open(const std::string& session_id);
    void publish(const std::string& session_id, const CycleTrace& trace);
    bool has(const std::string& session_id) const;
    std::size_t size(const std::string& session_id) const;
    /// Entries from index `from` on; waits up to `timeout` when none are
    /// available yet. Throws UnknownSession.
    std::vector<std::string> wait_from(const std::string& session_id, std::size_t from,
                                       std::chrono::milliseconds timeout) const;
    /// Wakes every waiter; later waits return immediately.
    void shutdown();
    bool shutting_down() const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, std::vector<std::string>> backlog_;
    bool shutdown_ = false;
};

struct ServiceConfig {
    /// In-memory only when absent.
    std::optional<std::filesystem::path> data_dir;
    TimeSource clock = system_now;
    std::optional<std::string> web_search_endpoint;
    std::map<std::string, std::string> web_search_fixtures;
};

class MindService {
public:
    /// Loads every agent found under data_dir/agents.
    explicit MindService(std::shared_ptr<ModelRegistry> models, ServiceConfig config = {});
    ~MindService();

    MindService(const MindService&) = delete;
    MindService& operator=(const MindService&) = delete;

    /// Assigns an id when empty. Throws ValidationError, InvalidConfig (id taken).
    std::string create_agent(AgentConfig config);
    /// Throws UnknownAgent.
    AgentConfig agent_config(const std::string& agent_id) const;
    std::vector<std::string> agent_ids() const;
    std::vector<ToolSpec> agent_tools(const std::string& agent_id) const;
    /// Replaces the config's triggers. Throws ValidationError.
    void set_triggers(const std::string& agent_id, std::vector<Trigger> triggers);
    /// All-or-nothing. Throws MalformedDocument, MissingOperationId,
    /// UnsupportedParamType, DuplicateToolId.
    std::vector<ToolSpec> import_tools(const std::string& agent_id, std::string_view document,
                                       const ImportOptions& options = {});
    /// Returns the chunk count. Throws DuplicateDoc.
    std::size_t add_knowledge(const std::string& agent_id, StoreKind store, const std::string& doc_id,
                              std::string_view text);
    std::vector<SearchHit> search(const std::string& agent_id, StoreKind store, std::string_view query,
                                  std::size_t k) const;

    std::shared_ptr<Session> start_session(const std::string& agent_id, SessionMode mode);
    std::shared_ptr<Session> session(const std::string& session_id) const;
    std::vector<LayoutPlan> submit_event(const std::string& session_id, const InputEvent& event);
    FeedbackOutcome apply_feedback(const std::string& session_id, const Feedback& feedback);

    /// Writes config and tool specs; makes pending memory records durable.
    void persist_agent(const std::string& agent_id);
    /// Throws NotFound, CorruptState.
    std::shared_ptr<Agent> load_agent(const std::string& agent_id);

    /// Canonical JSON text. Throws UnknownAgent.
    std::string export_bundle(const std::string& agent_id) const;
    /// Keeps the bundle's agent id unless taken. Throws Malformed, VersionUnsupported.
    std::string import_bundle(std::string_view bytes);

    Runtime& runtime() { return runtime_; }
    TraceBroker& traces() { return traces_; }
    ModelRegistry& models() { return *models_; }
    const std::optional<std::filesystem::path>& data_dir() const { return config_.data_dir; }
    std::optional<std::filesystem::path> trace_log_path(const std::string& session_id) const;

private:
    std::optional<std::filesystem::path> agent_dir(const std::string& agent_id) const;
    std::shared_ptr<Agent> build_agent(const AgentConfig& config);
    void write_agent_files(const Agent& agent) const;
    std::mutex& agent_mutex(const std::string& agent_id);

    std::shared_ptr<ModelRegistry> models_;
    ServiceConfig config_;
    Runtime runtime_;
    TraceBroker traces_;
    std::mutex create_mu_;
    std::mutex locks_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> agent_locks_;
};

/// REST and SSE routes over `service`; the caller binds and listens.
std::unique_ptr<httplib::Server> make_http_server(MindService& service);

/// Environment: MINDOS_DATA_DIR, MINDOS_BIND, MINDOS_OFFLINE, MINDOS_MODEL_CONFIG.
struct EnvSettings {
    std::filesystem::path data_dir = "mindos-data";
    std::string bind = "127.0.0.1:8080";
    bool offline = false;
    std::optional<std::filesystem::path> model_config;
};

EnvSettings read_env();

/// Loads MINDOS_MODEL_CONFIG-style JSON into a fresh registry.
std::shared_ptr<ModelRegistry> load_models(const std::optional<std::filesystem::path>& config_file);

/// argv includes the program name. 0 success, 2 usage error, 1 runtime error.
int cli_dispatch(const std::vector<std::string>& argv, std::istream& in, std::ostream& out, std::ostream& err);

/// Deterministic text rendering of a recorded trace log.
std::string render_replay(std::istream& trace_log);

} // namespace mindos
