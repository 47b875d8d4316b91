#pragma once
// Session engine: one cycle loop serving goal-directed, self-taught and
// reactive processing, plus the learned-workflow store.

#include "mindos/driver.hpp"
#include "mindos/foundation_model.hpp"
#include "mindos/kernel.hpp"
#include "mindos/lui.hpp"
#include "mindos/memory.hpp"
#include "mindos/thought_stream.hpp"
#include "mindos/tools.hpp"
#include "mindos/working_memory.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace mindos {

enum class SessionMode { goal_directed, self_taught };
enum class SessionStatus { idle, running, halted };

std::string_view to_string(SessionMode v) noexcept;
std::string_view to_string(SessionStatus v) noexcept;
std::optional<SessionMode> parse_session_mode(std::string_view s);

inline constexpr double kWorkflowRecallThreshold = 0.8;

struct WorkflowTrace {
    std::string trace_id;
    std::string goal_text;
    Embedding goal_vector{};
    std::vector<Directive> steps;
    bool success = true;
    Instant created_at{};

    bool operator==(const WorkflowTrace&) const = default;
};

json to_json(const WorkflowTrace& w);
/// Throws CorruptState.
WorkflowTrace workflow_from_json(const json& j);
/// The text injected into Related Memory.
std::string render_workflow(const WorkflowTrace& w);

struct WorkflowHit {
    double score = 0.0;
    WorkflowTrace trace;
};

class WorkflowStore {
public:
    /// With a file, existing lines are loaded and additions appended.
    explicit WorkflowStore(std::optional<std::filesystem::path> file = std::nullopt);

    void add(WorkflowTrace trace);
    std::vector<WorkflowTrace> all() const;
    /// Traces with cosine(goal, stored goal) >= threshold, best first, at most k.
    std::vector<WorkflowHit> recall(std::string_view goal_text, std::size_t k,
                                    double threshold = kWorkflowRecallThreshold) const;
    /// Replaces contents and rewrites the file.
    void replace_all(std::vector<WorkflowTrace> traces);

private:
    std::optional<std::filesystem::path> file_;
    mutable std::shared_mutex mu_;
    std::vector<WorkflowTrace> traces_;
};

/// Everything an agent owns: config, memory, tools and learned workflows.
class Agent {
public:
    Agent(AgentConfig config, std::shared_ptr<MemoryIndex> memory, std::shared_ptr<ToolRegistry> tools,
          std::shared_ptr<WorkflowStore> workflows);

    std::string id() const;
    AgentConfig config() const;
    void set_config(AgentConfig config);

    MemoryIndex& memory() const { return *memory_; }
    ToolRegistry& tools() const { return *tools_; }
    WorkflowStore& workflows() const { return *workflows_; }
    std::shared_ptr<MemoryIndex> memory_ptr() const { return memory_; }

private:
    mutable std::mutex mu_;
    AgentConfig config_;
    std::shared_ptr<MemoryIndex> memory_;
    std::shared_ptr<ToolRegistry> tools_;
    std::shared_ptr<WorkflowStore> workflows_;
};

struct CycleTrace {
    std::size_t cycle_index = 0;
    std::optional<std::string> perception;
    std::string thought_text; // empty on bypass
    std::optional<Directive> directive;
    MonitorVerdict verdict;
    std::vector<std::string> effects;
    std::vector<StepAttempt> attempts;
    int step_count = 0;
    std::vector<GoalRecord> goal_stack;

    std::size_t provider_calls() const noexcept { return attempts.size(); }
};

json to_json(const CycleTrace& t);
/// Throws Malformed.
CycleTrace cycle_trace_from_json(const json& j);

enum class FeedbackSource { human, tool };
enum class FeedbackVerdict { accept, reject };

struct Feedback {
    FeedbackSource source = FeedbackSource::human;
    FeedbackVerdict verdict = FeedbackVerdict::accept;
    std::string note;
};

/// Throws Malformed.
Feedback feedback_from_json(const json& j);

struct FeedbackOutcome {
    std::vector<LayoutPlan> outputs;
    std::optional<WorkflowTrace> workflow;
};

class Session {
public:
    Session(std::string session_id, std::shared_ptr<Agent> agent, SessionMode mode,
            std::shared_ptr<const ModelRegistry> models, TimeSource clock);

    const std::string& id() const noexcept { return id_; }
    std::string agent_id() const { return agent_->id(); }
    SessionMode mode() const noexcept { return mode_; }

    SessionStatus status() const;
    int step_count() const;
    std::vector<CycleTrace> trace() const;
    std::vector<LayoutPlan> outputs() const;
    std::vector<GoalRecord> goal_stack() const;
    ShortTermStore short_term() const;

    /// Called after every appended cycle, under the session lock.
    void set_trace_sink(std::function<void(const CycleTrace&)> sink);

    /// Throws SessionHalted.
    std::vector<LayoutPlan> submit_event(const InputEvent& event);
    /// Throws WrongMode, SessionHalted.
    FeedbackOutcome apply_feedback(const Feedback& feedback);
    /// One cycle with optional fresh perception. Throws SessionHalted;
    /// ProviderUnreachable propagates.
    CycleTrace run_cycle(const std::optional<std::string>& perception);
    /// Stores the current episode as a learned workflow.
    WorkflowTrace persist_workflow();

private:
    struct CycleResult {
        CycleTrace trace;
        bool stop = false;
    };

    CycleResult cycle_locked(const std::optional<std::string>& perception);
    std::vector<std::string> dispatch_locked(const Directive& directive, bool& stop);
    std::vector<LayoutPlan> run_episode_locked(std::optional<std::string> perception);
    void emit_locked(const std::string& text, const std::vector<OfferedAction>& actions);
    void record_locked(EventKind kind, Actor actor, std::string payload);
    void archive_locked();
    WorkflowTrace persist_workflow_locked();

    std::string id_;
    std::shared_ptr<Agent> agent_;
    SessionMode mode_;
    std::shared_ptr<const ModelRegistry> models_;
    TimeSource clock_;

    mutable std::mutex mu_;
    ShortTermStore short_term_;
    GoalStack goals_;
    TriggerTable triggers_;
    int step_count_ = 0;
    SessionStatus status_ = SessionStatus::idle;
    std::vector<CycleTrace> trace_;
    std::vector<LayoutPlan> outputs_;
    std::optional<std::string> episode_goal_;
    std::vector<Directive> episode_steps_;
    bool awaiting_feedback_ = false;
    std::vector<Message> unarchived_;
    std::function<void(const CycleTrace&)> sink_;
};

/// Agents and sessions; models are shared by all agents.
class Runtime {
public:
    explicit Runtime(std::shared_ptr<const ModelRegistry> models, TimeSource clock = system_now);

    void add_agent(std::shared_ptr<Agent> agent);
    /// Throws UnknownAgent.
    std::shared_ptr<Agent> agent(const std::string& agent_id) const;
    bool has_agent(const std::string& agent_id) const;
    std::vector<std::string> agent_ids() const;

    /// Throws UnknownAgent.
    std::shared_ptr<Session> start_session(const std::string& agent_id, SessionMode mode);
    /// Throws UnknownSession.
    std::shared_ptr<Session> session(const std::string& session_id) const;

    const ModelRegistry& models() const { return *models_; }

private:
    std::shared_ptr<const ModelRegistry> models_;
    TimeSource clock_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Agent>> agents_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

} // namespace mindos
