#include "mindos/orchestrator.hpp"

#include <algorithm>
#include <fstream>

namespace mindos {

std::string_view to_string(SessionMode v) noexcept {
    return v == SessionMode::goal_directed ? "goal_directed" : "self_taught";
}

std::string_view to_string(SessionStatus v) noexcept {
    switch (v) {
    case SessionStatus::idle: return "idle";
    case SessionStatus::running: return "running";
    case SessionStatus::halted: return "halted";
    }
    return "";
}

std::optional<SessionMode> parse_session_mode(std::string_view s) {
    if (s == "goal_directed") return SessionMode::goal_directed;
    if (s == "self_taught") return SessionMode::self_taught;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// workflows

json to_json(const WorkflowTrace& w) {
    json steps = json::array();
    for (const auto& d : w.steps) steps.push_back(to_json(d));
    return json{{"trace_id", w.trace_id},
                {"goal_text", w.goal_text},
                {"goal_vector", w.goal_vector},
                {"steps", std::move(steps)},
                {"outcome", w.success ? "success" : "failure"},
                {"created_at_ms", to_millis(w.created_at)}};
}

WorkflowTrace workflow_from_json(const json& j) {
    try {
        WorkflowTrace w;
        w.trace_id = j.at("trace_id").get<std::string>();
        w.goal_text = j.at("goal_text").get<std::string>();
        const auto vec = j.at("goal_vector").get<std::vector<double>>();
        if (vec.size() != kEmbeddingDim) throw Error(ErrorCode::CorruptState, "workflow goal_vector size");
        std::copy(vec.begin(), vec.end(), w.goal_vector.begin());
        for (const auto& s : j.at("steps")) {
            auto parsed = directive_from_json(s);
            if (auto* err = std::get_if<ParseError>(&parsed))
                throw Error(ErrorCode::CorruptState, "workflow step: " + err->detail);
            w.steps.push_back(std::get<Directive>(std::move(parsed)));
        }
        w.success = j.at("outcome").get<std::string>() == "success";
        w.created_at = instant_from_millis(j.at("created_at_ms").get<std::int64_t>());
        return w;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptState, std::string("workflow: ") + e.what());
    }
}

std::string render_workflow(const WorkflowTrace& w) {
    std::string out = "Learned workflow for '" + w.goal_text + "' (" + std::to_string(w.steps.size()) + " steps):";
    for (std::size_t i = 0; i < w.steps.size(); ++i)
        out += " " + std::to_string(i + 1) + ". " + dump_json(to_json(w.steps[i]));
    return out;
}

WorkflowStore::WorkflowStore(std::optional<std::filesystem::path> file) : file_(std::move(file)) {
    if (!file_ || !std::filesystem::exists(*file_)) return;
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::CorruptState, file_->string() + ": invalid JSON line");
        traces_.push_back(workflow_from_json(j));
    }
}

void WorkflowStore::add(WorkflowTrace trace) {
    std::unique_lock lock(mu_);
    if (file_) {
        std::filesystem::create_directories(file_->parent_path());
        std::ofstream out(*file_, std::ios::app);
        out << dump_json(to_json(trace)) << '\n';
    }
    traces_.push_back(std::move(trace));
}

std::vector<WorkflowTrace> WorkflowStore::all() const {
    std::shared_lock lock(mu_);
    return traces_;
}

std::vector<WorkflowHit> WorkflowStore::recall(std::string_view goal_text, std::size_t k, double threshold) const {
    const Embedding q = embed_text(goal_text);
    std::vector<WorkflowHit> hits;
    {
        std::shared_lock lock(mu_);
        for (const auto& t : traces_) {
            if (!t.success) continue;
            const double score = cosine(q, t.goal_vector);
            if (score >= threshold) hits.push_back(WorkflowHit{score, t});
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

void WorkflowStore::replace_all(std::vector<WorkflowTrace> traces) {
    std::unique_lock lock(mu_);
    traces_ = std::move(traces);
    if (!file_) return;
    std::filesystem::create_directories(file_->parent_path());
    std::ofstream out(*file_, std::ios::trunc);
    for (const auto& t : traces_) out << dump_json(to_json(t)) << '\n';
}

// ---------------------------------------------------------------------------
// agent

Agent::Agent(AgentConfig config, std::shared_ptr<MemoryIndex> memory, std::shared_ptr<ToolRegistry> tools,
             std::shared_ptr<WorkflowStore> workflows)
    : config_(std::move(config)),
      memory_(std::move(memory)),
      tools_(std::move(tools)),
      workflows_(std::move(workflows)) {
    if (!memory_) memory_ = std::make_shared<MemoryIndex>(std::nullopt, config_.memory_policy);
    if (!tools_) tools_ = std::make_shared<ToolRegistry>(memory_);
    if (!workflows_) workflows_ = std::make_shared<WorkflowStore>();
}

std::string Agent::id() const {
    std::lock_guard lock(mu_);
    return config_.agent_id;
}

AgentConfig Agent::config() const {
    std::lock_guard lock(mu_);
    return config_;
}

void Agent::set_config(AgentConfig config) {
    std::lock_guard lock(mu_);
    memory_->set_policy(config.memory_policy);
    config_ = std::move(config);
}

// ---------------------------------------------------------------------------
// trace serialization

json to_json(const CycleTrace& t) {
    json attempts = json::array();
    for (const auto& a : t.attempts) attempts.push_back(to_json(a));
    json goals = json::array();
    for (const auto& g : t.goal_stack) goals.push_back(to_json(g));
    json j{{"cycle_index", t.cycle_index},
           {"thought_text", t.thought_text},
           {"verdict", to_json(t.verdict)},
           {"effects", t.effects},
           {"attempts", std::move(attempts)},
           {"provider_calls", t.provider_calls()},
           {"step_count", t.step_count},
           {"goal_stack", std::move(goals)}};
    j["perception"] = t.perception ? json(*t.perception) : json(nullptr);
    j["directive"] = t.directive ? to_json(*t.directive) : json(nullptr);
    return j;
}

CycleTrace cycle_trace_from_json(const json& j) {
    try {
        CycleTrace t;
        t.cycle_index = j.at("cycle_index").get<std::size_t>();
        if (!j.at("perception").is_null()) t.perception = j["perception"].get<std::string>();
        t.thought_text = j.at("thought_text").get<std::string>();
        if (!j.at("directive").is_null()) {
            auto parsed = directive_from_json(j["directive"]);
            if (auto* err = std::get_if<ParseError>(&parsed)) throw Error(ErrorCode::Malformed, "directive: " + err->detail);
            t.directive = std::get<Directive>(std::move(parsed));
        }
        t.verdict = verdict_from_json(j.at("verdict"));
        t.effects = j.at("effects").get<std::vector<std::string>>();
        for (const auto& a : j.at("attempts")) {
            StepAttempt at{a.at("model_id").get<std::string>(), a.at("template_id").get<std::string>(), "",
                           a.at("completion").get<std::string>(), std::nullopt};
            if (a.contains("error")) {
                ParseError err;
                const std::string reason = a["error"].at("reason").get<std::string>();
                for (auto r : {ParseErrorReason::no_json, ParseErrorReason::unknown_action,
                               ParseErrorReason::missing_field, ParseErrorReason::malformed_field})
                    if (to_string(r) == reason) err.reason = r;
                err.raw = at.completion;
                err.detail = a["error"].value("detail", "");
                at.error = err;
            }
            t.attempts.push_back(std::move(at));
        }
        t.step_count = j.at("step_count").get<int>();
        for (const auto& g : j.at("goal_stack")) {
            GoalRecord r{g.at("goal_id").get<std::string>(), g.at("text").get<std::string>(), std::nullopt,
                         parse_drive_status(g.at("status").get<std::string>()).value_or(DriveStatus::active)};
            if (!g.at("parent").is_null()) r.parent = g["parent"].get<std::string>();
            t.goal_stack.push_back(std::move(r));
        }
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("cycle trace: ") + e.what());
    }
}

Feedback feedback_from_json(const json& j) {
    try {
        Feedback f;
        const std::string source = j.at("source").get<std::string>();
        const std::string verdict = j.at("verdict").get<std::string>();
        if (source == "human")
            f.source = FeedbackSource::human;
        else if (source == "tool")
            f.source = FeedbackSource::tool;
        else
            throw Error(ErrorCode::Malformed, "feedback source must be human or tool");
        if (verdict == "accept")
            f.verdict = FeedbackVerdict::accept;
        else if (verdict == "reject")
            f.verdict = FeedbackVerdict::reject;
        else
            throw Error(ErrorCode::Malformed, "feedback verdict must be accept or reject");
        f.note = j.value("note", "");
        return f;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("feedback: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// session

namespace {

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string error_payload(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return std::string(to_string(err->code())) + ": " + e.what();
    return e.what();
}

} // namespace

Session::Session(std::string session_id, std::shared_ptr<Agent> agent, SessionMode mode,
                 std::shared_ptr<const ModelRegistry> models, TimeSource clock)
    : id_(std::move(session_id)), agent_(std::move(agent)), mode_(mode), models_(std::move(models)),
      clock_(clock ? std::move(clock) : TimeSource(system_now)) {
    auto installed = install_drives(agent_->config());
    goals_ = std::move(installed.goals);
    triggers_ = std::move(installed.triggers);
}

SessionStatus Session::status() const {
    std::lock_guard lock(mu_);
    return status_;
}

int Session::step_count() const {
    std::lock_guard lock(mu_);
    return step_count_;
}

std::vector<CycleTrace> Session::trace() const {
    std::lock_guard lock(mu_);
    return trace_;
}

std::vector<LayoutPlan> Session::outputs() const {
    std::lock_guard lock(mu_);
    return outputs_;
}

std::vector<GoalRecord> Session::goal_stack() const {
    std::lock_guard lock(mu_);
    return goals_.short_term();
}

ShortTermStore Session::short_term() const {
    std::lock_guard lock(mu_);
    return short_term_;
}

void Session::set_trace_sink(std::function<void(const CycleTrace&)> sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
}

void Session::record_locked(EventKind kind, Actor actor, std::string payload) {
    short_term_.append(kind, actor, std::move(payload), clock_());
}

void Session::emit_locked(const std::string& text, const std::vector<OfferedAction>& actions) {
    outputs_.push_back(plan_layout(text, actions));
    record_locked(EventKind::conversation, Actor::agent, text);
    unarchived_.push_back(Message{"agent", text});
}

void Session::archive_locked() {
    const MemoryPolicy policy = agent_->memory().policy();
    if (!policy.store_conversation) return;
    if (!unarchived_.empty()) {
        agent_->memory().archive_conversation(id_, unarchived_);
        unarchived_.clear();
    }
    if (status_ == SessionStatus::halted) agent_->memory().close_conversation(id_);
}

std::vector<std::string> Session::dispatch_locked(const Directive& directive, bool& stop) {
    std::vector<std::string> effects;
    const std::optional<std::string> current_id =
        goals_.current() ? std::optional<std::string>(goals_.current()->goal_id) : std::nullopt;
    if (!std::holds_alternative<Respond>(directive)) episode_steps_.push_back(directive);

    auto emit = [&](const std::string& text, const std::vector<OfferedAction>& actions) {
        if (normalize_text(text).empty()) {
            effects.push_back("empty response suppressed");
            return;
        }
        emit_locked(text, actions);
        effects.push_back("output: " + text);
    };
    auto complete_goal = [&] {
        if (goals_.empty()) return;
        const GoalRecord done = goals_.complete_current_goal();
        effects.push_back("goal satisfied: " + done.text);
    };

    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Respond>) {
                emit(d.text, d.actions);
                complete_goal();
                if (goals_.empty()) stop = true;
            } else if constexpr (std::is_same_v<T, InvokeTool>) {
                std::string payload = "invoke_tool " + d.tool_id + " " + dump_json(d.args) + " -> ";
                try {
                    const ToolResult r = agent_->tools().invoke(d.tool_id, d.args);
                    payload += r.ok() ? "ok " + dump_json(r.fields) : "error " + r.raw;
                } catch (const std::exception& e) {
                    payload += "error " + error_payload(e);
                }
                record_locked(EventKind::agent_action, Actor::agent, payload);
                effects.push_back(payload);
            } else if constexpr (std::is_same_v<T, QueryMemory>) {
                const auto k = static_cast<std::size_t>(std::max(1, agent_->config().retrieval_k));
                std::string payload = "query_memory " + std::string(to_string(d.store)) + " '" + d.query + "' -> ";
                try {
                    const auto hits = agent_->memory().search(d.store, d.query, k);
                    if (hits.empty()) payload += "no hits";
                    std::vector<std::string> parts;
                    for (std::size_t i = 0; i < hits.size(); ++i)
                        parts.push_back("[" + std::to_string(i + 1) + "] " + hits[i].text);
                    payload += join(parts, " ");
                } catch (const std::exception& e) {
                    payload += "error " + error_payload(e);
                }
                record_locked(EventKind::agent_action, Actor::agent, payload);
                effects.push_back(payload);
            } else if constexpr (std::is_same_v<T, Plan>) {
                goals_.push_subgoals(d.subgoals, current_id);
                effects.push_back("subgoals pushed: " + join(d.subgoals, " | "));
            } else if constexpr (std::is_same_v<T, Chain>) {
                const ChainOutcome outcome = agent_->tools().run_chain(d.steps);
                std::string payload = "chain " + std::to_string(d.steps.size()) + " steps -> ";
                if (outcome.failed_at) {
                    payload += "failed at step " + std::to_string(*outcome.failed_at) + ": " +
                               outcome.completed.back().second.raw;
                } else {
                    const ToolResult& last = outcome.completed.back().second;
                    payload += "ok " + dump_json(last.fields);
                }
                record_locked(EventKind::agent_action, Actor::agent, payload);
                effects.push_back(payload);
            } else {
                emit(d.result, {});
                complete_goal();
                stop = true;
            }
        },
        directive);
    return effects;
}

Session::CycleResult Session::cycle_locked(const std::optional<std::string>& perception) {
    if (status_ == SessionStatus::halted) throw Error(ErrorCode::SessionHalted, id_);
    status_ = SessionStatus::running;

    CycleResult result;
    CycleTrace& t = result.trace;
    t.cycle_index = trace_.size();
    t.perception = perception;

    auto finish_trace = [&] {
        t.step_count = step_count_;
        t.goal_stack = goals_.short_term();
        trace_.push_back(t);
        if (sink_) sink_(trace_.back());
    };

    if (perception) {
        if (auto bypass = check_pre(triggers_, *perception)) {
            t.verdict = *bypass;
            if (!normalize_text(bypass->response).empty()) emit_locked(bypass->response, {});
            t.effects.push_back("bypass: " + bypass->response);
            goals_.clear_short_term();
            episode_goal_.reset();
            result.stop = true;
            finish_trace();
            return result;
        }
    }

    const AgentConfig cfg = agent_->config();
    const auto k = static_cast<std::size_t>(std::max(1, cfg.retrieval_k));
    const GoalRecord* cur = goals_.current();
    const std::string query = cur ? cur->text : perception.value_or("");

    std::vector<std::string> related;
    if (!query.empty()) {
        for (const auto& hit : agent_->workflows().recall(query, k)) related.push_back(render_workflow(hit.trace));
        for (const auto& hit : agent_->memory().search(StoreKind::domain_knowledge, query, k))
            related.push_back(hit.text);
    }

    std::vector<std::string> user_lines;
    for (const auto& c : agent_->memory().chunks(StoreKind::user_profile)) user_lines.push_back(c.text);
    for (const auto& [key, value] : agent_->memory().records()) user_lines.push_back(key + ": " + value);
    std::vector<std::string> agent_lines;
    if (!cfg.profile.empty()) agent_lines.push_back(cfg.profile);
    for (const auto& c : agent_->memory().chunks(StoreKind::agent_profile)) agent_lines.push_back(c.text);

    ThoughtInputs inputs;
    inputs.instructions = compose_instructions(goals_);
    inputs.perception = perception;
    if (!user_lines.empty()) inputs.user_profile = join(user_lines, "\n");
    if (!agent_lines.empty()) inputs.agent_profile = join(agent_lines, "\n");
    inputs.related_memory = std::move(related);
    inputs.now = clock_();
    const Thought thought = assemble_thought(short_term_, inputs);
    t.thought_text = serialize_thought(thought);

    const TaskKind kind = !cur ? TaskKind::respond : cur->parent ? TaskKind::decide : TaskKind::plan;
    ++step_count_;
    StepResult step = ThoughtStream(*models_).step(thought, kind);
    t.attempts = std::move(step.attempts);
    t.directive = step.directive;
    if (step.fell_back) t.effects.push_back("fallback after " + std::to_string(t.attempts.size()) + " unusable replies");

    MonitorVerdict verdict = check_post(step.directive, step_count_, cfg.step_limit);
    bool stop = false;
    for (auto& e : dispatch_locked(step.directive, stop)) t.effects.push_back(std::move(e));

    // A plan at the budget edge still counts against it: the loop must end.
    if (std::holds_alternative<SpawnSubgoals>(verdict) && step_count_ >= cfg.step_limit) {
        t.effects.push_back("step limit reached after plan");
        verdict = Halt{HaltReason::step_limit};
    }

    if (const auto* halt = std::get_if<Halt>(&verdict)) {
        stop = true;
        if (halt->reason == HaltReason::step_limit || mode_ == SessionMode::goal_directed)
            status_ = SessionStatus::halted;
        else
            awaiting_feedback_ = true;
    } else if (stop && mode_ == SessionMode::self_taught) {
        awaiting_feedback_ = true;
    }
    t.verdict = std::move(verdict);
    result.stop = stop;
    finish_trace();
    return result;
}

std::vector<LayoutPlan> Session::run_episode_locked(std::optional<std::string> perception) {
    const std::size_t first_output = outputs_.size();
    try {
        bool stop = false;
        while (!stop) {
            stop = cycle_locked(perception).stop;
            perception.reset();
        }
    } catch (...) {
        if (status_ == SessionStatus::running) status_ = SessionStatus::idle;
        throw;
    }
    if (status_ != SessionStatus::halted) status_ = awaiting_feedback_ ? SessionStatus::running : SessionStatus::idle;
    archive_locked();
    return {outputs_.begin() + static_cast<std::ptrdiff_t>(first_output), outputs_.end()};
}

std::vector<LayoutPlan> Session::submit_event(const InputEvent& event) {
    std::lock_guard lock(mu_);
    if (status_ == SessionStatus::halted) throw Error(ErrorCode::SessionHalted, id_);
    const std::string perception = normalize_input(event);
    if (std::holds_alternative<Utterance>(event)) {
        record_locked(EventKind::conversation, Actor::user, perception);
        unarchived_.push_back(Message{"user", perception});
    } else {
        record_locked(EventKind::user_action, Actor::user, perception);
    }
    goals_.clear_short_term();
    goals_.push_root(perception);
    episode_goal_ = perception;
    episode_steps_.clear();
    awaiting_feedback_ = false;
    step_count_ = 0;
    return run_episode_locked(perception);
}

CycleTrace Session::run_cycle(const std::optional<std::string>& perception) {
    std::lock_guard lock(mu_);
    CycleResult r = cycle_locked(perception);
    if (r.stop && status_ != SessionStatus::halted)
        status_ = awaiting_feedback_ ? SessionStatus::running : SessionStatus::idle;
    return r.trace;
}

FeedbackOutcome Session::apply_feedback(const Feedback& feedback) {
    std::lock_guard lock(mu_);
    if (mode_ != SessionMode::self_taught) throw Error(ErrorCode::WrongMode, "feedback requires self_taught mode");
    if (status_ == SessionStatus::halted) throw Error(ErrorCode::SessionHalted, id_);
    if (!episode_goal_) throw Error(ErrorCode::NoCurrentGoal, "no episode to give feedback on");

    const bool accept = feedback.verdict == FeedbackVerdict::accept;
    std::string payload = std::string("feedback from ") + (feedback.source == FeedbackSource::human ? "human" : "tool") +
                          ": " + (accept ? "accept" : "reject");
    if (!feedback.note.empty()) payload += " (" + feedback.note + ")";
    if (feedback.source == FeedbackSource::human)
        record_locked(EventKind::user_action, Actor::user, payload);
    else
        record_locked(EventKind::agent_action, Actor::system, payload);

    FeedbackOutcome out;
    if (accept) {
        out.workflow = persist_workflow_locked();
        awaiting_feedback_ = false;
        status_ = SessionStatus::halted;
        archive_locked();
        return out;
    }
    awaiting_feedback_ = false;
    goals_.clear_short_term();
    goals_.push_root(*episode_goal_);
    out.outputs = run_episode_locked(std::nullopt);
    return out;
}

WorkflowTrace Session::persist_workflow_locked() {
    if (!episode_goal_) throw Error(ErrorCode::NoCurrentGoal, "no episode to persist");
    WorkflowTrace w{make_id("wf"), *episode_goal_, embed_text(*episode_goal_), episode_steps_, true, clock_()};
    agent_->workflows().add(w);
    return w;
}

WorkflowTrace Session::persist_workflow() {
    std::lock_guard lock(mu_);
    return persist_workflow_locked();
}

// ---------------------------------------------------------------------------
// runtime

Runtime::Runtime(std::shared_ptr<const ModelRegistry> models, TimeSource clock)
    : models_(std::move(models)), clock_(clock ? std::move(clock) : TimeSource(system_now)) {}

void Runtime::add_agent(std::shared_ptr<Agent> agent) {
    std::unique_lock lock(mu_);
    agents_[agent->id()] = std::move(agent);
}

std::shared_ptr<Agent> Runtime::agent(const std::string& agent_id) const {
    std::shared_lock lock(mu_);
    const auto it = agents_.find(agent_id);
    if (it == agents_.end()) throw Error(ErrorCode::UnknownAgent, agent_id);
    return it->second;
}

bool Runtime::has_agent(const std::string& agent_id) const {
    std::shared_lock lock(mu_);
    return agents_.count(agent_id) > 0;
}

std::vector<std::string> Runtime::agent_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : agents_) ids.push_back(id);
    return ids;
}

std::shared_ptr<Session> Runtime::start_session(const std::string& agent_id, SessionMode mode) {
    auto a = agent(agent_id);
    auto s = std::make_shared<Session>(make_id("ses"), std::move(a), mode, models_, clock_);
    std::unique_lock lock(mu_);
    sessions_[s->id()] = s;
    return s;
}

std::shared_ptr<Session> Runtime::session(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, session_id);
    return it->second;
}

} // namespace mindos
