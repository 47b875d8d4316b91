#include "mindos/driver.hpp"

#include <algorithm>

namespace mindos {

json to_json(const GoalRecord& g) {
    json j{{"goal_id", g.goal_id}, {"text", g.text}, {"status", to_string(g.status)}};
    j["parent"] = g.parent ? json(*g.parent) : json(nullptr);
    return j;
}

GoalStack::GoalStack(std::vector<Drive> drives) {
    for (auto& d : drives)
        if (d.kind == DriveKind::long_term) long_term_.push_back(std::move(d));
    std::stable_sort(long_term_.begin(), long_term_.end(),
                     [](const Drive& a, const Drive& b) { return a.priority > b.priority; });
}

std::string GoalStack::next_id() { return "g" + std::to_string(++issued_); }

const GoalRecord& GoalStack::push_root(std::string text) {
    if (!short_term_.empty()) throw Error(ErrorCode::NoCurrentGoal, "root goal requires an empty stack");
    short_term_.push_back(GoalRecord{next_id(), std::move(text), std::nullopt, DriveStatus::active});
    return short_term_.back();
}

void GoalStack::push_subgoals(const std::vector<std::string>& goals, const std::optional<std::string>& parent) {
    const GoalRecord* cur = current();
    if (cur ? (!parent || *parent != cur->goal_id) : parent.has_value())
        throw Error(ErrorCode::NoCurrentGoal, "parent " + parent.value_or("<none>") + " is not the current goal");
    if (goals.empty()) return;
    std::vector<GoalRecord> records;
    for (const auto& g : goals) records.push_back(GoalRecord{next_id(), g, parent, DriveStatus::active});
    for (auto it = records.rbegin(); it != records.rend(); ++it) short_term_.push_back(std::move(*it));
}

GoalRecord GoalStack::complete_current_goal() {
    if (short_term_.empty()) throw Error(ErrorCode::EmptyStack);
    GoalRecord done = std::move(short_term_.back());
    short_term_.pop_back();
    done.status = DriveStatus::satisfied;
    satisfied_.push_back(done);
    return done;
}

void GoalStack::clear_short_term() { short_term_.clear(); }

std::string compose_instructions(const GoalStack& stack) {
    std::vector<std::string> lines;
    for (const auto& d : stack.long_term())
        if (d.status == DriveStatus::active && !d.prompt_text.empty()) lines.push_back(d.prompt_text);
    if (const GoalRecord* cur = stack.current()) lines.push_back("Current goal: " + cur->text);
    if (lines.empty()) return std::string(kDefaultInstruction);
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

void TriggerTable::register_trigger(Trigger trigger) {
    for (const auto& t : triggers_)
        if (t.trigger_id == trigger.trigger_id) throw Error(ErrorCode::DuplicateTriggerId, trigger.trigger_id);
    triggers_.push_back(std::move(trigger));
}

std::optional<Bypass> check_pre(const TriggerTable& table, std::string_view perception) {
    const std::string p = normalize_text(perception);
    for (const auto& t : table.triggers()) {
        if (!t.enabled) continue;
        const std::string pattern = normalize_text(t.pattern);
        if (pattern.empty()) continue;
        const bool hit = t.mode == MatchMode::exact ? p == pattern : p.find(pattern) != std::string::npos;
        if (hit) return Bypass{t.response};
    }
    return std::nullopt;
}

std::string_view to_string(HaltReason r) noexcept {
    return r == HaltReason::finished ? "finished" : "step_limit";
}

json to_json(const MonitorVerdict& v) {
    return std::visit(
        [](const auto& arm) -> json {
            using T = std::decay_t<decltype(arm)>;
            if constexpr (std::is_same_v<T, Continue>)
                return json{{"verdict", "continue"}};
            else if constexpr (std::is_same_v<T, Bypass>)
                return json{{"verdict", "bypass"}, {"response", arm.response}};
            else if constexpr (std::is_same_v<T, SpawnSubgoals>)
                return json{{"verdict", "spawn_subgoals"}, {"goals", arm.goals}};
            else
                return json{{"verdict", "halt"}, {"reason", to_string(arm.reason)}};
        },
        v);
}

MonitorVerdict verdict_from_json(const json& j) {
    try {
        const std::string kind = j.at("verdict").get<std::string>();
        if (kind == "continue") return Continue{};
        if (kind == "bypass") return Bypass{j.at("response").get<std::string>()};
        if (kind == "spawn_subgoals") return SpawnSubgoals{j.at("goals").get<std::vector<std::string>>()};
        if (kind == "halt") {
            const std::string reason = j.at("reason").get<std::string>();
            if (reason == "finished") return Halt{HaltReason::finished};
            if (reason == "step_limit") return Halt{HaltReason::step_limit};
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("verdict: ") + e.what());
    }
    throw Error(ErrorCode::Malformed, "verdict: " + dump_json(j));
}

MonitorVerdict check_post(const Directive& directive, int step_count, int step_limit) {
    if (std::holds_alternative<Finish>(directive)) return Halt{HaltReason::finished};
    if (const auto* plan = std::get_if<Plan>(&directive)) return SpawnSubgoals{plan->subgoals};
    if (step_count >= step_limit) return Halt{HaltReason::step_limit};
    return Continue{};
}

InstalledDrives install_drives(const AgentConfig& config) {
    InstalledDrives out{GoalStack(config.drives), {}};
    for (const auto& d : config.drives) {
        if (d.kind != DriveKind::reactive) continue;
        out.triggers.register_trigger(
            Trigger{d.drive_id, d.pattern, d.match_mode, d.response, d.status == DriveStatus::active});
    }
    for (const auto& t : config.triggers) out.triggers.register_trigger(t);
    return out;
}

} // namespace mindos
