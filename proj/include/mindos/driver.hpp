#pragma once
// Driver and Monitor: the goal stack with instruction composition, the
// trigger table checked before each cycle and the post-cycle verdict.

#include "mindos/kernel.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mindos {

struct GoalRecord {
    std::string goal_id;
    std::string text;
    std::optional<std::string> parent;
    DriveStatus status = DriveStatus::active;

    bool operator==(const GoalRecord&) const = default;
};

json to_json(const GoalRecord& g);

inline constexpr std::string_view kDefaultInstruction = "Assist the user.";

class GoalStack {
public:
    GoalStack() = default;
    /// Keeps long_term drives only, stable-sorted by priority descending.
    explicit GoalStack(std::vector<Drive> drives);

    const std::vector<Drive>& long_term() const noexcept { return long_term_; }
    /// Bottom first; back() is the current goal.
    const std::vector<GoalRecord>& short_term() const noexcept { return short_term_; }
    const std::vector<GoalRecord>& satisfied() const noexcept { return satisfied_; }
    std::size_t depth() const noexcept { return short_term_.size(); }
    bool empty() const noexcept { return short_term_.empty(); }
    const GoalRecord* current() const noexcept { return short_term_.empty() ? nullptr : &short_term_.back(); }

    /// Pushes a goal with no parent; the stack must be empty (NoCurrentGoal otherwise).
    const GoalRecord& push_root(std::string text);
    /// goals[0] becomes current. `parent` must name the current goal, or be
    /// absent when the stack is empty. Throws NoCurrentGoal.
    void push_subgoals(const std::vector<std::string>& goals, const std::optional<std::string>& parent);
    /// Throws EmptyStack.
    GoalRecord complete_current_goal();
    void clear_short_term();

private:
    std::string next_id();

    std::vector<Drive> long_term_;
    std::vector<GoalRecord> short_term_;
    std::vector<GoalRecord> satisfied_;
    std::size_t issued_ = 0;
};

/// Long-term drive texts in priority order, then "Current goal: <text>",
/// one per line. Never empty.
std::string compose_instructions(const GoalStack& stack);

struct Bypass {
    std::string response;
    bool operator==(const Bypass&) const = default;
};

class TriggerTable {
public:
    /// Throws DuplicateTriggerId.
    void register_trigger(Trigger trigger);
    const std::vector<Trigger>& triggers() const noexcept { return triggers_; }
    std::size_t size() const noexcept { return triggers_.size(); }

private:
    std::vector<Trigger> triggers_;
};

std::optional<Bypass> check_pre(const TriggerTable& table, std::string_view perception);

struct Continue {
    bool operator==(const Continue&) const = default;
};
struct SpawnSubgoals {
    std::vector<std::string> goals;
    bool operator==(const SpawnSubgoals&) const = default;
};
enum class HaltReason { finished, step_limit };
struct Halt {
    HaltReason reason = HaltReason::finished;
    bool operator==(const Halt&) const = default;
};

using MonitorVerdict = std::variant<Continue, Bypass, SpawnSubgoals, Halt>;

std::string_view to_string(HaltReason r) noexcept;
json to_json(const MonitorVerdict& v);
MonitorVerdict verdict_from_json(const json& j);

/// Fixed order: Finish, Plan, step limit, otherwise Continue.
MonitorVerdict check_post(const Directive& directive, int step_count, int step_limit);

struct InstalledDrives {
    GoalStack goals;
    TriggerTable triggers;
};

/// Reactive drives become triggers first, then the config's own triggers.
InstalledDrives install_drives(const AgentConfig& config);

} // namespace mindos
