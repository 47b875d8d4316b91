#pragma once
// Shared domain vocabulary: agent configuration, drives, triggers and the
// Directive union emitted by the thought stream.

#include "mindos/error.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mindos {

using json = nlohmann::json;

using Instant = std::chrono::sys_time<std::chrono::milliseconds>;
using TimeSource = std::function<Instant()>;

Instant system_now();
Instant instant_from_millis(std::int64_t ms);
std::int64_t to_millis(Instant t);
/// UTC, seconds precision: 2023-03-01T00:00:00Z
std::string format_iso8601(Instant t);

/// Serializes with invalid UTF-8 replaced instead of throwing.
std::string dump_json(const json& value, int indent = -1);

/// Opaque URL-safe identifier, e.g. "agt-3f9c0a1b2c4d".
std::string make_id(std::string_view prefix);
bool is_url_safe_id(std::string_view id);

enum class DriveKind { long_term, short_term, reactive };
enum class DriveStatus { active, satisfied, halted };
enum class MatchMode { exact, substring };
enum class StoreKind { agent_profile, user_profile, user_structured, domain_knowledge, tools };

inline constexpr StoreKind kAllStoreKinds[] = {StoreKind::agent_profile, StoreKind::user_profile,
                                               StoreKind::user_structured, StoreKind::domain_knowledge,
                                               StoreKind::tools};

std::string_view to_string(DriveKind v) noexcept;
std::string_view to_string(DriveStatus v) noexcept;
std::string_view to_string(MatchMode v) noexcept;
std::string_view to_string(StoreKind v) noexcept;
std::optional<DriveKind> parse_drive_kind(std::string_view s);
std::optional<DriveStatus> parse_drive_status(std::string_view s);
std::optional<MatchMode> parse_match_mode(std::string_view s);
std::optional<StoreKind> parse_store_kind(std::string_view s);

struct Drive {
    std::string drive_id;
    DriveKind kind = DriveKind::long_term;
    std::string prompt_text;
    int priority = 0;
    DriveStatus status = DriveStatus::active;
    // Reactive drives only: the trigger-response pair they install.
    std::string pattern;
    MatchMode match_mode = MatchMode::substring;
    std::string response;

    bool operator==(const Drive&) const = default;
};

struct Trigger {
    std::string trigger_id;
    std::string pattern;
    MatchMode mode = MatchMode::substring;
    std::string response;
    bool enabled = true;

    bool operator==(const Trigger&) const = default;
};

struct MemoryPolicy {
    bool store_user_profile = false;
    bool store_conversation = false;

    bool operator==(const MemoryPolicy&) const = default;
};

struct AgentConfig {
    std::string agent_id;
    std::string name;
    std::string profile;
    std::vector<Drive> drives;
    std::vector<Trigger> triggers;
    std::vector<std::string> tool_ids;
    MemoryPolicy memory_policy;
    int step_limit = 20;
    int retrieval_k = 4;

    bool operator==(const AgentConfig&) const = default;
};

struct Violation {
    std::string field;
    std::string reason;

    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate_agent_config(const AgentConfig& config);

json to_json(const Drive& drive);
json to_json(const Trigger& trigger);
json to_json(const AgentConfig& config);
/// Strict: unknown fields and wrong types raise Error(Malformed).
Drive drive_from_json(const json& j);
Trigger trigger_from_json(const json& j);
AgentConfig agent_config_from_json(const json& j);
AgentConfig parse_agent_config(std::string_view text);

/// Lowercase (simple, locale-free), trim, collapse internal whitespace runs.
std::string normalize_text(std::string_view text);
/// Locale-free simple lowercasing of UTF-8; invalid bytes pass through.
std::string simple_lowercase(std::string_view text);

// ---------------------------------------------------------------------------
// Directives

struct OfferedAction {
    std::string label;
    std::string action_id;

    bool operator==(const OfferedAction&) const = default;
};

struct Respond {
    std::string text;
    std::vector<OfferedAction> actions;

    bool operator==(const Respond&) const = default;
};

struct InvokeTool {
    std::string tool_id;
    json args = json::object();

    bool operator==(const InvokeTool&) const = default;
};

struct QueryMemory {
    StoreKind store = StoreKind::domain_knowledge;
    std::string query;

    bool operator==(const QueryMemory&) const = default;
};

struct Plan {
    std::vector<std::string> subgoals;

    bool operator==(const Plan&) const = default;
};

struct ChainStep {
    std::string tool_id;
    json args = json::object();
    std::optional<std::string> bind;

    bool operator==(const ChainStep&) const = default;
};

struct Chain {
    std::vector<ChainStep> steps;

    bool operator==(const Chain&) const = default;
};

struct Finish {
    std::string result;

    bool operator==(const Finish&) const = default;
};

using Directive = std::variant<Respond, InvokeTool, QueryMemory, Plan, Chain, Finish>;

inline constexpr std::string_view kActionNames[] = {"respond", "invoke_tool", "query_memory",
                                                    "plan",    "chain",       "finish"};

std::string_view action_name(const Directive& d) noexcept;

/// Canonical wire shape, e.g. {"action":"invoke_tool","tool":"echo","args":{"q":"x"}}.
json to_json(const Directive& d);
json to_json(const ChainStep& step);

} // namespace mindos
