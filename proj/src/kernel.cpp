#include "mindos/kernel.hpp"

#include "unicode.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <random>
#include <set>

namespace mindos {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::SeqRegression: return "SeqRegression";
    case ErrorCode::EmptyInstructions: return "EmptyInstructions";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::DuplicateModelId: return "DuplicateModelId";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::NoModels: return "NoModels";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::NoRuleAndNoDefault: return "NoRuleAndNoDefault";
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::MissingOperationId: return "MissingOperationId";
    case ErrorCode::UnsupportedParamType: return "UnsupportedParamType";
    case ErrorCode::DuplicateToolId: return "DuplicateToolId";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::MissingRequiredParam: return "MissingRequiredParam";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::UpstreamError: return "UpstreamError";
    case ErrorCode::UnknownBinding: return "UnknownBinding";
    case ErrorCode::UnknownField: return "UnknownField";
    case ErrorCode::DuplicateDoc: return "DuplicateDoc";
    case ErrorCode::PolicyDenied: return "PolicyDenied";
    case ErrorCode::NoCurrentGoal: return "NoCurrentGoal";
    case ErrorCode::EmptyStack: return "EmptyStack";
    case ErrorCode::DuplicateTriggerId: return "DuplicateTriggerId";
    case ErrorCode::UnknownAgent: return "UnknownAgent";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::SessionHalted: return "SessionHalted";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::CorruptState: return "CorruptState";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// time and ids

Instant system_now() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

Instant instant_from_millis(std::int64_t ms) { return Instant{std::chrono::milliseconds{ms}}; }

std::int64_t to_millis(Instant t) { return t.time_since_epoch().count(); }

std::string format_iso8601(Instant t) {
    using namespace std::chrono;
    const auto secs = floor<seconds>(t);
    const auto day = floor<days>(secs);
    const year_month_day ymd{day};
    const hh_mm_ss hms{secs - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::string dump_json(const json& value, int indent) {
    return value.dump(indent, ' ', false, json::error_handler_t::replace);
}

std::string make_id(std::string_view prefix) {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::uint64_t v;
    {
        std::lock_guard lock(mu);
        v = rng();
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%012llx", static_cast<unsigned long long>(v & 0xffffffffffffULL));
    return std::string(prefix) + "-" + buf;
}

bool is_url_safe_id(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
               c == '_' || c == '.' || c == '~';
    });
}

// ---------------------------------------------------------------------------
// enums

std::string_view to_string(DriveKind v) noexcept {
    switch (v) {
    case DriveKind::long_term: return "long_term";
    case DriveKind::short_term: return "short_term";
    case DriveKind::reactive: return "reactive";
    }
    return "";
}

std::string_view to_string(DriveStatus v) noexcept {
    switch (v) {
    case DriveStatus::active: return "active";
    case DriveStatus::satisfied: return "satisfied";
    case DriveStatus::halted: return "halted";
    }
    return "";
}

std::string_view to_string(MatchMode v) noexcept { return v == MatchMode::exact ? "exact" : "substring"; }

std::string_view to_string(StoreKind v) noexcept {
    switch (v) {
    case StoreKind::agent_profile: return "agent_profile";
    case StoreKind::user_profile: return "user_profile";
    case StoreKind::user_structured: return "user_structured";
    case StoreKind::domain_knowledge: return "domain_knowledge";
    case StoreKind::tools: return "tools";
    }
    return "";
}

std::optional<DriveKind> parse_drive_kind(std::string_view s) {
    for (auto k : {DriveKind::long_term, DriveKind::short_term, DriveKind::reactive})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::optional<DriveStatus> parse_drive_status(std::string_view s) {
    for (auto k : {DriveStatus::active, DriveStatus::satisfied, DriveStatus::halted})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::optional<MatchMode> parse_match_mode(std::string_view s) {
    if (s == "exact") return MatchMode::exact;
    if (s == "substring") return MatchMode::substring;
    return std::nullopt;
}

std::optional<StoreKind> parse_store_kind(std::string_view s) {
    for (auto k : kAllStoreKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// text

std::string simple_lowercase(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    unicode::for_each_codepoint(text, [&](char32_t cp, std::string_view raw, bool valid) {
        if (valid)
            unicode::append_utf8(out, unicode::simple_lower(cp));
        else
            out.append(raw);
    });
    return out;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    unicode::for_each_codepoint(text, [&](char32_t cp, std::string_view raw, bool valid) {
        if (valid && unicode::is_space(cp)) {
            pending_space = !out.empty();
            return;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        if (valid)
            unicode::append_utf8(out, unicode::simple_lower(cp));
        else
            out.append(raw);
    });
    return out;
}

// ---------------------------------------------------------------------------
// validation

namespace {

std::string indexed(std::string_view base, std::size_t i, std::string_view field) {
    std::string s(base);
    s += "[" + std::to_string(i) + "]";
    if (!field.empty()) {
        s += ".";
        s += field;
    }
    return s;
}

} // namespace

ValidationReport validate_agent_config(const AgentConfig& config) {
    ValidationReport report;
    if (normalize_text(config.name).empty()) report.push_back({"name", "empty"});
    if (!config.agent_id.empty() && !is_url_safe_id(config.agent_id))
        report.push_back({"agent_id", "not_url_safe"});
    if (config.step_limit < 1) report.push_back({"step_limit", "must_be_positive"});
    if (config.retrieval_k < 1) report.push_back({"retrieval_k", "must_be_positive"});

    std::set<std::string> trigger_ids;
    for (std::size_t i = 0; i < config.drives.size(); ++i) {
        const Drive& d = config.drives[i];
        if (d.drive_id.empty())
            report.push_back({indexed("drives", i, "drive_id"), "empty"});
        else if (!trigger_ids.insert(d.drive_id).second)
            report.push_back({indexed("drives", i, "drive_id"), "duplicate"});
        if (d.kind == DriveKind::reactive) {
            if (normalize_text(d.pattern).empty()) report.push_back({indexed("drives", i, "pattern"), "empty"});
            if (normalize_text(d.response).empty()) report.push_back({indexed("drives", i, "response"), "empty"});
        }
        if (d.kind == DriveKind::long_term && d.status == DriveStatus::satisfied)
            report.push_back({indexed("drives", i, "status"), "long_term_never_satisfied"});
    }
    for (std::size_t i = 0; i < config.triggers.size(); ++i) {
        const Trigger& t = config.triggers[i];
        if (t.trigger_id.empty())
            report.push_back({indexed("triggers", i, "trigger_id"), "empty"});
        else if (!trigger_ids.insert(t.trigger_id).second)
            report.push_back({indexed("triggers", i, "trigger_id"), "duplicate"});
        if (normalize_text(t.pattern).empty()) report.push_back({indexed("triggers", i, "pattern"), "empty"});
    }
    std::set<std::string> tools;
    for (std::size_t i = 0; i < config.tool_ids.size(); ++i) {
        if (config.tool_ids[i].empty())
            report.push_back({indexed("tool_ids", i, ""), "empty"});
        else if (!tools.insert(config.tool_ids[i]).second)
            report.push_back({indexed("tool_ids", i, ""), "duplicate"});
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

class StrictObject {
public:
    StrictObject(const json& j, std::string_view what) : j_(j), what_(what) {
        if (!j.is_object()) throw Error(ErrorCode::Malformed, std::string(what) + " must be an object");
    }

    void allow_only(std::initializer_list<std::string_view> keys) const {
        for (const auto& [key, _] : j_.items()) {
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                throw Error(ErrorCode::Malformed, "unknown field '" + key + "' in " + what_);
        }
    }

    std::string str(const char* key, std::string fallback = {}) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(key, "string");
        return v.get<std::string>();
    }

    bool boolean(const char* key, bool fallback) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail(key, "boolean");
        return v.get<bool>();
    }

    int integer(const char* key, int fallback) const {
        if (!j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) fail(key, "integer");
        return v.get<int>();
    }

    const json* array(const char* key) const {
        if (!j_.contains(key)) return nullptr;
        const auto& v = j_.at(key);
        if (!v.is_array()) fail(key, "array");
        return &v;
    }

    const json* object(const char* key) const {
        if (!j_.contains(key)) return nullptr;
        const auto& v = j_.at(key);
        if (!v.is_object()) fail(key, "object");
        return &v;
    }

private:
    [[noreturn]] void fail(const char* key, const char* type) const {
        throw Error(ErrorCode::Malformed, what_ + "." + key + " must be a " + type);
    }

    const json& j_;
    std::string what_;
};

} // namespace

json to_json(const Drive& d) {
    json j{{"drive_id", d.drive_id},
           {"kind", to_string(d.kind)},
           {"prompt_text", d.prompt_text},
           {"priority", d.priority},
           {"status", to_string(d.status)}};
    if (d.kind == DriveKind::reactive || !d.pattern.empty() || !d.response.empty()) {
        j["pattern"] = d.pattern;
        j["mode"] = to_string(d.match_mode);
        j["response"] = d.response;
    }
    return j;
}

json to_json(const Trigger& t) {
    return json{{"trigger_id", t.trigger_id},
                {"pattern", t.pattern},
                {"mode", to_string(t.mode)},
                {"response", t.response},
                {"enabled", t.enabled}};
}

json to_json(const AgentConfig& c) {
    json drives = json::array();
    for (const auto& d : c.drives) drives.push_back(to_json(d));
    json triggers = json::array();
    for (const auto& t : c.triggers) triggers.push_back(to_json(t));
    return json{{"agent_id", c.agent_id},
                {"name", c.name},
                {"profile", c.profile},
                {"drives", std::move(drives)},
                {"triggers", std::move(triggers)},
                {"tool_ids", c.tool_ids},
                {"memory_policy",
                 {{"store_user_profile", c.memory_policy.store_user_profile},
                  {"store_conversation", c.memory_policy.store_conversation}}},
                {"step_limit", c.step_limit},
                {"retrieval_k", c.retrieval_k}};
}

Drive drive_from_json(const json& j) {
    StrictObject o(j, "drive");
    o.allow_only({"drive_id", "kind", "prompt_text", "priority", "status", "pattern", "mode", "response"});
    Drive d;
    d.drive_id = o.str("drive_id");
    const auto kind = parse_drive_kind(o.str("kind"));
    if (!kind) throw Error(ErrorCode::Malformed, "drive.kind must be one of long_term, short_term, reactive");
    d.kind = *kind;
    d.prompt_text = o.str("prompt_text");
    d.priority = o.integer("priority", 0);
    const auto status = parse_drive_status(o.str("status", "active"));
    if (!status) throw Error(ErrorCode::Malformed, "drive.status must be one of active, satisfied, halted");
    d.status = *status;
    d.pattern = o.str("pattern");
    const auto mode = parse_match_mode(o.str("mode", "substring"));
    if (!mode) throw Error(ErrorCode::Malformed, "drive.mode must be exact or substring");
    d.match_mode = *mode;
    d.response = o.str("response");
    return d;
}

Trigger trigger_from_json(const json& j) {
    StrictObject o(j, "trigger");
    o.allow_only({"trigger_id", "pattern", "mode", "response", "enabled"});
    Trigger t;
    t.trigger_id = o.str("trigger_id");
    t.pattern = o.str("pattern");
    const auto mode = parse_match_mode(o.str("mode", "substring"));
    if (!mode) throw Error(ErrorCode::Malformed, "trigger.mode must be exact or substring");
    t.mode = *mode;
    t.response = o.str("response");
    t.enabled = o.boolean("enabled", true);
    return t;
}

AgentConfig agent_config_from_json(const json& j) {
    StrictObject o(j, "agent");
    o.allow_only({"agent_id", "name", "profile", "drives", "triggers", "tool_ids", "memory_policy", "step_limit",
                  "retrieval_k"});
    AgentConfig c;
    c.agent_id = o.str("agent_id");
    c.name = o.str("name");
    c.profile = o.str("profile");
    if (const json* drives = o.array("drives"))
        for (const auto& d : *drives) c.drives.push_back(drive_from_json(d));
    if (const json* triggers = o.array("triggers"))
        for (const auto& t : *triggers) c.triggers.push_back(trigger_from_json(t));
    if (const json* tools = o.array("tool_ids")) {
        for (const auto& t : *tools) {
            if (!t.is_string()) throw Error(ErrorCode::Malformed, "agent.tool_ids must hold strings");
            c.tool_ids.push_back(t.get<std::string>());
        }
    }
    if (const json* policy = o.object("memory_policy")) {
        StrictObject p(*policy, "memory_policy");
        p.allow_only({"store_user_profile", "store_conversation"});
        c.memory_policy.store_user_profile = p.boolean("store_user_profile", false);
        c.memory_policy.store_conversation = p.boolean("store_conversation", false);
    }
    c.step_limit = o.integer("step_limit", 20);
    c.retrieval_k = o.integer("retrieval_k", 4);
    return c;
}

AgentConfig parse_agent_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Malformed, e.what());
    }
    return agent_config_from_json(j);
}

// ---------------------------------------------------------------------------
// directives

std::string_view action_name(const Directive& d) noexcept { return kActionNames[d.index()]; }

json to_json(const ChainStep& step) {
    json j{{"tool", step.tool_id}, {"args", step.args}};
    if (step.bind) j["bind"] = *step.bind;
    return j;
}

json to_json(const Directive& d) {
    struct Visitor {
        json operator()(const Respond& r) const {
            json j{{"action", "respond"}, {"text", r.text}};
            if (!r.actions.empty()) {
                json actions = json::array();
                for (const auto& a : r.actions) actions.push_back({{"label", a.label}, {"action_id", a.action_id}});
                j["actions"] = std::move(actions);
            }
            return j;
        }
        json operator()(const InvokeTool& t) const {
            return {{"action", "invoke_tool"}, {"tool", t.tool_id}, {"args", t.args}};
        }
        json operator()(const QueryMemory& q) const {
            return {{"action", "query_memory"}, {"store", to_string(q.store)}, {"query", q.query}};
        }
        json operator()(const Plan& p) const { return {{"action", "plan"}, {"subgoals", p.subgoals}}; }
        json operator()(const Chain& c) const {
            json steps = json::array();
            for (const auto& s : c.steps) steps.push_back(to_json(s));
            return {{"action", "chain"}, {"steps", std::move(steps)}};
        }
        json operator()(const Finish& f) const { return {{"action", "finish"}, {"result", f.result}}; }
    };
    return std::visit(Visitor{}, d);
}

} // namespace mindos
