#include "mindos/thought_stream.hpp"

namespace mindos {

std::string_view to_string(ParseErrorReason r) noexcept {
    switch (r) {
    case ParseErrorReason::no_json: return "no_json";
    case ParseErrorReason::unknown_action: return "unknown_action";
    case ParseErrorReason::missing_field: return "missing_field";
    case ParseErrorReason::malformed_field: return "malformed_field";
    }
    return "";
}

namespace {

// Index one past the brace matching text[open], or npos.
std::size_t match_brace(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

struct Fail {
    ParseErrorReason reason;
    std::string detail;
};

const json& require(const json& obj, const char* key) {
    if (!obj.contains(key)) throw Fail{ParseErrorReason::missing_field, key};
    return obj.at(key);
}

std::string require_string(const json& obj, const char* key) {
    const json& v = require(obj, key);
    if (!v.is_string()) throw Fail{ParseErrorReason::malformed_field, std::string(key) + " must be a string"};
    return v.get<std::string>();
}

json require_object(const json& obj, const char* key) {
    const json& v = require(obj, key);
    if (!v.is_object()) throw Fail{ParseErrorReason::malformed_field, std::string(key) + " must be an object"};
    return v;
}

const json& require_non_empty_array(const json& obj, const char* key) {
    const json& v = require(obj, key);
    if (!v.is_array() || v.empty())
        throw Fail{ParseErrorReason::malformed_field, std::string(key) + " must be a non-empty list"};
    return v;
}

Directive decode(const json& obj) {
    const std::string action = require_string(obj, "action");
    if (action == "respond") {
        Respond r{require_string(obj, "text"), {}};
        if (obj.contains("actions")) {
            const json& actions = obj["actions"];
            if (!actions.is_array()) throw Fail{ParseErrorReason::malformed_field, "actions must be a list"};
            for (const auto& a : actions) {
                if (!a.is_object()) throw Fail{ParseErrorReason::malformed_field, "action entries must be objects"};
                r.actions.push_back(OfferedAction{require_string(a, "label"), require_string(a, "action_id")});
            }
        }
        return r;
    }
    if (action == "invoke_tool") return InvokeTool{require_string(obj, "tool"), require_object(obj, "args")};
    if (action == "query_memory") {
        const std::string store = require_string(obj, "store");
        const auto kind = parse_store_kind(store);
        if (!kind) throw Fail{ParseErrorReason::malformed_field, "unknown store " + store};
        return QueryMemory{*kind, require_string(obj, "query")};
    }
    if (action == "plan") {
        Plan p;
        for (const auto& g : require_non_empty_array(obj, "subgoals")) {
            if (!g.is_string() || normalize_text(g.get<std::string>()).empty())
                throw Fail{ParseErrorReason::malformed_field, "subgoals must be non-empty strings"};
            p.subgoals.push_back(g.get<std::string>());
        }
        return p;
    }
    if (action == "chain") {
        Chain c;
        for (const auto& s : require_non_empty_array(obj, "steps")) {
            if (!s.is_object()) throw Fail{ParseErrorReason::malformed_field, "chain steps must be objects"};
            ChainStep step{require_string(s, "tool"), require_object(s, "args"), std::nullopt};
            if (s.contains("bind")) step.bind = require_string(s, "bind");
            c.steps.push_back(std::move(step));
        }
        return c;
    }
    if (action == "finish") return Finish{require_string(obj, "result")};
    throw Fail{ParseErrorReason::unknown_action, action};
}

} // namespace

std::optional<json> last_json_object(std::string_view text) {
    std::optional<json> last;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            ++i;
            continue;
        }
        const std::size_t end = match_brace(text, i);
        if (end != std::string_view::npos) {
            json parsed = json::parse(text.substr(i, end - i), nullptr, false);
            if (!parsed.is_discarded() && parsed.is_object()) {
                last = std::move(parsed);
                i = end;
                continue;
            }
        }
        ++i;
    }
    return last;
}

ParseOutcome directive_from_json(const json& object, std::string_view raw) {
    try {
        return decode(object);
    } catch (const Fail& f) {
        return ParseError{f.reason, std::string(raw), f.detail};
    } catch (const json::exception& e) {
        return ParseError{ParseErrorReason::malformed_field, std::string(raw), e.what()};
    }
}

ParseOutcome parse_directive(std::string_view completion) {
    const auto obj = last_json_object(completion);
    if (!obj) return ParseError{ParseErrorReason::no_json, std::string(completion), "no JSON object found"};
    return directive_from_json(*obj, completion);
}

std::string build_repair_prompt(std::string_view original_prompt, const ParseError& error) {
    std::string out(original_prompt);
    out += "\n\n## Format Error\n";
    out += "Your previous reply could not be used (reason: ";
    out += to_string(error.reason);
    out += ").\n";
    out += "Reply with exactly one JSON object. Its \"action\" must be one of:\n"
           "{\"action\":\"respond\",\"text\":\"...\"}\n"
           "{\"action\":\"invoke_tool\",\"tool\":\"<tool_id>\",\"args\":{}}\n"
           "{\"action\":\"query_memory\",\"store\":\"<store_kind>\",\"query\":\"...\"}\n"
           "{\"action\":\"plan\",\"subgoals\":[\"...\"]}\n"
           "{\"action\":\"chain\",\"steps\":[{\"tool\":\"<tool_id>\",\"args\":{},\"bind\":\"<name>\"}]}\n"
           "{\"action\":\"finish\",\"result\":\"...\"}\n";
    return out;
}

json to_json(const StepAttempt& a) {
    json j{{"model_id", a.model_id}, {"template_id", a.template_id}, {"completion", a.completion}};
    if (a.error) j["error"] = {{"reason", to_string(a.error->reason)}, {"detail", a.error->detail}};
    return j;
}

StepResult ThoughtStream::step(const Thought& thought, TaskKind kind) const {
    const auto [model, tmpl] = models_.schedule(kind);
    const std::string prompt = render_prompt(tmpl, serialize_thought(thought));

    StepResult result{Respond{std::string(kFallbackText), {}}, {}, false};
    std::string current = prompt;
    for (int attempt = 0; attempt <= kRepairBudget; ++attempt) {
        StepAttempt record{model.model_id, tmpl.template_id, current, models_.complete(model, current), std::nullopt};
        ParseOutcome outcome = parse_directive(record.completion);
        if (auto* d = std::get_if<Directive>(&outcome)) {
            result.attempts.push_back(std::move(record));
            result.directive = std::move(*d);
            return result;
        }
        const auto& err = std::get<ParseError>(outcome);
        current = build_repair_prompt(prompt, err);
        record.error = err;
        result.attempts.push_back(std::move(record));
    }
    result.fell_back = true;
    return result;
}

} // namespace mindos
