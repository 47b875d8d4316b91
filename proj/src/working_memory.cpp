#include "mindos/working_memory.hpp"

#include <algorithm>

namespace mindos {

std::string_view to_string(EventKind v) noexcept {
    switch (v) {
    case EventKind::agent_action: return "agent_action";
    case EventKind::user_action: return "user_action";
    case EventKind::conversation: return "conversation";
    case EventKind::scene_info: return "scene_info";
    }
    return "";
}

std::string_view to_string(Actor v) noexcept {
    switch (v) {
    case Actor::agent: return "agent";
    case Actor::user: return "user";
    case Actor::system: return "system";
    }
    return "";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
    for (auto k : {EventKind::agent_action, EventKind::user_action, EventKind::conversation, EventKind::scene_info})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::optional<Actor> parse_actor(std::string_view s) {
    for (auto a : {Actor::agent, Actor::user, Actor::system})
        if (to_string(a) == s) return a;
    return std::nullopt;
}

json to_json(const EventRecord& e) {
    return json{{"seq", e.seq},
                {"kind", to_string(e.kind)},
                {"actor", to_string(e.actor)},
                {"payload", e.payload},
                {"timestamp_ms", to_millis(e.timestamp)}};
}

EventRecord event_from_json(const json& j) {
    if (!j.is_object() || j.size() != 5) throw Error(ErrorCode::CorruptSnapshot, "event must have five fields");
    try {
        EventRecord e;
        e.seq = j.at("seq").get<std::uint64_t>();
        const auto kind = parse_event_kind(j.at("kind").get<std::string>());
        const auto actor = parse_actor(j.at("actor").get<std::string>());
        if (!kind || !actor) throw Error(ErrorCode::CorruptSnapshot, "bad event kind or actor");
        e.kind = *kind;
        e.actor = *actor;
        e.payload = j.at("payload").get<std::string>();
        e.timestamp = instant_from_millis(j.at("timestamp_ms").get<std::int64_t>());
        return e;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::CorruptSnapshot, ex.what());
    }
}

ShortTermStore::ShortTermStore(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

void ShortTermStore::record(EventRecord event) {
    if (event.seq <= last_seq_ && (last_seq_ != 0 || !events_.empty()))
        throw Error(ErrorCode::SeqRegression,
                    "seq " + std::to_string(event.seq) + " <= " + std::to_string(last_seq_));
    last_seq_ = event.seq;
    events_.push_back(std::move(event));
    while (events_.size() > capacity_) events_.pop_front();
}

const EventRecord& ShortTermStore::append(EventKind kind, Actor actor, std::string payload, Instant timestamp) {
    record(EventRecord{last_seq_ + 1, kind, actor, std::move(payload), timestamp});
    return events_.back();
}

std::string ShortTermStore::snapshot() const {
    json arr = json::array();
    for (const auto& e : events_) arr.push_back(to_json(e));
    return dump_json(arr);
}

ShortTermStore ShortTermStore::restore(std::string_view blob, std::size_t capacity) {
    json arr;
    try {
        arr = json::parse(blob);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::CorruptSnapshot, e.what());
    }
    if (!arr.is_array()) throw Error(ErrorCode::CorruptSnapshot, "snapshot must be a JSON array");
    if (arr.size() > capacity) throw Error(ErrorCode::CorruptSnapshot, "snapshot exceeds store capacity");
    ShortTermStore store(capacity);
    for (const auto& item : arr) {
        try {
            store.record(event_from_json(item));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::SeqRegression) throw Error(ErrorCode::CorruptSnapshot, e.what());
            throw;
        }
    }
    return store;
}

namespace {

// Keeps the most recent lines whose joined length fits the budget. A single
// oversized newest line is cut at a UTF-8 boundary.
std::optional<std::string> join_recent(const std::vector<std::string>& lines, std::size_t budget) {
    if (lines.empty()) return std::nullopt;
    std::size_t used = 0;
    std::size_t first = lines.size();
    while (first > 0) {
        const std::size_t cost = lines[first - 1].size() + (first == lines.size() ? 0 : 1);
        if (used + cost > budget) break;
        used += cost;
        --first;
    }
    if (first == lines.size()) {
        const std::string& line = lines.back();
        std::size_t end = budget;
        // back off while the byte at `end` continues a multi-byte sequence
        while (end > 0 && (static_cast<unsigned char>(line[end]) & 0xC0) == 0x80) --end;
        return line.substr(0, end);
    }
    std::string out;
    for (std::size_t i = first; i < lines.size(); ++i) {
        if (i != first) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

std::optional<std::string> non_empty(const std::optional<std::string>& s) {
    if (!s || s->empty()) return std::nullopt;
    return s;
}

} // namespace

Thought assemble_thought(const ShortTermStore& store, const ThoughtInputs& inputs) {
    if (normalize_text(inputs.instructions).empty()) throw Error(ErrorCode::EmptyInstructions);

    std::vector<const EventRecord*> ordered;
    ordered.reserve(store.size());
    for (const auto& e : store.events()) ordered.push_back(&e);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const EventRecord* a, const EventRecord* b) { return a->seq < b->seq; });

    std::vector<std::string> dialog;
    std::vector<std::string> history;
    for (const EventRecord* e : ordered) {
        switch (e->kind) {
        case EventKind::conversation:
            dialog.push_back(std::string(to_string(e->actor)) + ": " + e->payload);
            break;
        case EventKind::agent_action:
        case EventKind::user_action:
            history.push_back("[" + std::string(to_string(e->kind)) + "] " + e->payload);
            break;
        case EventKind::scene_info:
            break;
        }
    }

    Thought t;
    t.instructions = inputs.instructions;
    t.dialog_context = join_recent(dialog, kSectionCharBudget);
    t.perception = non_empty(inputs.perception);
    t.user_profile = non_empty(inputs.user_profile);
    t.agent_profile = non_empty(inputs.agent_profile);
    if (!inputs.related_memory.empty()) {
        std::string joined;
        for (std::size_t i = 0; i < inputs.related_memory.size(); ++i) {
            if (i) joined += "\n\n";
            joined += inputs.related_memory[i];
        }
        t.related_memory = non_empty(joined);
    }
    t.history = join_recent(history, kSectionCharBudget);
    t.date = inputs.now;
    return t;
}

std::string serialize_thought(const Thought& thought) {
    std::string out;
    auto section = [&](std::string_view header, const std::string& body) {
        if (!out.empty()) out += "\n";
        out += "## ";
        out += header;
        out += "\n";
        out += body;
        out += "\n";
    };
    auto optional_section = [&](std::string_view header, const std::optional<std::string>& body) {
        if (body) section(header, *body);
    };
    section("Instructions", thought.instructions);
    optional_section("Dialog Context", thought.dialog_context);
    optional_section("Perception", thought.perception);
    optional_section("User Profile", thought.user_profile);
    optional_section("Agent Profile", thought.agent_profile);
    optional_section("Related Memory", thought.related_memory);
    optional_section("History", thought.history);
    section("Date", format_iso8601(thought.date));
    return out;
}

} // namespace mindos
