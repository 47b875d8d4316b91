#pragma once
// Short-term event store and the Global Context assembler that turns it into
// a structured Thought prompt.

#include "mindos/kernel.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace mindos {

enum class EventKind { agent_action, user_action, conversation, scene_info };
enum class Actor { agent, user, system };

std::string_view to_string(EventKind v) noexcept;
std::string_view to_string(Actor v) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view s);
std::optional<Actor> parse_actor(std::string_view s);

struct EventRecord {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::conversation;
    Actor actor = Actor::user;
    std::string payload;
    Instant timestamp{};

    bool operator==(const EventRecord&) const = default;
};

json to_json(const EventRecord& e);
EventRecord event_from_json(const json& j);

class ShortTermStore {
public:
    static constexpr std::size_t kDefaultCapacity = 64;

    explicit ShortTermStore(std::size_t capacity = kDefaultCapacity);

    /// Appends, evicting the oldest event when full. Throws SeqRegression.
    void record(EventRecord event);

    /// Convenience: assigns the next sequence number.
    const EventRecord& append(EventKind kind, Actor actor, std::string payload, Instant timestamp);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return events_.size(); }
    bool empty() const noexcept { return events_.empty(); }
    const std::deque<EventRecord>& events() const noexcept { return events_; }
    std::uint64_t last_seq() const noexcept { return last_seq_; }

    /// JSON array of event records.
    std::string snapshot() const;
    /// Throws CorruptSnapshot on malformed input or more events than `capacity`.
    static ShortTermStore restore(std::string_view blob, std::size_t capacity = kDefaultCapacity);

    bool operator==(const ShortTermStore& other) const {
        return capacity_ == other.capacity_ && events_ == other.events_;
    }

private:
    std::size_t capacity_;
    std::deque<EventRecord> events_;
    std::uint64_t last_seq_ = 0;
};

/// The eight Global Context sections, in prompt order.
struct Thought {
    std::string instructions;
    std::optional<std::string> dialog_context;
    std::optional<std::string> perception;
    std::optional<std::string> user_profile;
    std::optional<std::string> agent_profile;
    std::optional<std::string> related_memory;
    std::optional<std::string> history;
    Instant date{};

    bool operator==(const Thought&) const = default;
};

inline constexpr std::size_t kSectionCharBudget = 4000;

struct ThoughtInputs {
    std::string instructions;
    std::optional<std::string> perception;
    std::optional<std::string> user_profile;
    std::optional<std::string> agent_profile;
    std::vector<std::string> related_memory;
    Instant now{};
};

/// Pure: time enters only through inputs.now. Throws EmptyInstructions.
Thought assemble_thought(const ShortTermStore& store, const ThoughtInputs& inputs);

std::string serialize_thought(const Thought& thought);

} // namespace mindos
