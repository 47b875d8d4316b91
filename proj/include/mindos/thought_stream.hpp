#pragma once
// The central processor: renders a Thought through the scheduled model,
// parses the completion into a Directive, and repairs malformed replies.

#include "mindos/foundation_model.hpp"
#include "mindos/kernel.hpp"
#include "mindos/working_memory.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mindos {

enum class ParseErrorReason { no_json, unknown_action, missing_field, malformed_field };

std::string_view to_string(ParseErrorReason r) noexcept;

struct ParseError {
    ParseErrorReason reason = ParseErrorReason::no_json;
    std::string raw;
    std::string detail;

    bool operator==(const ParseError&) const = default;
};

using ParseOutcome = std::variant<Directive, ParseError>;

/// The last top-level, syntactically valid JSON object embedded in `text`.
std::optional<json> last_json_object(std::string_view text);

/// Never throws; failures are returned in the ParseError arm.
ParseOutcome parse_directive(std::string_view completion);

/// Validates a decoded object against the directive grammar.
ParseOutcome directive_from_json(const json& object, std::string_view raw = {});

std::string build_repair_prompt(std::string_view original_prompt, const ParseError& error);

inline constexpr std::string_view kFallbackText = "I could not determine a next step.";
inline constexpr int kRepairBudget = 2;

struct StepAttempt {
    std::string model_id;
    std::string template_id;
    std::string prompt;
    std::string completion;
    std::optional<ParseError> error;
};

json to_json(const StepAttempt& attempt);

struct StepResult {
    Directive directive;
    std::vector<StepAttempt> attempts; // 1 to 1 + kRepairBudget entries
    bool fell_back = false;
};

class ThoughtStream {
public:
    explicit ThoughtStream(const ModelRegistry& models) : models_(models) {}

    /// serialize -> schedule -> render -> complete -> parse, with up to
    /// kRepairBudget repair prompts. ProviderUnreachable propagates.
    StepResult step(const Thought& thought, TaskKind kind) const;

private:
    const ModelRegistry& models_;
};

} // namespace mindos
