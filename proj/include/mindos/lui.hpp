#pragma once
// Language user interface: input events to perception text, responses to
// layout plans, and clicks back to input events.

#include "mindos/kernel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mindos {

using ordered_json = nlohmann::ordered_json;

struct Utterance {
    std::string text;
    bool operator==(const Utterance&) const = default;
};

struct FileUpload {
    std::string name;
    std::string media_type;
    std::uint64_t byte_count = 0;
    bool operator==(const FileUpload&) const = default;
};

struct UiAction {
    std::string element_id;
    std::string label;
    bool operator==(const UiAction&) const = default;
};

struct ImageRef {
    std::optional<std::string> caption;
    bool operator==(const ImageRef&) const = default;
};

using InputEvent = std::variant<Utterance, FileUpload, UiAction, ImageRef>;

std::string normalize_input(const InputEvent& event);

/// {"type":"utterance","text":...}, {"type":"file_upload",...}, ...
json to_json(const InputEvent& event);
/// Throws Malformed.
InputEvent input_event_from_json(const json& j);

enum class ElementKind { text_block, button, option_list, file_ref };

std::string_view to_string(ElementKind k) noexcept;

struct LayoutElement {
    ElementKind kind = ElementKind::text_block;
    std::string text;       // text_block, file_ref
    std::string label;      // button, option_list
    std::string element_id; // button, option_list
    std::vector<std::string> options;

    bool operator==(const LayoutElement&) const = default;
};

struct LayoutPlan {
    std::vector<LayoutElement> elements;
    bool operator==(const LayoutPlan&) const = default;
};

/// Wire shape with "kind" first in every element.
ordered_json to_json(const LayoutPlan& plan);
/// Throws Malformed.
LayoutPlan layout_from_json(const json& j);

/// One text_block, then one button per action in order. Repeated or empty
/// action ids are made unique. Throws EmptyResponse.
LayoutPlan plan_layout(std::string_view response_text, const std::vector<OfferedAction>& actions);

/// Throws UnknownElement.
UiAction resolve_action(const LayoutPlan& plan, std::string_view element_id);

} // namespace mindos
