#include "mindos/lui.hpp"

#include <set>

namespace mindos {

std::string normalize_input(const InputEvent& event) {
    return std::visit(
        [](const auto& e) -> std::string {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, Utterance>) {
                return e.text;
            } else if constexpr (std::is_same_v<T, FileUpload>) {
                return "User uploaded file '" + e.name + "' (" + e.media_type + ", " + std::to_string(e.byte_count) +
                       " bytes).";
            } else if constexpr (std::is_same_v<T, UiAction>) {
                return "User clicked '" + e.label + "'.";
            } else {
                if (e.caption && !e.caption->empty()) return "User shared an image: " + *e.caption;
                return "User shared an image.";
            }
        },
        event);
}

json to_json(const InputEvent& event) {
    return std::visit(
        [](const auto& e) -> json {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, Utterance>) {
                return json{{"type", "utterance"}, {"text", e.text}};
            } else if constexpr (std::is_same_v<T, FileUpload>) {
                return json{{"type", "file_upload"}, {"name", e.name}, {"media_type", e.media_type},
                            {"byte_count", e.byte_count}};
            } else if constexpr (std::is_same_v<T, UiAction>) {
                return json{{"type", "ui_action"}, {"element_id", e.element_id}, {"label", e.label}};
            } else {
                json j{{"type", "image_ref"}};
                if (e.caption) j["caption"] = *e.caption;
                return j;
            }
        },
        event);
}

InputEvent input_event_from_json(const json& j) {
    try {
        if (!j.is_object()) throw Error(ErrorCode::Malformed, "input event must be an object");
        const std::string type = j.at("type").get<std::string>();
        if (type == "utterance") return Utterance{j.at("text").get<std::string>()};
        if (type == "file_upload")
            return FileUpload{j.at("name").get<std::string>(), j.at("media_type").get<std::string>(),
                              j.at("byte_count").get<std::uint64_t>()};
        if (type == "ui_action") return UiAction{j.at("element_id").get<std::string>(), j.at("label").get<std::string>()};
        if (type == "image_ref") {
            ImageRef r;
            if (j.contains("caption") && !j["caption"].is_null()) r.caption = j["caption"].get<std::string>();
            return r;
        }
        throw Error(ErrorCode::Malformed, "unknown input event type " + type);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("input event: ") + e.what());
    }
}

std::string_view to_string(ElementKind k) noexcept {
    switch (k) {
    case ElementKind::text_block: return "text_block";
    case ElementKind::button: return "button";
    case ElementKind::option_list: return "option_list";
    case ElementKind::file_ref: return "file_ref";
    }
    return "";
}

ordered_json to_json(const LayoutPlan& plan) {
    ordered_json elements = ordered_json::array();
    for (const auto& e : plan.elements) {
        ordered_json el;
        el["kind"] = to_string(e.kind);
        switch (e.kind) {
        case ElementKind::text_block:
        case ElementKind::file_ref:
            el["text"] = e.text;
            break;
        case ElementKind::button:
            el["label"] = e.label;
            el["element_id"] = e.element_id;
            break;
        case ElementKind::option_list:
            el["label"] = e.label;
            el["element_id"] = e.element_id;
            el["options"] = e.options;
            break;
        }
        elements.push_back(std::move(el));
    }
    ordered_json out;
    out["elements"] = std::move(elements);
    return out;
}

LayoutPlan layout_from_json(const json& j) {
    try {
        LayoutPlan plan;
        for (const auto& el : j.at("elements")) {
            const std::string kind = el.at("kind").get<std::string>();
            LayoutElement e;
            if (kind == "text_block" || kind == "file_ref") {
                e.kind = kind == "text_block" ? ElementKind::text_block : ElementKind::file_ref;
                e.text = el.at("text").get<std::string>();
            } else if (kind == "button") {
                e.kind = ElementKind::button;
                e.label = el.at("label").get<std::string>();
                e.element_id = el.at("element_id").get<std::string>();
            } else if (kind == "option_list") {
                e.kind = ElementKind::option_list;
                e.label = el.value("label", "");
                e.element_id = el.at("element_id").get<std::string>();
                e.options = el.at("options").get<std::vector<std::string>>();
            } else {
                throw Error(ErrorCode::Malformed, "unknown element kind " + kind);
            }
            plan.elements.push_back(std::move(e));
        }
        return plan;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("layout plan: ") + e.what());
    }
}

LayoutPlan plan_layout(std::string_view response_text, const std::vector<OfferedAction>& actions) {
    if (normalize_text(response_text).empty()) throw Error(ErrorCode::EmptyResponse);
    LayoutPlan plan;
    plan.elements.push_back(LayoutElement{ElementKind::text_block, std::string(response_text), {}, {}, {}});
    std::set<std::string> used;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        std::string base = actions[i].action_id.empty() ? "action-" + std::to_string(i + 1) : actions[i].action_id;
        std::string id = base;
        for (int n = 2; used.count(id); ++n) id = base + "-" + std::to_string(n);
        used.insert(id);
        plan.elements.push_back(LayoutElement{ElementKind::button, {}, actions[i].label, id, {}});
    }
    return plan;
}

UiAction resolve_action(const LayoutPlan& plan, std::string_view element_id) {
    for (const auto& e : plan.elements) {
        if ((e.kind == ElementKind::button || e.kind == ElementKind::option_list) && e.element_id == element_id)
            return UiAction{e.element_id, e.label};
    }
    throw Error(ErrorCode::UnknownElement, std::string(element_id));
}

} // namespace mindos
