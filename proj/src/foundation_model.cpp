#include "mindos/foundation_model.hpp"

#include "mindos/net.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mindos {

std::string_view to_string(ProviderKind v) noexcept { return v == ProviderKind::http ? "http" : "scripted"; }

std::string_view to_string(TaskKind v) noexcept {
    switch (v) {
    case TaskKind::decide: return "decide";
    case TaskKind::plan: return "plan";
    case TaskKind::respond: return "respond";
    case TaskKind::lui_layout: return "lui_layout";
    }
    return "";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
    if (s == "scripted") return ProviderKind::scripted;
    if (s == "http") return ProviderKind::http;
    return std::nullopt;
}

std::optional<TaskKind> parse_task_kind(std::string_view s) {
    for (auto k : {TaskKind::decide, TaskKind::plan, TaskKind::respond, TaskKind::lui_layout})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// templates

PromptTemplate passthrough_template(const std::string& model_id, TaskKind kind) {
    return PromptTemplate{"builtin.passthrough", model_id, kind, std::string(kThoughtPlaceholder)};
}

bool has_single_placeholder(std::string_view body) {
    const auto first = body.find(kThoughtPlaceholder);
    if (first == std::string_view::npos) return false;
    return body.find(kThoughtPlaceholder, first + 1) == std::string_view::npos;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view thought_text) {
    const auto pos = tmpl.body.find(kThoughtPlaceholder);
    if (pos == std::string::npos) return tmpl.body;
    std::string out;
    out.reserve(tmpl.body.size() - kThoughtPlaceholder.size() + thought_text.size());
    out.append(tmpl.body, 0, pos);
    out.append(thought_text);
    out.append(tmpl.body, pos + kThoughtPlaceholder.size());
    return out;
}

// ---------------------------------------------------------------------------
// scripted provider

ScriptedScript scripted_rules_from_json(const json& j) {
    ScriptedScript script;
    auto read_rule = [&](const json& r) {
        if (!r.is_object()) throw Error(ErrorCode::Malformed, "scripted rule must be an object");
        if (r.size() == 1 && r.contains("default")) {
            if (!r["default"].is_string()) throw Error(ErrorCode::Malformed, "default must be a string");
            script.default_completion = r["default"].get<std::string>();
            return;
        }
        try {
            script.rules.push_back(ScriptedRule{r.at("order").get<int>(), r.at("pattern").get<std::string>(),
                                                r.at("completion").get<std::string>()});
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Malformed, std::string("scripted rule: ") + e.what());
        }
    };
    if (j.is_array()) {
        for (const auto& r : j) read_rule(r);
    } else if (j.is_object()) {
        if (j.contains("rules")) {
            if (!j["rules"].is_array()) throw Error(ErrorCode::Malformed, "rules must be an array");
            for (const auto& r : j["rules"]) read_rule(r);
        }
        if (j.contains("default")) {
            if (!j["default"].is_string()) throw Error(ErrorCode::Malformed, "default must be a string");
            script.default_completion = j["default"].get<std::string>();
        }
    } else {
        throw Error(ErrorCode::Malformed, "scripted rules must be a list or object");
    }
    return script;
}

ScriptedScript parse_scripted_rules(std::string_view text) {
    try {
        return scripted_rules_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Malformed, e.what());
    }
}

json to_json(const ScriptedScript& script) {
    json arr = json::array();
    for (const auto& r : script.rules)
        arr.push_back({{"order", r.order}, {"pattern", r.pattern}, {"completion", r.completion}});
    if (script.default_completion) arr.push_back({{"default", *script.default_completion}});
    return arr;
}

ScriptedProvider::ScriptedProvider(ScriptedScript script) : script_(std::move(script)) {
    std::stable_sort(script_.rules.begin(), script_.rules.end(),
                     [](const ScriptedRule& a, const ScriptedRule& b) { return a.order < b.order; });
    normalized_patterns_.reserve(script_.rules.size());
    for (const auto& r : script_.rules) normalized_patterns_.push_back(normalize_text(r.pattern));
}

ScriptedProvider::ScriptedProvider(std::vector<ScriptedRule> rules, std::optional<std::string> default_completion)
    : ScriptedProvider(ScriptedScript{std::move(rules), std::move(default_completion)}) {}

std::string ScriptedProvider::complete(std::string_view prompt) {
    calls_.fetch_add(1);
    const std::string haystack = normalize_text(prompt);
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        if (haystack.find(normalized_patterns_[i]) != std::string::npos) return script_.rules[i].completion;
    }
    if (script_.default_completion) return *script_.default_completion;
    throw Error(ErrorCode::NoRuleAndNoDefault, "no scripted rule matched the prompt");
}

// ---------------------------------------------------------------------------
// HTTP provider

HttpProvider::HttpProvider(std::string endpoint, RetryPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(policy) {}

std::string HttpProvider::complete(std::string_view prompt) {
    const auto url = parse_url(endpoint_);
    if (!url) throw Error(ErrorCode::ProviderUnreachable, "invalid endpoint " + endpoint_);
    if (!network_allowed(*url)) throw Error(ErrorCode::ProviderUnreachable, "offline mode blocks " + url->host);

    const std::string body = dump_json(json{{"prompt", std::string(prompt)}});
    std::string last_error;
    auto backoff = policy_.base_backoff;
    for (int attempt = 0; attempt <= policy_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        attempts_.fetch_add(1);
        httplib::Client client(url->origin());
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy_.timeout);
        client.set_connection_timeout(secs.count(), 0);
        client.set_read_timeout(secs.count(), 0);
        auto res = client.Post(url->path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            const json reply = json::parse(res->body);
            return reply.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ProviderUnreachable, std::string("malformed provider reply: ") + e.what());
        }
    }
    throw Error(ErrorCode::ProviderUnreachable, endpoint_ + ": " + last_error);
}

// ---------------------------------------------------------------------------
// registry

void ModelRegistry::register_model(ModelDescriptor descriptor, std::shared_ptr<CompletionProvider> provider) {
    std::unique_lock lock(mu_);
    for (const auto& e : entries_)
        if (e.descriptor.model_id == descriptor.model_id) throw Error(ErrorCode::DuplicateModelId, descriptor.model_id);
    if (descriptor.provider_kind == ProviderKind::http && !descriptor.endpoint)
        throw Error(ErrorCode::InvalidConfig, "http model " + descriptor.model_id + " requires an endpoint");
    if (!provider) {
        if (descriptor.provider_kind == ProviderKind::http)
            provider = std::make_shared<HttpProvider>(*descriptor.endpoint);
        else
            provider = std::make_shared<ScriptedProvider>(ScriptedScript{});
    }
    if (descriptor.is_default) {
        for (auto& e : entries_) e.descriptor.is_default = false;
    } else if (entries_.empty()) {
        descriptor.is_default = true;
    }
    entries_.push_back(Entry{std::move(descriptor), std::move(provider)});
}

void ModelRegistry::register_template(PromptTemplate tmpl) {
    if (!has_single_placeholder(tmpl.body))
        throw Error(ErrorCode::InvalidTemplate, tmpl.template_id + " must contain {{thought}} exactly once");
    std::unique_lock lock(mu_);
    const bool known = std::any_of(entries_.begin(), entries_.end(),
                                   [&](const Entry& e) { return e.descriptor.model_id == tmpl.model_id; });
    if (!known) throw Error(ErrorCode::UnknownModel, tmpl.model_id);
    auto key = std::make_pair(tmpl.model_id, tmpl.task_kind);
    templates_.insert_or_assign(std::move(key), std::move(tmpl));
}

std::optional<ModelDescriptor> ModelRegistry::lookup(const std::string& model_id) const {
    std::shared_lock lock(mu_);
    for (const auto& e : entries_)
        if (e.descriptor.model_id == model_id) return e.descriptor;
    return std::nullopt;
}

std::vector<ModelDescriptor> ModelRegistry::models() const {
    std::shared_lock lock(mu_);
    std::vector<ModelDescriptor> out;
    for (const auto& e : entries_) out.push_back(e.descriptor);
    return out;
}

std::size_t ModelRegistry::size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

std::pair<ModelDescriptor, PromptTemplate> ModelRegistry::schedule(TaskKind kind) const {
    std::shared_lock lock(mu_);
    if (entries_.empty()) throw Error(ErrorCode::NoModels);
    const auto it = std::find_if(entries_.begin(), entries_.end(), [](const Entry& e) { return e.descriptor.is_default; });
    const ModelDescriptor& model = (it != entries_.end() ? *it : entries_.front()).descriptor;
    if (auto t = templates_.find({model.model_id, kind}); t != templates_.end()) return {model, t->second};
    return {model, passthrough_template(model.model_id, kind)};
}

std::shared_ptr<CompletionProvider> ModelRegistry::provider(const std::string& model_id) const {
    std::shared_lock lock(mu_);
    for (const auto& e : entries_)
        if (e.descriptor.model_id == model_id) return e.provider;
    return nullptr;
}

std::string ModelRegistry::complete(const ModelDescriptor& descriptor, std::string_view prompt) const {
    auto p = provider(descriptor.model_id);
    if (!p) throw Error(ErrorCode::UnknownModel, descriptor.model_id);
    return p->complete(prompt);
}

void load_model_config(ModelRegistry& registry, const json& config, const std::filesystem::path& base_dir) {
    if (!config.is_object()) throw Error(ErrorCode::Malformed, "model config must be an object");
    try {
        for (const auto& m : config.value("models", json::array())) {
            ModelDescriptor d;
            d.model_id = m.at("model_id").get<std::string>();
            const auto kind = parse_provider_kind(m.value("provider_kind", "scripted"));
            if (!kind) throw Error(ErrorCode::Malformed, "provider_kind must be scripted or http");
            d.provider_kind = *kind;
            if (m.contains("endpoint")) d.endpoint = m["endpoint"].get<std::string>();
            d.is_default = m.value("default", false);
            std::shared_ptr<CompletionProvider> provider;
            if (d.provider_kind == ProviderKind::scripted) {
                ScriptedScript script;
                if (m.contains("rules_file")) {
                    std::ifstream in(base_dir / m["rules_file"].get<std::string>());
                    if (!in) throw Error(ErrorCode::NotFound, "rules file " + m["rules_file"].get<std::string>());
                    std::stringstream ss;
                    ss << in.rdbuf();
                    script = parse_scripted_rules(ss.str());
                } else if (m.contains("rules")) {
                    script = scripted_rules_from_json(m["rules"]);
                }
                if (m.contains("default_completion")) script.default_completion = m["default_completion"].get<std::string>();
                provider = std::make_shared<ScriptedProvider>(std::move(script));
            }
            registry.register_model(std::move(d), std::move(provider));
        }
        for (const auto& t : config.value("templates", json::array())) {
            PromptTemplate tmpl;
            tmpl.template_id = t.at("template_id").get<std::string>();
            tmpl.model_id = t.at("model_id").get<std::string>();
            const auto kind = parse_task_kind(t.at("task_kind").get<std::string>());
            if (!kind) throw Error(ErrorCode::Malformed, "unknown task_kind");
            tmpl.task_kind = *kind;
            tmpl.body = t.at("body").get<std::string>();
            registry.register_template(std::move(tmpl));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("model config: ") + e.what());
    }
}

} // namespace mindos
