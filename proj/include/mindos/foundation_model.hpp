#pragma once
// Foundation model layers: a pool of model descriptors, prompt templates per
// task kind, and the schedule that picks a (model, template) pair.

#include "mindos/kernel.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

namespace mindos {

enum class ProviderKind { scripted, http };
enum class TaskKind { decide, plan, respond, lui_layout };

std::string_view to_string(ProviderKind v) noexcept;
std::string_view to_string(TaskKind v) noexcept;
std::optional<ProviderKind> parse_provider_kind(std::string_view s);
std::optional<TaskKind> parse_task_kind(std::string_view s);

struct ModelDescriptor {
    std::string model_id;
    ProviderKind provider_kind = ProviderKind::scripted;
    std::optional<std::string> endpoint;
    bool is_default = false;

    bool operator==(const ModelDescriptor&) const = default;
};

inline constexpr std::string_view kThoughtPlaceholder = "{{thought}}";

struct PromptTemplate {
    std::string template_id;
    std::string model_id;
    TaskKind task_kind = TaskKind::decide;
    std::string body;

    bool operator==(const PromptTemplate&) const = default;
};

/// Body is exactly the placeholder.
PromptTemplate passthrough_template(const std::string& model_id, TaskKind kind);
bool has_single_placeholder(std::string_view body);
/// Single-pass substitution; the thought text is never re-expanded.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view thought_text);

class CompletionProvider {
public:
    virtual ~CompletionProvider() = default;
    virtual std::string complete(std::string_view prompt) = 0;
};

struct ScriptedRule {
    int order = 0;
    std::string pattern;
    std::string completion;

    bool operator==(const ScriptedRule&) const = default;
};

struct ScriptedScript {
    std::vector<ScriptedRule> rules;
    std::optional<std::string> default_completion;
};

/// Accepts a JSON list of rules with an optional {"default": ...} element,
/// or an object {"rules": [...], "default": ...}.
ScriptedScript parse_scripted_rules(std::string_view text);
ScriptedScript scripted_rules_from_json(const json& j);
json to_json(const ScriptedScript& script);

/// Deterministic rule-based provider: the lowest-order rule whose normalized
/// pattern is a substring of the normalized prompt wins.
class ScriptedProvider final : public CompletionProvider {
public:
    explicit ScriptedProvider(ScriptedScript script);
    ScriptedProvider(std::vector<ScriptedRule> rules, std::optional<std::string> default_completion);

    std::string complete(std::string_view prompt) override;

    std::size_t calls() const noexcept { return calls_.load(); }
    void reset_calls() noexcept { calls_.store(0); }
    const ScriptedScript& script() const noexcept { return script_; }

private:
    ScriptedScript script_;
    std::vector<std::string> normalized_patterns_; // parallel to script_.rules, sorted by order
    std::atomic<std::size_t> calls_{0};
};

struct RetryPolicy {
    int retries = 2;
    std::chrono::milliseconds base_backoff{250};
    std::chrono::milliseconds timeout{10000};
};

/// POSTs {"prompt": ...} and reads {"text": ...}.
class HttpProvider final : public CompletionProvider {
public:
    explicit HttpProvider(std::string endpoint, RetryPolicy policy = {});

    std::string complete(std::string_view prompt) override;

    std::size_t attempts() const noexcept { return attempts_.load(); }

private:
    std::string endpoint_;
    RetryPolicy policy_;
    std::atomic<std::size_t> attempts_{0};
};

class ModelRegistry {
public:
    ModelRegistry() = default;
    ModelRegistry(const ModelRegistry&) = delete;
    ModelRegistry& operator=(const ModelRegistry&) = delete;

    /// Throws DuplicateModelId. A new default demotes the previous one; the
    /// first model registered becomes default when none is marked.
    void register_model(ModelDescriptor descriptor, std::shared_ptr<CompletionProvider> provider = nullptr);
    /// Replaces any template for the same (model, task kind). Throws
    /// InvalidTemplate or UnknownModel.
    void register_template(PromptTemplate tmpl);

    std::optional<ModelDescriptor> lookup(const std::string& model_id) const;
    std::vector<ModelDescriptor> models() const;
    std::size_t size() const;

    /// Throws NoModels on an empty registry.
    std::pair<ModelDescriptor, PromptTemplate> schedule(TaskKind kind) const;

    /// Throws UnknownModel, ProviderUnreachable, NoRuleAndNoDefault.
    std::string complete(const ModelDescriptor& descriptor, std::string_view prompt) const;

    std::shared_ptr<CompletionProvider> provider(const std::string& model_id) const;

private:
    struct Entry {
        ModelDescriptor descriptor;
        std::shared_ptr<CompletionProvider> provider;
    };

    mutable std::shared_mutex mu_;
    std::vector<Entry> entries_; // registration order
    std::map<std::pair<std::string, TaskKind>, PromptTemplate> templates_;
};

/// Loads {"models": [...], "templates": [...]}; scripted models take inline
/// "rules" or a "rules_file" resolved against `base_dir`.
void load_model_config(ModelRegistry& registry, const json& config, const std::filesystem::path& base_dir = {});

} // namespace mindos
