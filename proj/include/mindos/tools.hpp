#pragma once
// Specialist tools: OpenAPI import, argument validation, direct dispatch of
// a single tool, placeholder bindings and the sequential chain executor.

#include "mindos/kernel.hpp"
#include "mindos/memory.hpp"

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

enum class ParamLocation { query, body, path };
enum class ParamType { string, number, boolean };

std::string_view to_string(ParamLocation v) noexcept;
std::string_view to_string(ParamType v) noexcept;

struct ParamSpec {
    std::string name;
    ParamLocation location = ParamLocation::query;
    ParamType type = ParamType::string;
    bool required = false;

    bool operator==(const ParamSpec&) const = default;
};

struct OutputField {
    std::string name;
    ParamType type = ParamType::string;

    bool operator==(const OutputField&) const = default;
};

struct ToolSpec {
    std::string tool_id;
    std::string name;
    std::string description;
    std::string endpoint; // URL template, path params as {name}
    std::string method;   // upper-case HTTP verb, or "BUILTIN"
    std::vector<ParamSpec> params;
    std::vector<OutputField> output_fields;

    bool operator==(const ToolSpec&) const = default;
};

json to_json(const ToolSpec& spec);
ToolSpec tool_spec_from_json(const json& j);

inline constexpr std::string_view kWebSearchTool = "web_search";
inline constexpr std::string_view kImageCreateTool = "image_create";
bool is_builtin_tool(std::string_view tool_id) noexcept;

struct ImportOptions {
    /// Overrides for OpenAPI server variables (e.g. {"port": "8089"}).
    std::map<std::string, std::string> server_variables;
    /// Replaces servers[0] entirely when set.
    std::optional<std::string> base_url;
};

/// One ToolSpec per (path, method), ordered by path then method. Throws
/// MalformedDocument, MissingOperationId, UnsupportedParamType.
std::vector<ToolSpec> import_openapi(std::string_view document, const ImportOptions& options = {});

/// YAML or JSON text to JSON. Throws MalformedDocument.
json parse_yaml_or_json(std::string_view text);

enum class ToolStatus { ok, error };

struct ToolResult {
    ToolStatus status = ToolStatus::ok;
    json fields = json::object();
    std::string raw;

    bool ok() const noexcept { return status == ToolStatus::ok; }
    bool operator==(const ToolResult&) const = default;
};

json to_json(const ToolResult& r);

using Bindings = std::map<std::string, ToolResult>;

/// Replaces "${bind.field}" placeholders. A value that is exactly one
/// placeholder takes the bound JSON value; embedded placeholders render as
/// text. No recursive expansion. Throws UnknownBinding, UnknownField.
json substitute_bindings(const json& args, const Bindings& bindings);

struct ChainOutcome {
    std::vector<std::pair<ChainStep, ToolResult>> completed; // includes the failing step
    std::optional<std::size_t> failed_at;
};

json to_json(const ChainOutcome& outcome);

struct WebSearchConfig {
    std::optional<std::string> endpoint; // GET <endpoint>?q=...
    std::chrono::seconds ttl{3600};
    std::optional<std::filesystem::path> cache_file;
    std::map<std::string, std::string> fixtures; // normalized query -> result
    TimeSource clock = system_now;
};

/// Builtin web search with a normalized-query cache. Offline mode serves only
/// cache and fixtures.
class WebSearchService {
public:
    explicit WebSearchService(WebSearchConfig config = {});

    ToolResult search(std::string_view query);

    std::size_t live_calls() const noexcept { return live_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
    json cache_json() const;

private:
    struct CacheEntry {
        std::string result;
        Instant stored_at;
    };

    void persist_locked() const;

    WebSearchConfig config_;
    mutable std::shared_mutex mu_;
    std::map<std::string, CacheEntry> cache_;
    std::atomic<std::size_t> live_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

class ToolRegistry {
public:
    /// Builtins are always registered. Registered tools are mirrored into the
    /// tools store of `mirror` when given.
    explicit ToolRegistry(std::shared_ptr<MemoryIndex> mirror = nullptr,
                          std::shared_ptr<WebSearchService> web_search = nullptr);

    ToolRegistry(const ToolRegistry&) = delete;
    ToolRegistry& operator=(const ToolRegistry&) = delete;

    /// Throws DuplicateToolId.
    void register_tool(ToolSpec spec);
    std::optional<ToolSpec> lookup(const std::string& tool_id) const;
    /// Registration order; builtins first when included.
    std::vector<ToolSpec> tools(bool include_builtins = false) const;

    /// Throws UnknownTool, MissingRequiredParam, TypeMismatch, UpstreamError.
    ToolResult invoke(const std::string& tool_id, const json& args) const;

    /// Strictly sequential; the first failure aborts the chain.
    ChainOutcome run_chain(const std::vector<ChainStep>& plan) const;

    std::size_t invocation_count(const std::string& tool_id) const;
    std::size_t total_invocations() const;

    WebSearchService& web_search() const { return *web_search_; }

private:
    ToolResult dispatch_http(const ToolSpec& spec, const json& args) const;
    void count(const std::string& tool_id) const;

    std::shared_ptr<MemoryIndex> mirror_;
    std::shared_ptr<WebSearchService> web_search_;
    mutable std::shared_mutex mu_;
    std::vector<ToolSpec> specs_;
    mutable std::mutex count_mu_;
    mutable std::map<std::string, std::size_t> counts_;
};

/// Validation only: required params present and scalar types match.
void validate_args(const ToolSpec& spec, const json& args);

} // namespace mindos
