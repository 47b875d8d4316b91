#include "mindos/tools.hpp"

#include "mindos/net.hpp"

#include <httplib.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

namespace mindos {

std::string_view to_string(ParamLocation v) noexcept {
    switch (v) {
    case ParamLocation::query: return "query";
    case ParamLocation::body: return "body";
    case ParamLocation::path: return "path";
    }
    return "";
}

std::string_view to_string(ParamType v) noexcept {
    switch (v) {
    case ParamType::string: return "string";
    case ParamType::number: return "number";
    case ParamType::boolean: return "boolean";
    }
    return "";
}

namespace {

std::optional<ParamLocation> parse_location(std::string_view s) {
    for (auto v : {ParamLocation::query, ParamLocation::body, ParamLocation::path})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

std::optional<ParamType> parse_param_type(std::string_view s) {
    for (auto v : {ParamType::string, ParamType::number, ParamType::boolean})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

bool matches_type(const json& v, ParamType t) {
    switch (t) {
    case ParamType::string: return v.is_string();
    case ParamType::number: return v.is_number();
    case ParamType::boolean: return v.is_boolean();
    }
    return false;
}

std::string value_text(const json& v) { return v.is_string() ? v.get<std::string>() : dump_json(v); }

} // namespace

bool is_builtin_tool(std::string_view tool_id) noexcept {
    return tool_id == kWebSearchTool || tool_id == kImageCreateTool;
}

json to_json(const ToolSpec& s) {
    json params = json::array();
    for (const auto& p : s.params)
        params.push_back({{"name", p.name}, {"location", to_string(p.location)}, {"type", to_string(p.type)},
                          {"required", p.required}});
    json outputs = json::array();
    for (const auto& o : s.output_fields) outputs.push_back({{"name", o.name}, {"type", to_string(o.type)}});
    return json{{"tool_id", s.tool_id},         {"name", s.name},     {"description", s.description},
                {"endpoint", s.endpoint},       {"method", s.method}, {"params", std::move(params)},
                {"output_fields", std::move(outputs)}};
}

ToolSpec tool_spec_from_json(const json& j) {
    try {
        ToolSpec s;
        s.tool_id = j.at("tool_id").get<std::string>();
        s.name = j.value("name", s.tool_id);
        s.description = j.value("description", "");
        s.endpoint = j.at("endpoint").get<std::string>();
        s.method = j.at("method").get<std::string>();
        for (const auto& p : j.value("params", json::array())) {
            const auto loc = parse_location(p.at("location").get<std::string>());
            const auto type = parse_param_type(p.at("type").get<std::string>());
            if (!loc || !type) throw Error(ErrorCode::Malformed, "bad param location or type");
            s.params.push_back(ParamSpec{p.at("name").get<std::string>(), *loc, *type, p.value("required", false)});
        }
        for (const auto& o : j.value("output_fields", json::array())) {
            const auto type = parse_param_type(o.at("type").get<std::string>());
            if (!type) throw Error(ErrorCode::Malformed, "bad output field type");
            s.output_fields.push_back(OutputField{o.at("name").get<std::string>(), *type});
        }
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("tool spec: ") + e.what());
    }
}

json to_json(const ToolResult& r) {
    return json{{"status", r.ok() ? "ok" : "error"}, {"fields", r.fields}, {"raw", r.raw}};
}

json to_json(const ChainOutcome& o) {
    json steps = json::array();
    for (const auto& [step, result] : o.completed) steps.push_back({{"step", to_json(step)}, {"result", to_json(result)}});
    json j{{"completed", std::move(steps)}};
    j["failed_at"] = o.failed_at ? json(*o.failed_at) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// OpenAPI import

namespace {

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
        return nullptr;
    case YAML::NodeType::Sequence: {
        json arr = json::array();
        for (const auto& item : node) arr.push_back(yaml_to_json(item));
        return arr;
    }
    case YAML::NodeType::Map: {
        json obj = json::object();
        for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
        return obj;
    }
    case YAML::NodeType::Scalar: {
        const std::string s = node.Scalar();
        if (node.Tag() == "!") return s; // quoted
        if (s == "true" || s == "True" || s == "TRUE") return true;
        if (s == "false" || s == "False" || s == "FALSE") return false;
        if (s == "null" || s == "~" || s == "Null" || s == "NULL") return nullptr;
        static const std::regex int_re(R"([-+]?[0-9]+)");
        static const std::regex float_re(R"([-+]?([0-9]+\.[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?|[-+]?[0-9]+[eE][-+]?[0-9]+)");
        if (std::regex_match(s, int_re)) {
            try {
                return std::stoll(s);
            } catch (const std::out_of_range&) {
                return s;
            }
        }
        if (std::regex_match(s, float_re)) return std::stod(s);
        return s;
    }
    }
    return nullptr;
}

class OpenApiReader {
public:
    explicit OpenApiReader(json doc) : doc_(std::move(doc)) {}

    const json& resolve(const json& node, int depth = 0) const {
        if (!node.is_object() || !node.contains("$ref")) return node;
        if (depth > 16) throw Error(ErrorCode::MalformedDocument, "$ref chain too deep");
        const std::string ref = node["$ref"].get<std::string>();
        if (ref.rfind("#/", 0) != 0) throw Error(ErrorCode::MalformedDocument, "only local $ref supported: " + ref);
        try {
            return resolve(doc_.at(json::json_pointer(ref.substr(1))), depth + 1);
        } catch (const json::exception&) {
            throw Error(ErrorCode::MalformedDocument, "unresolved $ref " + ref);
        }
    }

    static std::optional<ParamType> scalar_type(const json& schema) {
        const std::string type = schema.is_object() ? schema.value("type", "string") : "string";
        if (type == "string") return ParamType::string;
        if (type == "number" || type == "integer") return ParamType::number;
        if (type == "boolean") return ParamType::boolean;
        return std::nullopt;
    }

    ParamType param_type(const json& schema, const std::string& name) const {
        const auto t = scalar_type(resolve(schema));
        if (!t) throw Error(ErrorCode::UnsupportedParamType, name + " (only string, number, boolean)");
        return *t;
    }

    const json& doc() const { return doc_; }

private:
    json doc_;
};

std::string server_base(const json& doc, const ImportOptions& options) {
    if (options.base_url) {
        std::string url = *options.base_url;
        while (!url.empty() && url.back() == '/') url.pop_back();
        return url;
    }
    if (!doc.contains("servers") || !doc["servers"].is_array() || doc["servers"].empty()) return "";
    const json& server = doc["servers"][0];
    std::string url = server.value("url", "");
    if (server.contains("variables") && server["variables"].is_object()) {
        for (const auto& [name, var] : server["variables"].items()) {
            std::string value = var.is_object() && var.contains("default") ? value_text(var["default"]) : "";
            if (auto it = options.server_variables.find(name); it != options.server_variables.end()) value = it->second;
            const std::string token = "{" + name + "}";
            for (auto pos = url.find(token); pos != std::string::npos; pos = url.find(token))
                url.replace(pos, token.size(), value);
        }
    }
    while (!url.empty() && url.back() == '/') url.pop_back();
    return url;
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

} // namespace

json parse_yaml_or_json(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::MalformedDocument, "invalid JSON");
        return j;
    }
    try {
        return yaml_to_json(YAML::Load(std::string(text)));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::MalformedDocument, e.what());
    }
}

std::vector<ToolSpec> import_openapi(std::string_view document, const ImportOptions& options) {
    const OpenApiReader reader(parse_yaml_or_json(document));
    const json& doc = reader.doc();
    if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "document must be a mapping");
    if (!doc.contains("openapi") || !doc["openapi"].is_string() || doc["openapi"].get<std::string>().rfind("3.", 0) != 0)
        throw Error(ErrorCode::MalformedDocument, "expected an OpenAPI 3.x document");
    if (!doc.contains("paths") || doc["paths"].is_null()) return {};
    if (!doc["paths"].is_object()) throw Error(ErrorCode::MalformedDocument, "paths must be a mapping");

    static const std::vector<std::string> kMethods = {"delete", "get", "head", "options", "patch", "post", "put", "trace"};
    const std::string base = server_base(doc, options);

    std::vector<ToolSpec> specs;
    for (const auto& [path, item_raw] : doc["paths"].items()) { // json objects iterate in key order
        const json& item = reader.resolve(item_raw);
        if (!item.is_object()) throw Error(ErrorCode::MalformedDocument, "path item " + path + " must be a mapping");
        const json shared_params = item.value("parameters", json::array());
        for (const auto& method : kMethods) {
            if (!item.contains(method)) continue;
            const json& op = item[method];
            if (!op.is_object()) throw Error(ErrorCode::MalformedDocument, method + " " + path + " must be a mapping");
            if (!op.contains("operationId") || !op["operationId"].is_string() || op["operationId"].get<std::string>().empty())
                throw Error(ErrorCode::MissingOperationId, method + " " + path);

            ToolSpec spec;
            spec.tool_id = op["operationId"].get<std::string>();
            spec.name = op.value("summary", spec.tool_id);
            const std::string summary = op.value("summary", "");
            const std::string description = op.value("description", "");
            spec.description = summary.empty() ? description
                               : description.empty() ? summary
                                                     : summary + " " + description;
            spec.endpoint = base + path;
            spec.method = upper(method);

            std::vector<json> params;
            for (const auto& p : shared_params) params.push_back(reader.resolve(p));
            for (const auto& p : op.value("parameters", json::array())) {
                const json& resolved = reader.resolve(p);
                // operation-level parameters override path-level ones by (name, in)
                std::erase_if(params, [&](const json& q) {
                    return q.value("name", "") == resolved.value("name", "") && q.value("in", "") == resolved.value("in", "");
                });
                params.push_back(resolved);
            }
            for (const auto& p : params) {
                if (!p.is_object() || !p.contains("name") || !p.contains("in"))
                    throw Error(ErrorCode::MalformedDocument, "parameter in " + spec.tool_id + " lacks name/in");
                const std::string name = p["name"].get<std::string>();
                const std::string in = p["in"].get<std::string>();
                ParamLocation loc;
                if (in == "query")
                    loc = ParamLocation::query;
                else if (in == "path")
                    loc = ParamLocation::path;
                else
                    throw Error(ErrorCode::UnsupportedParamType, name + " (location '" + in + "')");
                const bool required = loc == ParamLocation::path || p.value("required", false);
                spec.params.push_back(ParamSpec{name, loc, reader.param_type(p.value("schema", json::object()), name), required});
            }
            if (op.contains("requestBody")) {
                const json& body = reader.resolve(op["requestBody"]);
                const json content = body.value("content", json::object());
                if (!content.contains("application/json"))
                    throw Error(ErrorCode::UnsupportedParamType, spec.tool_id + " request body must be application/json");
                const json schema = reader.resolve(content["application/json"].value("schema", json::object()));
                if (schema.value("type", "object") != "object")
                    throw Error(ErrorCode::UnsupportedParamType, spec.tool_id + " request body must be an object");
                const json required = schema.value("required", json::array());
                const json props = schema.value("properties", json::object());
                for (const auto& [name, prop] : props.items()) {
                    const bool req = std::find(required.begin(), required.end(), json(name)) != required.end();
                    spec.params.push_back(ParamSpec{name, ParamLocation::body, reader.param_type(prop, name), req});
                }
            }
            if (op.contains("responses") && op["responses"].is_object()) {
                for (const auto& [code, resp_raw] : op["responses"].items()) {
                    if (code.empty() || code[0] != '2') continue;
                    const json& resp = reader.resolve(resp_raw);
                    const json content = resp.value("content", json::object());
                    if (!content.contains("application/json")) break;
                    const json schema = reader.resolve(content["application/json"].value("schema", json::object()));
                    const json props = schema.value("properties", json::object());
                    for (const auto& [name, prop] : props.items()) {
                        if (const auto t = OpenApiReader::scalar_type(reader.resolve(prop)))
                            spec.output_fields.push_back(OutputField{name, *t});
                    }
                    break;
                }
            }
            specs.push_back(std::move(spec));
        }
    }
    return specs;
}

// ---------------------------------------------------------------------------
// bindings

json substitute_bindings(const json& args, const Bindings& bindings) {
    static const std::regex placeholder(R"(\$\{([A-Za-z0-9_\-]+)\.([A-Za-z0-9_\-]+)\})");
    auto lookup = [&](const std::string& bind, const std::string& field) -> const json& {
        const auto it = bindings.find(bind);
        if (it == bindings.end()) throw Error(ErrorCode::UnknownBinding, bind);
        if (!it->second.fields.is_object() || !it->second.fields.contains(field))
            throw Error(ErrorCode::UnknownField, bind + "." + field);
        return it->second.fields.at(field);
    };
    std::function<json(const json&)> walk = [&](const json& v) -> json {
        if (v.is_object()) {
            json out = json::object();
            for (const auto& [k, item] : v.items()) out[k] = walk(item);
            return out;
        }
        if (v.is_array()) {
            json out = json::array();
            for (const auto& item : v) out.push_back(walk(item));
            return out;
        }
        if (!v.is_string()) return v;
        const std::string s = v.get<std::string>();
        std::smatch m;
        if (std::regex_match(s, m, placeholder)) return lookup(m[1].str(), m[2].str());
        std::string out;
        auto begin = s.cbegin();
        while (std::regex_search(begin, s.cend(), m, placeholder)) {
            out.append(begin, m[0].first);
            out += value_text(lookup(m[1].str(), m[2].str()));
            begin = m[0].second;
        }
        out.append(begin, s.cend());
        return out;
    };
    return walk(args);
}

// ---------------------------------------------------------------------------
// web search

WebSearchService::WebSearchService(WebSearchConfig config) : config_(std::move(config)) {
    if (!config_.clock) config_.clock = system_now;
    if (config_.cache_file && std::filesystem::exists(*config_.cache_file)) {
        std::ifstream in(*config_.cache_file);
        json j = json::parse(in, nullptr, false);
        if (j.is_object()) {
            for (const auto& [key, entry] : j.items()) {
                if (!entry.is_object() || !entry.contains("result") || !entry.contains("stored_at")) continue;
                cache_[key] = CacheEntry{entry["result"].get<std::string>(),
                                         instant_from_millis(entry["stored_at"].get<std::int64_t>())};
            }
        }
    }
}

json WebSearchService::cache_json() const {
    std::shared_lock lock(mu_);
    json j = json::object();
    for (const auto& [key, entry] : cache_) j[key] = {{"result", entry.result}, {"stored_at", to_millis(entry.stored_at)}};
    return j;
}

void WebSearchService::persist_locked() const {
    if (!config_.cache_file) return;
    json j = json::object();
    for (const auto& [key, entry] : cache_) j[key] = {{"result", entry.result}, {"stored_at", to_millis(entry.stored_at)}};
    std::filesystem::create_directories(config_.cache_file->parent_path());
    std::ofstream out(*config_.cache_file, std::ios::trunc);
    out << dump_json(j, 2) << '\n';
}

ToolResult WebSearchService::search(std::string_view query) {
    const std::string key = normalize_text(query);
    const Instant now = config_.clock();
    auto make = [&](const std::string& result) {
        return ToolResult{ToolStatus::ok, json{{"result", result}}, result};
    };
    {
        std::shared_lock lock(mu_);
        if (auto it = cache_.find(key); it != cache_.end() && now - it->second.stored_at < config_.ttl) {
            cache_hits_.fetch_add(1);
            return make(it->second.result);
        }
    }
    std::string result;
    if (auto f = config_.fixtures.find(key); f != config_.fixtures.end()) {
        result = f->second;
    } else {
        if (!config_.endpoint) throw Error(ErrorCode::UpstreamError, "web_search: no cached result and no endpoint");
        auto url = parse_url(*config_.endpoint);
        if (!url) throw Error(ErrorCode::UpstreamError, "web_search: invalid endpoint");
        if (offline_mode()) throw Error(ErrorCode::UpstreamError, "web_search: offline and no cached result");
        live_calls_.fetch_add(1);
        httplib::Client client(url->origin());
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(10, 0);
        const std::string sep = url->path.find('?') == std::string::npos ? "?" : "&";
        auto res = client.Get(url->path + sep + "q=" + url_encode(query));
        if (!res) throw Error(ErrorCode::UpstreamError, "web_search: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300)
            throw Error(ErrorCode::UpstreamError, "web_search: HTTP " + std::to_string(res->status));
        const json body = json::parse(res->body, nullptr, false);
        result = body.is_object() && body.contains("result") ? value_text(body["result"]) : res->body;
    }
    std::unique_lock lock(mu_);
    cache_[key] = CacheEntry{result, now};
    persist_locked();
    return make(result);
}

// ---------------------------------------------------------------------------
// registry

namespace {

ToolSpec builtin_web_search() {
    return ToolSpec{std::string(kWebSearchTool),
                    "Web search",
                    "Search the web and return a short textual result.",
                    "builtin:web_search",
                    "BUILTIN",
                    {ParamSpec{"query", ParamLocation::query, ParamType::string, true}},
                    {OutputField{"result", ParamType::string}}};
}

ToolSpec builtin_image_create() {
    return ToolSpec{std::string(kImageCreateTool),
                    "Image create",
                    "Create an image from a prompt; returns a placeholder reference.",
                    "builtin:image_create",
                    "BUILTIN",
                    {ParamSpec{"prompt", ParamLocation::body, ParamType::string, true}},
                    {OutputField{"image_ref", ParamType::string}}};
}

std::string mirror_text(const ToolSpec& s) {
    std::string text = s.tool_id + ": " + s.description;
    if (!s.params.empty()) {
        text += " Parameters:";
        for (const auto& p : s.params) {
            text += " " + p.name + " (" + std::string(to_string(p.type)) + (p.required ? ", required)" : ")");
        }
    }
    return text;
}

} // namespace

ToolRegistry::ToolRegistry(std::shared_ptr<MemoryIndex> mirror, std::shared_ptr<WebSearchService> web_search)
    : mirror_(std::move(mirror)),
      web_search_(web_search ? std::move(web_search) : std::make_shared<WebSearchService>()) {
    specs_.push_back(builtin_web_search());
    specs_.push_back(builtin_image_create());
    if (mirror_) {
        for (const auto& s : specs_)
            if (!mirror_->has_document(StoreKind::tools, s.tool_id)) mirror_->ingest_document(StoreKind::tools, s.tool_id, mirror_text(s));
    }
}

void ToolRegistry::register_tool(ToolSpec spec) {
    std::unique_lock lock(mu_);
    for (const auto& s : specs_)
        if (s.tool_id == spec.tool_id) throw Error(ErrorCode::DuplicateToolId, spec.tool_id);
    if (mirror_ && !mirror_->has_document(StoreKind::tools, spec.tool_id))
        mirror_->ingest_document(StoreKind::tools, spec.tool_id, mirror_text(spec));
    specs_.push_back(std::move(spec));
}

std::optional<ToolSpec> ToolRegistry::lookup(const std::string& tool_id) const {
    std::shared_lock lock(mu_);
    for (const auto& s : specs_)
        if (s.tool_id == tool_id) return s;
    return std::nullopt;
}

std::vector<ToolSpec> ToolRegistry::tools(bool include_builtins) const {
    std::shared_lock lock(mu_);
    std::vector<ToolSpec> out;
    for (const auto& s : specs_)
        if (include_builtins || !is_builtin_tool(s.tool_id)) out.push_back(s);
    return out;
}

void validate_args(const ToolSpec& spec, const json& args) {
    if (!args.is_object()) throw Error(ErrorCode::TypeMismatch, "args must be an object");
    for (const auto& p : spec.params) {
        const bool present = args.contains(p.name) && !args.at(p.name).is_null();
        if (!present) {
            if (p.required) throw Error(ErrorCode::MissingRequiredParam, p.name);
            continue;
        }
        if (!matches_type(args.at(p.name), p.type))
            throw Error(ErrorCode::TypeMismatch, p.name + " must be " + std::string(to_string(p.type)));
    }
}

void ToolRegistry::count(const std::string& tool_id) const {
    std::lock_guard lock(count_mu_);
    ++counts_[tool_id];
}

std::size_t ToolRegistry::invocation_count(const std::string& tool_id) const {
    std::lock_guard lock(count_mu_);
    const auto it = counts_.find(tool_id);
    return it == counts_.end() ? 0 : it->second;
}

std::size_t ToolRegistry::total_invocations() const {
    std::lock_guard lock(count_mu_);
    std::size_t total = 0;
    for (const auto& [_, n] : counts_) total += n;
    return total;
}

ToolResult ToolRegistry::invoke(const std::string& tool_id, const json& args) const {
    const auto spec = lookup(tool_id);
    if (!spec) throw Error(ErrorCode::UnknownTool, tool_id);
    validate_args(*spec, args);
    count(tool_id);
    if (tool_id == kWebSearchTool) return web_search_->search(args.at("query").get<std::string>());
    if (tool_id == kImageCreateTool) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(args.at("prompt").get<std::string>())));
        const std::string ref = std::string("image://placeholder/") + buf;
        return ToolResult{ToolStatus::ok, json{{"image_ref", ref}}, ref};
    }
    return dispatch_http(*spec, args);
}

ToolResult ToolRegistry::dispatch_http(const ToolSpec& spec, const json& args) const {
    std::string target = spec.endpoint;
    std::string query;
    json body = json::object();
    for (const auto& p : spec.params) {
        if (!args.contains(p.name) || args.at(p.name).is_null()) continue;
        const json& v = args.at(p.name);
        switch (p.location) {
        case ParamLocation::path: {
            const std::string token = "{" + p.name + "}";
            for (auto pos = target.find(token); pos != std::string::npos; pos = target.find(token))
                target.replace(pos, token.size(), url_encode(value_text(v)));
            break;
        }
        case ParamLocation::query:
            query += (query.empty() ? "" : "&") + url_encode(p.name) + "=" + url_encode(value_text(v));
            break;
        case ParamLocation::body:
            body[p.name] = v;
            break;
        }
    }
    const auto url = parse_url(target);
    if (!url) throw Error(ErrorCode::UpstreamError, spec.tool_id + ": endpoint '" + target + "' is not an absolute URL");
    if (!network_allowed(*url)) throw Error(ErrorCode::UpstreamError, spec.tool_id + ": offline mode blocks " + url->host);
    std::string path = url->path;
    if (!query.empty()) path += (path.find('?') == std::string::npos ? "?" : "&") + query;

    httplib::Client client(url->origin());
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(30, 0);
    httplib::Result res{nullptr, httplib::Error::Unknown};
    const std::string payload = dump_json(body);
    if (spec.method == "GET")
        res = client.Get(path);
    else if (spec.method == "DELETE")
        res = client.Delete(path);
    else if (spec.method == "POST")
        res = client.Post(path, payload, "application/json");
    else if (spec.method == "PUT")
        res = client.Put(path, payload, "application/json");
    else if (spec.method == "PATCH")
        res = client.Patch(path, payload, "application/json");
    else
        throw Error(ErrorCode::UpstreamError, spec.tool_id + ": unsupported method " + spec.method);
    if (!res) throw Error(ErrorCode::UpstreamError, spec.tool_id + ": " + httplib::to_string(res.error()) + " (status 0)");
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::UpstreamError, spec.tool_id + ": HTTP status " + std::to_string(res->status));

    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object())
        return ToolResult{ToolStatus::error, json::object(), res->body};
    ToolResult result{ToolStatus::ok, json::object(), res->body};
    if (spec.output_fields.empty()) {
        result.fields = reply;
        return result;
    }
    for (const auto& f : spec.output_fields) {
        if (!reply.contains(f.name)) return ToolResult{ToolStatus::error, json::object(), res->body};
        result.fields[f.name] = reply[f.name];
    }
    return result;
}

ChainOutcome ToolRegistry::run_chain(const std::vector<ChainStep>& plan) const {
    ChainOutcome outcome;
    Bindings bindings;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const ChainStep& step = plan[i];
        ToolResult result;
        try {
            result = invoke(step.tool_id, substitute_bindings(step.args, bindings));
        } catch (const Error& e) {
            result = ToolResult{ToolStatus::error, json::object(), e.what()};
        }
        ChainStep executed = step;
        outcome.completed.emplace_back(std::move(executed), result);
        if (!result.ok()) {
            outcome.failed_at = i;
            return outcome;
        }
        if (step.bind) bindings[*step.bind] = std::move(result);
    }
    return outcome;
}

} // namespace mindos
