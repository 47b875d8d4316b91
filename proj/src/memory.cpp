#include "mindos/memory.hpp"

#include "unicode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mindos {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> tokenize(std::string_view text) {
    const std::string lowered = simple_lowercase(text);
    std::vector<std::string> tokens;
    std::string current;
    unicode::for_each_codepoint(lowered, [&](char32_t cp, std::string_view raw, bool valid) {
        if (valid && unicode::is_token_char(cp)) {
            current.append(raw);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    });
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Embedding embed_text(std::string_view text) {
    Embedding v{};
    for (const auto& token : tokenize(text)) {
        const std::uint64_t h = fnv1a64(token);
        const double sign = ((h >> 6) & 1U) == 0 ? 1.0 : -1.0;
        v[h % kEmbeddingDim] += sign;
    }
    const double norm = l2_norm(v);
    if (norm == 0.0) return Embedding{};
    for (auto& x : v) x /= norm;
    return v;
}

double l2_norm(const Embedding& v) noexcept {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

double cosine(const Embedding& a, const Embedding& b) noexcept {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) dot += a[i] * b[i];
    return dot / (na * nb);
}

std::vector<std::string> chunk_document(std::string_view text) {
    std::vector<std::string> tokens;
    {
        std::string current;
        unicode::for_each_codepoint(text, [&](char32_t cp, std::string_view raw, bool valid) {
            if (valid && unicode::is_space(cp)) {
                if (!current.empty()) tokens.push_back(std::exchange(current, {}));
            } else {
                current.append(raw);
            }
        });
        if (!current.empty()) tokens.push_back(std::move(current));
    }
    std::vector<std::string> chunks;
    for (std::size_t start = 0; start < tokens.size(); start += kChunkStride) {
        const std::size_t end = std::min(start + kChunkWindow, tokens.size());
        std::string chunk;
        for (std::size_t i = start; i < end; ++i) {
            if (i != start) chunk.push_back(' ');
            chunk += tokens[i];
        }
        chunks.push_back(std::move(chunk));
        if (end == tokens.size()) break;
    }
    return chunks;
}

json to_json(const Chunk& c) {
    return json{{"chunk_id", c.chunk_id},
                {"doc_id", c.source_doc},
                {"ordinal", c.ordinal},
                {"text", c.text},
                {"vector", c.vector}};
}

Chunk chunk_from_json(const json& j, StoreKind store) {
    try {
        Chunk c;
        c.chunk_id = j.at("chunk_id").get<std::string>();
        c.store = store;
        c.source_doc = j.at("doc_id").get<std::string>();
        c.ordinal = j.at("ordinal").get<std::size_t>();
        c.text = j.at("text").get<std::string>();
        const auto& vec = j.at("vector");
        if (!vec.is_array() || vec.size() != kEmbeddingDim)
            throw Error(ErrorCode::CorruptState, "chunk vector must have 64 entries");
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) c.vector[i] = vec[i].get<double>();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptState, std::string("chunk: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

std::vector<json> read_json_lines(const fs::path& path) {
    std::vector<json> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::CorruptState, path.string() + ": " + e.what());
        }
    }
    return out;
}

void write_json_lines(const fs::path& path, const std::vector<json>& lines) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        for (const auto& l : lines) out << dump_json(l) << '\n';
    }
    fs::rename(tmp, path);
}

void append_json_lines(const fs::path& path, const std::vector<json>& lines) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    for (const auto& l : lines) out << dump_json(l) << '\n';
    out.flush();
}

json message_json(const Message& m) { return json{{"role", m.role}, {"text", m.text}}; }

Message message_from_json(const json& j) {
    try {
        return Message{j.at("role").get<std::string>(), j.at("text").get<std::string>()};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptState, std::string("message: ") + e.what());
    }
}

constexpr const char* kRecordsFile = "records.jsonl";
constexpr const char* kConversationDir = "conversations";

} // namespace

MemoryIndex::MemoryIndex(std::optional<fs::path> dir, MemoryPolicy policy, std::shared_ptr<const Embedder> embedder)
    : dir_(std::move(dir)), embedder_(std::move(embedder)), policy_(policy) {
    if (dir_) {
        fs::create_directories(*dir_);
        load_from_disk();
        writer_ = std::jthread([this](std::stop_token st) { writer_loop(st); });
    }
}

MemoryIndex::~MemoryIndex() {
    if (writer_.joinable()) {
        flush();
        writer_.request_stop();
        queue_cv_.notify_all();
    }
}

fs::path MemoryIndex::store_file(StoreKind kind) const {
    return *dir_ / "stores" / (std::string(to_string(kind)) + ".jsonl");
}

void MemoryIndex::load_from_disk() {
    for (auto kind : kAllStoreKinds) {
        auto& s = store(kind);
        s.chunks.clear();
        for (const auto& line : read_json_lines(store_file(kind))) s.chunks.push_back(chunk_from_json(line, kind));
    }
    records_.clear();
    for (const auto& line : read_json_lines(*dir_ / kRecordsFile)) {
        try {
            records_[line.at("key").get<std::string>()] = line.at("value").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::CorruptState, std::string("record: ") + e.what());
        }
    }
    conversations_.clear();
    const fs::path convo_dir = *dir_ / kConversationDir;
    if (fs::exists(convo_dir)) {
        for (const auto& entry : fs::directory_iterator(convo_dir)) {
            if (entry.path().extension() != ".jsonl") continue;
            auto& log = conversations_[entry.path().stem().string()];
            for (const auto& line : read_json_lines(entry.path())) log.push_back(message_from_json(line));
        }
    }
}

void MemoryIndex::rewrite_store_file(StoreKind kind, const std::vector<Chunk>& chunks) const {
    std::vector<json> lines;
    lines.reserve(chunks.size());
    for (const auto& c : chunks) lines.push_back(to_json(c));
    write_json_lines(store_file(kind), lines);
}

std::size_t MemoryIndex::ingest_document(StoreKind kind, const std::string& doc_id, std::string_view text) {
    const auto pieces = chunk_document(text);
    std::vector<Chunk> fresh;
    fresh.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        Chunk c;
        c.chunk_id = std::string(to_string(kind)) + ":" + doc_id + "#" + std::to_string(i);
        c.store = kind;
        c.text = pieces[i];
        c.vector = embedder_->embed(pieces[i]);
        c.source_doc = doc_id;
        c.ordinal = i;
        fresh.push_back(std::move(c));
    }

    auto& s = store(kind);
    std::unique_lock lock(s.mu);
    if (std::any_of(s.chunks.begin(), s.chunks.end(), [&](const Chunk& c) { return c.source_doc == doc_id; }))
        throw Error(ErrorCode::DuplicateDoc, std::string(to_string(kind)) + "/" + doc_id);
    if (dir_) {
        std::vector<json> lines;
        for (const auto& c : fresh) lines.push_back(to_json(c));
        append_json_lines(store_file(kind), lines);
    }
    s.chunks.insert(s.chunks.end(), fresh.begin(), fresh.end());
    return fresh.size();
}

bool MemoryIndex::has_document(StoreKind kind, const std::string& doc_id) const {
    const auto& s = store(kind);
    std::shared_lock lock(s.mu);
    return std::any_of(s.chunks.begin(), s.chunks.end(), [&](const Chunk& c) { return c.source_doc == doc_id; });
}

bool MemoryIndex::remove_document(StoreKind kind, const std::string& doc_id) {
    auto& s = store(kind);
    std::unique_lock lock(s.mu);
    const auto before = s.chunks.size();
    std::erase_if(s.chunks, [&](const Chunk& c) { return c.source_doc == doc_id; });
    if (s.chunks.size() == before) return false;
    if (dir_) rewrite_store_file(kind, s.chunks);
    return true;
}

std::vector<SearchHit> MemoryIndex::search(StoreKind kind, std::string_view query, std::size_t k) const {
    if (k == 0) return {};
    const Embedding q = embedder_->embed(query);
    if (l2_norm(q) == 0.0) return {};

    const auto& s = store(kind);
    std::shared_lock lock(s.mu);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(s.chunks.size());
    for (std::size_t i = 0; i < s.chunks.size(); ++i) scored.emplace_back(cosine(q, s.chunks[i].vector), i);
    const std::size_t n = std::min(k, scored.size());
    // (score desc, insertion asc) is a total order, so partial_sort is deterministic
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<SearchHit> hits;
    hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Chunk& c = s.chunks[scored[i].second];
        hits.push_back(SearchHit{c.chunk_id, scored[i].first, c.text, c.source_doc});
    }
    return hits;
}

std::vector<Chunk> MemoryIndex::chunks(StoreKind kind) const {
    const auto& s = store(kind);
    std::shared_lock lock(s.mu);
    return s.chunks;
}

std::size_t MemoryIndex::chunk_count(StoreKind kind) const {
    const auto& s = store(kind);
    std::shared_lock lock(s.mu);
    return s.chunks.size();
}

// ---------------------------------------------------------------------------
// records (write-behind)

void MemoryIndex::put_record(const std::string& key, std::string value) {
    if (!policy().store_user_profile) throw Error(ErrorCode::PolicyDenied, "store_user_profile is off");
    {
        std::lock_guard lock(records_mu_);
        records_[key] = value;
    }
    if (!dir_) return;
    {
        std::lock_guard lock(queue_mu_);
        pending_.emplace_back(key, std::move(value));
    }
    queue_cv_.notify_one();
}

std::optional<std::string> MemoryIndex::get_record(const std::string& key) const {
    std::lock_guard lock(records_mu_);
    if (auto it = records_.find(key); it != records_.end()) return it->second;
    return std::nullopt;
}

std::map<std::string, std::string> MemoryIndex::records() const {
    std::lock_guard lock(records_mu_);
    return records_;
}

void MemoryIndex::flush() {
    if (!dir_) return;
    std::unique_lock lock(queue_mu_);
    drained_cv_.wait(lock, [&] { return pending_.empty() && in_flight_ == 0; });
}

void MemoryIndex::writer_loop(std::stop_token stop) {
    std::unique_lock lock(queue_mu_);
    while (true) {
        queue_cv_.wait(lock, stop, [&] { return !pending_.empty(); });
        if (pending_.empty()) {
            if (stop.stop_requested()) return;
            continue;
        }
        std::vector<json> batch;
        while (!pending_.empty()) {
            batch.push_back(json{{"key", pending_.front().first}, {"value", pending_.front().second}});
            pending_.pop_front();
        }
        in_flight_ = batch.size();
        lock.unlock();
        append_json_lines(*dir_ / kRecordsFile, batch);
        lock.lock();
        in_flight_ = 0;
        drained_cv_.notify_all();
    }
}

// ---------------------------------------------------------------------------
// conversations

std::size_t MemoryIndex::archive_conversation(const std::string& session_id, const std::vector<Message>& messages) {
    if (!policy().store_conversation) throw Error(ErrorCode::PolicyDenied, "store_conversation is off");
    if (!is_url_safe_id(session_id)) throw Error(ErrorCode::Malformed, "session id must be URL-safe");
    std::lock_guard lock(convo_mu_);
    auto& log = conversations_[session_id];
    if (dir_ && !messages.empty()) {
        std::vector<json> lines;
        for (const auto& m : messages) lines.push_back(message_json(m));
        append_json_lines(*dir_ / kConversationDir / (session_id + ".jsonl"), lines);
    }
    log.insert(log.end(), messages.begin(), messages.end());
    return log.size();
}

std::vector<Message> MemoryIndex::conversation(const std::string& session_id) const {
    std::lock_guard lock(convo_mu_);
    if (auto it = conversations_.find(session_id); it != conversations_.end()) return it->second;
    return {};
}

std::size_t MemoryIndex::close_conversation(const std::string& session_id) {
    const auto log = conversation(session_id);
    const std::string doc_id = "conversation:" + session_id;
    if (log.empty() || has_document(StoreKind::user_structured, doc_id)) return 0;
    std::string text;
    for (const auto& m : log) {
        if (!text.empty()) text.push_back('\n');
        text += m.role + ": " + m.text;
    }
    return ingest_document(StoreKind::user_structured, doc_id, text);
}

MemoryPolicy MemoryIndex::policy() const {
    std::lock_guard lock(policy_mu_);
    return policy_;
}

void MemoryIndex::set_policy(MemoryPolicy policy) {
    std::lock_guard lock(policy_mu_);
    policy_ = policy;
}

// ---------------------------------------------------------------------------
// manifest

MemoryManifest MemoryIndex::manifest() const {
    MemoryManifest m;
    for (auto kind : kAllStoreKinds) {
        auto& lines = m["stores/" + std::string(to_string(kind)) + ".jsonl"];
        for (const auto& c : chunks(kind)) lines.push_back(to_json(c));
    }
    auto& rec = m[kRecordsFile];
    for (const auto& [k, v] : records()) rec.push_back(json{{"key", k}, {"value", v}});
    std::lock_guard lock(convo_mu_);
    for (const auto& [sid, log] : conversations_) {
        auto& lines = m[std::string(kConversationDir) + "/" + sid + ".jsonl"];
        for (const auto& msg : log) lines.push_back(message_json(msg));
    }
    return m;
}

void MemoryIndex::load_manifest(const MemoryManifest& manifest) {
    flush();
    std::array<std::vector<Chunk>, 5> chunks;
    std::map<std::string, std::string> records;
    std::map<std::string, std::vector<Message>> conversations;
    for (const auto& [file, lines] : manifest) {
        if (file.rfind("stores/", 0) == 0 && file.size() > 13 && file.ends_with(".jsonl")) {
            const auto kind = parse_store_kind(file.substr(7, file.size() - 13));
            if (!kind) throw Error(ErrorCode::CorruptState, "unknown store file " + file);
            for (const auto& l : lines) chunks[static_cast<std::size_t>(*kind)].push_back(chunk_from_json(l, *kind));
        } else if (file == kRecordsFile) {
            for (const auto& l : lines) {
                if (!l.is_object() || !l.contains("key") || !l.contains("value") || !l["key"].is_string() ||
                    !l["value"].is_string())
                    throw Error(ErrorCode::CorruptState, "bad record line");
                records[l["key"].get<std::string>()] = l["value"].get<std::string>();
            }
        } else if (file.rfind(std::string(kConversationDir) + "/", 0) == 0 && file.ends_with(".jsonl")) {
            const std::string sid = file.substr(std::string(kConversationDir).size() + 1,
                                                file.size() - std::string(kConversationDir).size() - 7);
            if (!is_url_safe_id(sid)) throw Error(ErrorCode::CorruptState, "bad conversation id " + sid);
            auto& log = conversations[sid];
            for (const auto& l : lines) log.push_back(message_from_json(l));
        } else {
            throw Error(ErrorCode::CorruptState, "unexpected memory file " + file);
        }
    }
    for (auto kind : kAllStoreKinds) {
        auto& s = store(kind);
        std::unique_lock lock(s.mu);
        s.chunks = std::move(chunks[static_cast<std::size_t>(kind)]);
        if (dir_) rewrite_store_file(kind, s.chunks);
    }
    {
        std::lock_guard lock(records_mu_);
        records_ = std::move(records);
        if (dir_) {
            std::vector<json> lines;
            for (const auto& [k, v] : records_) lines.push_back(json{{"key", k}, {"value", v}});
            write_json_lines(*dir_ / kRecordsFile, lines);
        }
    }
    std::lock_guard lock(convo_mu_);
    conversations_ = std::move(conversations);
    if (dir_) {
        fs::remove_all(*dir_ / kConversationDir);
        for (const auto& [sid, log] : conversations_) {
            std::vector<json> lines;
            for (const auto& m : log) lines.push_back(message_json(m));
            write_json_lines(*dir_ / kConversationDir / (sid + ".jsonl"), lines);
        }
    }
}

} // namespace mindos
