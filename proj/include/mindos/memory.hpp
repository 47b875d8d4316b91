#pragma once
// Long-term memory: five stores with chunking, a deterministic hashing
// embedder, exact cosine top-k search, user records and conversation logs.

#include "mindos/kernel.hpp"

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace mindos {

inline constexpr std::size_t kEmbeddingDim = 64;
using Embedding = std::array<double, kEmbeddingDim>;

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Lowercases, then splits on runs of non-alphanumeric characters.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing of FNV-1a token hashes into 64 dims, L2-normalized.
/// Returns the zero vector when there are no tokens (or they cancel exactly).
Embedding embed_text(std::string_view text);

double l2_norm(const Embedding& v) noexcept;
/// 0 when either side is the zero vector.
double cosine(const Embedding& a, const Embedding& b) noexcept;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Embedding embed(std::string_view text) const = 0;
};

class HashingEmbedder final : public Embedder {
public:
    Embedding embed(std::string_view text) const override { return embed_text(text); }
};

inline constexpr std::size_t kChunkWindow = 512;
inline constexpr std::size_t kChunkOverlap = 64;
inline constexpr std::size_t kChunkStride = kChunkWindow - kChunkOverlap;

std::vector<std::string> chunk_document(std::string_view text);

struct Chunk {
    std::string chunk_id;
    StoreKind store = StoreKind::domain_knowledge;
    std::string text;
    Embedding vector{};
    std::string source_doc;
    std::size_t ordinal = 0;

    bool operator==(const Chunk&) const = default;
};

json to_json(const Chunk& c);
Chunk chunk_from_json(const json& j, StoreKind store);

struct SearchHit {
    std::string chunk_id;
    double score = 0.0;
    std::string text;
    std::string source_doc;

    bool operator==(const SearchHit&) const = default;
};

struct Message {
    std::string role;
    std::string text;

    bool operator==(const Message&) const = default;
};

/// Relative file name -> JSON lines; the on-disk layout of one agent's memory.
using MemoryManifest = std::map<std::string, std::vector<json>>;

class MemoryIndex {
public:
    /// With a directory, existing files are loaded and every write is
    /// persisted there.
    explicit MemoryIndex(std::optional<std::filesystem::path> dir = std::nullopt, MemoryPolicy policy = {},
                         std::shared_ptr<const Embedder> embedder = std::make_shared<HashingEmbedder>());
    ~MemoryIndex();

    MemoryIndex(const MemoryIndex&) = delete;
    MemoryIndex& operator=(const MemoryIndex&) = delete;

    /// Throws DuplicateDoc. Returns the number of chunks appended.
    std::size_t ingest_document(StoreKind store, const std::string& doc_id, std::string_view text);
    bool has_document(StoreKind store, const std::string& doc_id) const;
    bool remove_document(StoreKind store, const std::string& doc_id);

    std::vector<SearchHit> search(StoreKind store, std::string_view query, std::size_t k) const;
    std::vector<Chunk> chunks(StoreKind store) const;
    std::size_t chunk_count(StoreKind store) const;

    /// user_structured key-value records, written behind. Throws PolicyDenied.
    void put_record(const std::string& key, std::string value);
    std::optional<std::string> get_record(const std::string& key) const;
    std::map<std::string, std::string> records() const;
    /// Returns once every accepted record is durable.
    void flush();

    /// Append-only per-session log. Throws PolicyDenied. Returns the
    /// cumulative message count.
    std::size_t archive_conversation(const std::string& session_id, const std::vector<Message>& messages);
    std::vector<Message> conversation(const std::string& session_id) const;
    /// Ingests the session log into user_structured as one document.
    std::size_t close_conversation(const std::string& session_id);

    MemoryPolicy policy() const;
    void set_policy(MemoryPolicy policy);

    MemoryManifest manifest() const;
    /// Replaces all contents; persists when a directory is attached.
    void load_manifest(const MemoryManifest& manifest);

private:
    struct Store {
        mutable std::shared_mutex mu;
        std::vector<Chunk> chunks;
    };

    Store& store(StoreKind kind) { return stores_[static_cast<std::size_t>(kind)]; }
    const Store& store(StoreKind kind) const { return stores_[static_cast<std::size_t>(kind)]; }
    std::filesystem::path store_file(StoreKind kind) const;
    void load_from_disk();
    void rewrite_store_file(StoreKind kind, const std::vector<Chunk>& chunks) const;
    void writer_loop(std::stop_token stop);

    std::optional<std::filesystem::path> dir_;
    std::shared_ptr<const Embedder> embedder_;
    std::array<Store, 5> stores_;

    mutable std::mutex policy_mu_;
    MemoryPolicy policy_;

    mutable std::mutex records_mu_;
    std::map<std::string, std::string> records_;

    std::mutex queue_mu_;
    std::condition_variable_any queue_cv_;
    std::condition_variable drained_cv_;
    std::deque<std::pair<std::string, std::string>> pending_;
    std::size_t in_flight_ = 0;

    mutable std::mutex convo_mu_;
    std::map<std::string, std::vector<Message>> conversations_;

    std::jthread writer_;
};

} // namespace mindos
