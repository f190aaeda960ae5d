#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "atlas/backend.hpp"
#include "atlas/store.hpp"

namespace atlas {

struct CorpusHandle {
    std::string name;
    std::filesystem::path store_path;
    std::shared_ptr<const EmbeddingStore> store;
    std::filesystem::path thumbnail_dir;
};

class CorpusRegistry {
public:
    explicit CorpusRegistry(std::filesystem::path thumbnail_root = {})
        : thumbnail_root_(std::move(thumbnail_root)) {}

    // Loads the store read-only. Throws DuplicateId for a name already taken.
    std::shared_ptr<const CorpusHandle> add(const std::string& name,
                                            const std::filesystem::path& store_path);
    // Throws UnknownCorpus.
    std::shared_ptr<const CorpusHandle> get(const std::string& name) const;
    std::vector<std::shared_ptr<const CorpusHandle>> list() const;
    std::size_t size() const;

private:
    std::filesystem::path thumbnail_root_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const CorpusHandle>> handles_;
};

// Fixed-capacity least-recently-used map of serialized payloads.
class LruCache {
public:
    explicit LruCache(std::size_t capacity = 128) : capacity_(capacity) {}

    std::optional<std::string> get(const std::string& key);
    void put(const std::string& key, std::string value);
    std::size_t size() const;
    std::size_t capacity() const noexcept { return capacity_; }

private:
    using Entry = std::pair<std::string, std::string>;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<Entry> order_;  // front = most recent
    std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

struct HttpRequest {
    std::string method;
    std::string path;  // percent-decoded
    std::multimap<std::string, std::string> params;
    std::string body;

    std::optional<std::string> param(const std::string& key) const;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t cache_capacity = 128;
    std::filesystem::path thumbnail_root;  // empty: "<store>.thumbs" per corpus
};

// HTTP surface over registered corpora. `handle` is the transport-free router
// used by the socket server and directly by tests.
class Service {
public:
    Service(EncoderBackend& backend, ServiceOptions options = {});
    ~Service();

    CorpusRegistry& corpora() noexcept { return registry_; }
    const LruCache& cache() const noexcept { return cache_; }

    HttpResponse handle(const HttpRequest& request);

    // Blocking. Returns false when the socket could not be bound.
    bool listen();
    // Binds an ephemeral port and serves on a background thread.
    int start_background();
    void stop();

private:
    HttpResponse route(const HttpRequest& request);
    HttpResponse cached_json(const std::string& key, const std::function<std::string()>& build);
    HttpResponse image(const CorpusHandle& corpus, const std::string& id, bool thumbnail);

    EncoderBackend& backend_;
    ServiceOptions options_;
    CorpusRegistry registry_;
    LruCache cache_;
    std::mutex thumb_mutex_;

    struct Server;
    std::unique_ptr<Server> server_;
};

}  // namespace atlas
