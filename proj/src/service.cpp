#include "atlas/service.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "atlas/api.hpp"
#include "atlas/errors.hpp"
#include "atlas/image.hpp"
#include "atlas/ingest.hpp"

namespace fs = std::filesystem;

namespace atlas {

// --- registry ----------------------------------------------------------------

std::shared_ptr<const CorpusHandle> CorpusRegistry::add(const std::string& name,
                                                        const fs::path& store_path) {
    if (name.empty() || name.find('/') != std::string::npos) {
        throw Error(ErrorKind::BadArgument, "corpus name must be non-empty and contain no '/'");
    }
    {
        std::shared_lock lock(mutex_);
        if (handles_.count(name)) {
            throw Error(ErrorKind::DuplicateId, "corpus '" + name + "' is already registered");
        }
    }
    auto handle = std::make_shared<CorpusHandle>();
    handle->name = name;
    handle->store_path = store_path;
    handle->store = std::make_shared<const EmbeddingStore>(load_store(store_path));
    handle->thumbnail_dir = thumbnail_root_.empty() ? fs::path(store_path.string() + ".thumbs")
                                                    : thumbnail_root_ / name;
    std::unique_lock lock(mutex_);
    if (!handles_.emplace(name, handle).second) {
        throw Error(ErrorKind::DuplicateId, "corpus '" + name + "' is already registered");
    }
    return handle;
}

std::shared_ptr<const CorpusHandle> CorpusRegistry::get(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto it = handles_.find(name);
    if (it == handles_.end()) {
        throw Error(ErrorKind::UnknownCorpus, "no corpus named '" + name + "'");
    }
    return it->second;
}

std::vector<std::shared_ptr<const CorpusHandle>> CorpusRegistry::list() const {
    std::shared_lock lock(mutex_);
    std::vector<std::shared_ptr<const CorpusHandle>> out;
    for (const auto& [name, h] : handles_) {
        out.push_back(h);
    }
    return out;
}

std::size_t CorpusRegistry::size() const {
    std::shared_lock lock(mutex_);
    return handles_.size();
}

// --- cache -------------------------------------------------------------------

std::optional<std::string> LruCache::get(const std::string& key) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) {
        return std::nullopt;
    }
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
}

void LruCache::put(const std::string& key, std::string value) {
    if (capacity_ == 0) {
        return;
    }
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(key); it != index_.end()) {
        it->second->second = std::move(value);
        order_.splice(order_.begin(), order_, it->second);
        return;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    if (order_.size() > capacity_) {
        index_.erase(order_.back().first);
        order_.pop_back();
    }
}

std::size_t LruCache::size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
}

// --- request helpers ---------------------------------------------------------

std::optional<std::string> HttpRequest::param(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::UnknownCorpus:
        case ErrorKind::UnknownImage:
            return 404;
        case ErrorKind::BadArgument:
        case ErrorKind::BadBBox:
        case ErrorKind::BadInterval:
        case ErrorKind::ConfigError:
        case ErrorKind::CorruptStore:
        case ErrorKind::IoError:
            return 400;
        case ErrorKind::DuplicateId:
            return 409;
        case ErrorKind::DegenerateScores:
        case ErrorKind::EmptyRegion:
        case ErrorKind::EmptyCorpus:
        case ErrorKind::InsufficientClasses:
        case ErrorKind::DimMismatch:
            return 422;
        case ErrorKind::BackendError:
            return 502;
        default:
            return 500;
    }
}

HttpResponse json_response(int status, const nlohmann::json& body) {
    return {status, "application/json", api::payload_text(body)};
}

HttpResponse error_response(int status, std::string_view name, std::string_view message) {
    return json_response(status, api::error_body(name, message));
}

std::size_t size_param(const HttpRequest& req, const std::string& key, std::size_t fallback,
                       std::size_t minimum) {
    const auto v = req.param(key);
    if (!v) {
        return fallback;
    }
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw Error(ErrorKind::BadArgument, key + " must be an integer");
    }
    if (out < static_cast<long long>(minimum)) {
        throw Error(ErrorKind::BadArgument, key + " must be at least " + std::to_string(minimum));
    }
    return static_cast<std::size_t>(out);
}

std::string required(const HttpRequest& req, const std::string& key) {
    auto v = req.param(key);
    if (!v || v->empty()) {
        throw Error(ErrorKind::BadArgument, "missing query parameter '" + key + "'");
    }
    return *v;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t start = 1;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string::npos) {
            end = path.size();
        }
        out.push_back(path.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::string cache_key(const std::string& corpus, const std::string& op, const HttpRequest& req) {
    std::string key = corpus + '\x1f' + op;
    for (const auto& [k, v] : req.params) {  // multimap: sorted by key
        key += '\x1f' + k + '=' + v;
    }
    return key;
}

nlohmann::json corpus_json(const CorpusHandle& h) {
    std::size_t geo = 0;
    for (const auto& r : h.store->records()) {
        geo += r.geo ? 1 : 0;
    }
    return {{"name", h.name},
            {"store_path", h.store_path.string()},
            {"count", h.store->size()},
            {"dimensionality", h.store->dimensionality()},
            {"backend", h.store->backend_name()},
            {"geo_count", geo}};
}

}  // namespace

// --- service -----------------------------------------------------------------

struct Service::Server {
    httplib::Server http;
    std::thread thread;
};

Service::Service(EncoderBackend& backend, ServiceOptions options)
    : backend_(backend),
      options_(std::move(options)),
      registry_(options_.thumbnail_root),
      cache_(options_.cache_capacity) {}

Service::~Service() { stop(); }

HttpResponse Service::handle(const HttpRequest& request) {
    try {
        return route(request);
    } catch (const Error& e) {
        return error_response(status_for(e.kind()), e.name(), e.what());
    } catch (const std::exception& e) {
        return error_response(500, "InternalError", e.what());
    }
}

HttpResponse Service::cached_json(const std::string& key, const std::function<std::string()>& build) {
    if (auto hit = cache_.get(key)) {
        return {200, "application/json", std::move(*hit)};
    }
    std::string body = build();
    cache_.put(key, body);
    return {200, "application/json", std::move(body)};
}

HttpResponse Service::image(const CorpusHandle& corpus, const std::string& id, bool thumbnail) {
    const auto row = corpus.store->find(id);
    if (!row) {
        throw Error(ErrorKind::UnknownImage, "no image '" + id + "' in corpus '" + corpus.name + "'");
    }
    const auto& record = corpus.store->record(*row);
    if (!thumbnail) {
        const auto bytes = load_record_bytes(record);
        return {200, content_type_for(record.uri), std::string(bytes.begin(), bytes.end())};
    }
    const fs::path cached = corpus.thumbnail_dir / (hex_digest(std::span(
                                                        reinterpret_cast<const std::uint8_t*>(id.data()), id.size())) +
                                                    ".jpg");
    std::lock_guard lock(thumb_mutex_);
    if (!fs::exists(cached)) {
        const auto thumb = make_thumbnail(load_record_bytes(record), 256);
        const fs::path tmp = cached.string() + ".tmp";
        write_file(tmp, thumb);
        fs::rename(tmp, cached);
    }
    const auto bytes = read_file(cached);
    return {200, "image/jpeg", std::string(bytes.begin(), bytes.end())};
}

HttpResponse Service::route(const HttpRequest& req) {
    const auto parts = split_path(req.path);
    if (req.method == "GET" && req.path == "/healthz") {
        return json_response(200, {{"status", "ok"}, {"corpora", registry_.size()}});
    }
    if (parts.empty() || parts[0] != "corpora") {
        return error_response(404, "NotFound", "no route for " + req.path);
    }
    if (parts.size() == 1 || (parts.size() == 2 && parts[1].empty())) {
        if (req.method == "GET") {
            nlohmann::json list = nlohmann::json::array();
            for (const auto& h : registry_.list()) {
                list.push_back(corpus_json(*h));
            }
            return json_response(200, {{"corpora", std::move(list)}});
        }
        if (req.method == "POST") {
            const auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (!body.is_object() || !body.contains("name") || !body["name"].is_string() ||
                !body.contains("store_path") || !body["store_path"].is_string()) {
                throw Error(ErrorKind::BadArgument, "body must be {\"name\": ..., \"store_path\": ...}");
            }
            const auto h = registry_.add(body["name"].get<std::string>(),
                                         body["store_path"].get<std::string>());
            return json_response(201, corpus_json(*h));
        }
        return error_response(405, "MethodNotAllowed", req.method + " " + req.path);
    }
    if (req.method != "GET") {
        return error_response(405, "MethodNotAllowed", req.method + " " + req.path);
    }
    const auto corpus = registry_.get(parts[1]);
    const EmbeddingStore& store = *corpus->store;
    if (parts.size() < 3) {
        return json_response(200, corpus_json(*corpus));
    }
    const std::string& op = parts[2];
    if (op == "images" && parts.size() >= 4) {
        const std::string prefix = "/corpora/" + parts[1] + "/images/";
        std::string id = req.path.substr(prefix.size());
        constexpr std::string_view kThumb = "/thumb";
        const bool thumb = id.size() > kThumb.size() && id.ends_with(kThumb) && !store.find(id) &&
                           store.find(id.substr(0, id.size() - kThumb.size()));
        if (thumb) {
            id.resize(id.size() - kThumb.size());
        }
        return image(*corpus, id, thumb);
    }
    if (parts.size() != 3) {
        return error_response(404, "NotFound", "no route for " + req.path);
    }
    const auto key = cache_key(corpus->name, op, req);
    if (op == "search") {
        api::SearchQuery q;
        q.prompt = required(req, "q");
        q.k = size_param(req, "k", 10, 1);
        q.templ = req.param("template").value_or(q.templ);
        return cached_json(key, [&] { return api::payload_text(api::search(store, backend_, q)); });
    }
    if (op == "scatter") {
        api::ScatterQuery q;
        q.x = required(req, "x");
        q.y = required(req, "y");
        q.templ = req.param("template").value_or(q.templ);
        const auto norm = parse_normalization(req.param("norm").value_or("none"));
        q.norm_x = req.param("norm_x") ? parse_normalization(*req.param("norm_x")) : norm;
        q.norm_y = req.param("norm_y") ? parse_normalization(*req.param("norm_y")) : norm;
        if (req.param("sample")) {
            q.sample = size_param(req, "sample", 0, 1);
        }
        q.seed = size_param(req, "seed", 0, 0);
        return cached_json(key, [&] { return api::payload_text(api::scatter(store, backend_, q)); });
    }
    if (op == "map" || op == "contrast") {
        std::optional<GeoBBox> bbox;
        if (auto b = req.param("bbox")) {
            bbox = GeoBBox::parse(*b);
        }
        const auto rows = size_param(req, "rows", 64, 1);
        const auto cols = size_param(req, "cols", 64, 1);
        const auto stat = parse_stat(req.param("stat").value_or("mean"));
        const auto min_count = size_param(req, "min_count", 3, 1);
        const auto templ = req.param("template").value_or(std::string(kDefaultTemplate));
        HttpResponse res;
        if (op == "map") {
            api::MapQuery q{required(req, "prompt"), templ, bbox, rows, cols, stat, min_count};
            res = cached_json(key, [&] { return api::payload_text(api::map(store, backend_, q)); });
        } else {
            api::ContrastQuery q{required(req, "a"), required(req, "b"), templ, bbox, rows, cols, stat, min_count};
            res = cached_json(key, [&] { return api::payload_text(api::contrast(store, backend_, q)); });
        }
        res.content_type = "application/geo+json";
        return res;
    }
    if (op == "extremes") {
        api::ExtremesQuery q;
        q.prompt = required(req, "prompt");
        q.n = size_param(req, "n", 5, 1);
        q.templ = req.param("template").value_or(q.templ);
        return cached_json(key, [&] { return api::payload_text(api::extremes(store, backend_, q)); });
    }
    return error_response(404, "NotFound", "no route for " + req.path);
}

namespace {

void install(httplib::Server& http, Service& service) {
    auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
        HttpRequest r{req.method, req.path, {req.params.begin(), req.params.end()}, req.body};
        const auto out = service.handle(r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    http.Get(".*", bridge);
    http.Post(".*", bridge);
}

}  // namespace

bool Service::listen() {
    server_ = std::make_unique<Server>();
    install(server_->http, *this);
    return server_->http.listen(options_.host, options_.port);
}

int Service::start_background() {
    server_ = std::make_unique<Server>();
    install(server_->http, *this);
    const int port = server_->http.bind_to_any_port(options_.host);
    if (port < 0) {
        throw Error(ErrorKind::IoError, "cannot bind " + options_.host);
    }
    server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
    server_->http.wait_until_ready();
    return port;
}

void Service::stop() {
    if (!server_) {
        return;
    }
    server_->http.stop();
    if (server_->thread.joinable()) {
        server_->thread.join();
    }
    server_.reset();
}

}  // namespace atlas
