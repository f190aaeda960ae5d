#include "atlas/cli.hpp"

#include <algorithm>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "atlas/api.hpp"
#include "atlas/concept_map.hpp"
#include "atlas/config.hpp"
#include "atlas/errors.hpp"
#include "atlas/image.hpp"
#include "atlas/ingest.hpp"
#include "atlas/scatter.hpp"
#include "atlas/service.hpp"
#include "atlas/store.hpp"
#include "atlas/street.hpp"

namespace fs = std::filesystem;

namespace atlas {

namespace {

const std::vector<std::string> kConfigKeys = {
    "backend",        "seed",           "workers",         "batch_size",
    "template",       "host",           "port",            "thumbnail_dir",
    "cache_capacity", "map.rows",       "map.cols",        "map.stat",
    "map.min_count",  "street.endpoint", "street.api_key_env", "street.width",
    "street.height",  "street.attempts", "street.backoff_ms", "street.in_flight"};

struct Globals {
    std::string config_path;
    std::optional<std::string> backend;
    std::optional<std::uint64_t> seed;
};

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        return;
    }
    write_file(out_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

template <typename T>
T pick(const std::optional<T>& flag, T fallback) {
    return flag ? *flag : fallback;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Concept retrieval, heat maps and two-axis scatters over image corpora", "atlas"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Globals g;
    app.add_option("--config", g.config_path, "TOML-style config file");
    app.add_option("--backend", g.backend, "Encoder backend: toy or http://host:port/path");
    app.add_option("--seed", g.seed, "Seed for every random choice");

    // ingest / embed
    std::string ingest_manifest, ingest_dir, ingest_out;
    std::optional<std::size_t> ingest_batch, ingest_workers;
    CLI::App* ingest = app.add_subcommand("ingest", "Scan a corpus and embed it into a store file");
    ingest->alias("embed");
    auto* src_manifest = ingest->add_option("--manifest", ingest_manifest, "CSV or JSONL manifest");
    auto* src_dir = ingest->add_option("--dir", ingest_dir, "Directory of images");
    src_manifest->excludes(src_dir);
    ingest->add_option("--out", ingest_out, "Store file to write")->required();
    ingest->add_option("--batch-size", ingest_batch, "Records per work unit");
    ingest->add_option("--workers", ingest_workers, "Embedding threads");

    // search
    std::string search_store, search_out;
    api::SearchQuery search_q;
    std::optional<std::string> search_template;
    CLI::App* search = app.add_subcommand("search", "Rank images against a free-text prompt");
    search->add_option("--store", search_store)->required();
    search->add_option("--prompt", search_q.prompt)->required();
    search->add_option("--template", search_template, "Prompt template with one {} placeholder");
    search->add_option("-k,--k", search_q.k, "Number of hits")->check(CLI::PositiveNumber);
    search->add_option("--out", search_out, "Write the JSON payload here instead of stdout");

    // map
    std::string map_store, map_out, map_matrix, map_bbox, map_contrast;
    std::string map_prompt;
    std::optional<std::string> map_template, map_stat;
    std::optional<std::size_t> map_rows, map_cols, map_min_count;
    CLI::App* map = app.add_subcommand("map", "Aggregate prompt scores of geo-tagged images on a grid");
    map->add_option("--store", map_store)->required();
    map->add_option("--prompt", map_prompt)->required();
    map->add_option("--contrast", map_contrast, "Second prompt: map z(prompt) - z(contrast)");
    map->add_option("--template", map_template);
    map->add_option("--bbox", map_bbox, "lat_min,lon_min,lat_max,lon_max (default: record extent)");
    map->add_option("--rows", map_rows)->check(CLI::PositiveNumber);
    map->add_option("--cols", map_cols)->check(CLI::PositiveNumber);
    map->add_option("--stat", map_stat)->check(CLI::IsMember({"mean", "max"}));
    map->add_option("--min-count", map_min_count)->check(CLI::PositiveNumber);
    map->add_option("--out", map_out, "GeoJSON output (default stdout)");
    map->add_option("--matrix", map_matrix, "Also write the plain JSON matrix dump here");

    // scatter
    std::string scatter_store, scatter_out, scatter_format;
    api::ScatterQuery scatter_q;
    std::string scatter_norm = "none";
    std::optional<std::string> scatter_norm_x, scatter_norm_y;
    std::optional<std::size_t> scatter_sample;
    CLI::App* scatter = app.add_subcommand("scatter", "Place images on two prompt axes");
    scatter->add_option("--store", scatter_store)->required();
    scatter->add_option("--x", scatter_q.x)->required();
    scatter->add_option("--y", scatter_q.y)->required();
    scatter->add_option("--template", scatter_q.templ, "Prompt template (default verbatim {})");
    const auto norms = CLI::IsMember({"none", "rank", "zscore"});
    scatter->add_option("--norm", scatter_norm, "Normalization for both axes")->check(norms);
    scatter->add_option("--x-norm", scatter_norm_x)->check(norms);
    scatter->add_option("--y-norm", scatter_norm_y)->check(norms);
    scatter->add_option("--sample", scatter_sample, "Seeded uniform subsample size")->check(CLI::PositiveNumber);
    scatter->add_option("--out", scatter_out, "CSV or JSONL export (default: JSON payload on stdout)");
    scatter->add_option("--format", scatter_format)->check(CLI::IsMember({"csv", "jsonl"}));

    // extremes
    std::string ext_store, ext_out, ext_prompt, ext_x, ext_y;
    std::optional<std::string> ext_template;
    std::size_t ext_n = 5;
    CLI::App* extremes = app.add_subcommand("extremes", "Most and least prompt-like images, or residual extremes of a scatter");
    extremes->add_option("--store", ext_store)->required();
    auto* ext_prompt_opt = extremes->add_option("--prompt", ext_prompt);
    auto* ext_x_opt = extremes->add_option("--x", ext_x);
    auto* ext_y_opt = extremes->add_option("--y", ext_y);
    ext_x_opt->needs(ext_y_opt);
    ext_y_opt->needs(ext_x_opt);
    ext_prompt_opt->excludes(ext_x_opt);
    extremes->add_option("--template", ext_template);
    extremes->add_option("-n,--n", ext_n)->check(CLI::PositiveNumber);
    extremes->add_option("--out", ext_out);

    // serve
    std::vector<std::string> serve_corpora;
    std::optional<std::string> serve_host, serve_thumbs;
    std::optional<int> serve_port;
    CLI::App* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--corpus", serve_corpora, "name=store_path (repeatable)");
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port);
    serve->add_option("--thumbnails", serve_thumbs, "Thumbnail cache root");

    // fetch
    std::string fetch_bbox, fetch_out_dir;
    double fetch_interval = 0.0;
    std::optional<std::string> fetch_endpoint, fetch_key_env;
    CLI::App* fetch = app.add_subcommand("fetch", "Sample a lattice and download street-level imagery");
    fetch->add_option("--bbox", fetch_bbox, "lat_min,lon_min,lat_max,lon_max")->required();
    fetch->add_option("--interval", fetch_interval, "Lattice spacing in degrees")->required();
    fetch->add_option("--out-dir", fetch_out_dir)->required();
    fetch->add_option("--endpoint", fetch_endpoint);
    fetch->add_option("--api-key-env", fetch_key_env);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        Config cfg;
        if (!g.config_path.empty()) {
            cfg = Config::load(g.config_path);
        }
        cfg.apply_env(kConfigKeys);
        const std::string backend_spec = pick(g.backend, cfg.get_string("backend", "toy"));
        const std::uint64_t seed = pick(g.seed, static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
        const std::string default_template = cfg.get_string("template", std::string(kDefaultTemplate));
        auto backend = [&] { return make_backend(backend_spec); };

        if (ingest->parsed()) {
            if (ingest_manifest.empty() && ingest_dir.empty()) {
                throw Error(ErrorKind::BadArgument, "ingest needs --manifest or --dir");
            }
            const auto records = scan_corpus(ingest_manifest.empty() ? ingest_dir : ingest_manifest);
            EmbedOptions opts;
            opts.batch_size = pick(ingest_batch, static_cast<std::size_t>(cfg.get_int("batch_size", 32)));
            opts.workers = pick(ingest_workers, static_cast<std::size_t>(cfg.get_int("workers", 1)));
            auto be = backend();
            const auto result = embed_corpus(records, *be, opts);
            save_store(result.store, ingest_out);
            nlohmann::json dropped = nlohmann::json::array();
            for (const auto& d : result.dropped) {
                err << "warning: dropped " << d.id << ": " << d.reason << "\n";
                dropped.push_back({{"id", d.id}, {"reason", d.reason}});
            }
            out << nlohmann::json{{"store", ingest_out},
                                  {"backend", result.store.backend_name()},
                                  {"dimensionality", result.store.dimensionality()},
                                  {"count", result.store.size()},
                                  {"dropped", std::move(dropped)}}
                       .dump()
                << "\n";
            return 0;
        }
        if (search->parsed()) {
            const auto store = load_store(search_store);
            auto be = backend();
            search_q.templ = pick(search_template, default_template);
            emit(api::payload_text(api::search(store, *be, search_q)), search_out, out);
            return 0;
        }
        if (map->parsed()) {
            const auto store = load_store(map_store);
            auto be = backend();
            std::optional<GeoBBox> bbox;
            if (!map_bbox.empty()) {
                bbox = GeoBBox::parse(map_bbox);
            }
            const auto rows = pick(map_rows, static_cast<std::size_t>(cfg.get_int("map.rows", 64)));
            const auto cols = pick(map_cols, static_cast<std::size_t>(cfg.get_int("map.cols", 64)));
            const auto stat = parse_stat(pick(map_stat, cfg.get_string("map.stat", "mean")));
            const auto min_count = pick(map_min_count, static_cast<std::size_t>(cfg.get_int("map.min_count", 3)));
            const auto templ = pick(map_template, default_template);
            nlohmann::json payload;
            if (map_contrast.empty()) {
                payload = api::map(store, *be, {map_prompt, templ, bbox, rows, cols, stat, min_count});
            } else {
                payload = api::contrast(store, *be, {map_prompt, map_contrast, templ, bbox, rows, cols, stat, min_count});
            }
            emit(api::payload_text(payload), map_out, out);
            if (!map_matrix.empty()) {
                // Rebuild the grid from the payload's own meta so both files agree.
                const auto& m = payload["meta"];
                GridSpec spec{{m["bbox"]["lat_min"], m["bbox"]["lat_max"], m["bbox"]["lon_min"], m["bbox"]["lon_max"]},
                              rows, cols, stat, min_count};
                const auto grid = map_contrast.empty()
                                      ? aggregate_map(store, Prompt{map_prompt, templ}, *be, spec)
                                      : contrast_map(store, Prompt{map_prompt, templ}, Prompt{map_contrast, templ}, *be, spec);
                emit(grid.to_matrix().dump() + "\n", map_matrix, out);
            }
            return 0;
        }
        if (scatter->parsed()) {
            const auto store = load_store(scatter_store);
            auto be = backend();
            scatter_q.norm_x = parse_normalization(pick(scatter_norm_x, scatter_norm));
            scatter_q.norm_y = parse_normalization(pick(scatter_norm_y, scatter_norm));
            scatter_q.sample = scatter_sample;
            scatter_q.seed = seed;
            if (scatter_out.empty()) {
                out << api::payload_text(api::scatter(store, *be, scatter_q));
                return 0;
            }
            const auto points = api::scatter_points(store, *be, scatter_q);
            const ExportFormat format = scatter_format.empty() ? format_for(scatter_out)
                                        : scatter_format == "jsonl" ? ExportFormat::Jsonl
                                                                    : ExportFormat::Csv;
            const ScatterMeta meta{{Prompt{scatter_q.x, scatter_q.templ}, scatter_q.norm_x},
                                   {Prompt{scatter_q.y, scatter_q.templ}, scatter_q.norm_y},
                                   be->name(), scatter_q.sample, seed};
            export_scatter(points, scatter_out, format, &meta);
            return 0;
        }
        if (extremes->parsed()) {
            const auto store = load_store(ext_store);
            auto be = backend();
            if (!ext_x.empty()) {
                api::ScatterQuery q;
                q.x = ext_x;
                q.y = ext_y;
                q.templ = pick(ext_template, std::string("{}"));
                emit(api::payload_text(api::residual_extremes(store, *be, q, ext_n)), ext_out, out);
            } else {
                if (ext_prompt.empty()) {
                    throw Error(ErrorKind::BadArgument, "extremes needs --prompt or --x/--y");
                }
                api::ExtremesQuery q{ext_prompt, pick(ext_template, default_template), ext_n};
                emit(api::payload_text(api::extremes(store, *be, q)), ext_out, out);
            }
            return 0;
        }
        if (serve->parsed()) {
            auto be = backend();
            ServiceOptions opts;
            opts.host = pick(serve_host, cfg.get_string("host", "127.0.0.1"));
            opts.port = pick(serve_port, static_cast<int>(cfg.get_int("port", 8080)));
            opts.cache_capacity = static_cast<std::size_t>(cfg.get_int("cache_capacity", 128));
            opts.thumbnail_root = pick(serve_thumbs, cfg.get_string("thumbnail_dir", ""));
            Service service(*be, opts);
            auto corpora = cfg.section("corpora.");
            for (const auto& spec : serve_corpora) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw Error(ErrorKind::BadArgument, "--corpus expects name=path, got '" + spec + "'");
                }
                corpora[spec.substr(0, eq)] = spec.substr(eq + 1);
            }
            if (corpora.empty()) {
                throw Error(ErrorKind::BadArgument, "serve needs at least one --corpus name=path");
            }
            for (const auto& [name, path] : corpora) {
                service.corpora().add(name, path);
            }
            err << "serving " << corpora.size() << " corpora on http://" << opts.host << ":" << opts.port << "\n";
            if (!service.listen()) {
                throw Error(ErrorKind::IoError, "cannot listen on " + opts.host + ":" + std::to_string(opts.port));
            }
            return 0;
        }
        if (fetch->parsed()) {
            const auto bbox = GeoBBox::parse(fetch_bbox);
            const auto points = sample_points(bbox, fetch_interval);
            StreetClientConfig sc;
            sc.endpoint = pick(fetch_endpoint, cfg.get_string("street.endpoint", ""));
            sc.api_key_env = pick(fetch_key_env, cfg.get_string("street.api_key_env", sc.api_key_env));
            sc.width = static_cast<int>(cfg.get_int("street.width", sc.width));
            sc.height = static_cast<int>(cfg.get_int("street.height", sc.height));
            if (sc.endpoint.empty()) {
                throw Error(ErrorKind::ConfigError, "fetch needs --endpoint or street.endpoint");
            }
            auto client = make_http_street_client(sc);
            FetchOptions fo;
            fo.out_dir = fetch_out_dir;
            fo.retry.attempts = static_cast<std::size_t>(cfg.get_int("street.attempts", 3));
            fo.retry.initial_backoff = std::chrono::milliseconds(cfg.get_int("street.backoff_ms", 1000));
            fo.in_flight = static_cast<std::size_t>(cfg.get_int("street.in_flight", 4));
            const auto result = fetch_panoramas(points, *client, fo);
            for (const auto& f : result.report.failures) {
                err << "warning: point " << f.index << ": " << f.message << "\n";
            }
            out << nlohmann::json{{"manifest", (fs::path(fetch_out_dir) / "manifest.csv").string()},
                                  {"requested", result.report.requested},
                                  {"records", result.records.size()},
                                  {"missing", result.report.missing},
                                  {"failed", result.report.failures.size()}}
                       .dump()
                << "\n";
            return 0;
        }
    } catch (const Error& e) {
        err << "error: " << e.name() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: InternalError: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace atlas
