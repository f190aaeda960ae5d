#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "atlas/image.hpp"

namespace fs = std::filesystem;

namespace atlas::testing {

TempDir::TempDir() {
    std::random_device rd;
    std::uniform_int_distribution<std::uint64_t> dist;
    for (;;) {
        path_ = fs::temp_directory_path() / ("atlas-test-" + std::to_string(dist(rd)));
        if (fs::create_directory(path_)) {
            return;
        }
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::permissions(path_, fs::perms::owner_all, fs::perm_options::add, ec);
    fs::remove_all(path_, ec);
}

std::vector<float> random_unit_matrix(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<float> out(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(dim);
        double sq = 0.0;
        do {
            sq = 0.0;
            for (auto& x : v) {
                x = gauss(rng);
                sq += x * x;
            }
        } while (sq < 1e-6);
        const double norm = std::sqrt(sq);
        for (std::size_t j = 0; j < dim; ++j) {
            out[i * dim + j] = static_cast<float>(v[j] / norm);
        }
    }
    return out;
}

std::vector<float> random_unit_vector(std::size_t dim, std::uint64_t seed) {
    return random_unit_matrix(1, dim, seed);
}

std::string row_id(std::size_t i) {
    std::string s = std::to_string(i);
    return "r" + std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

EmbeddingStore make_store(std::vector<float> matrix, std::size_t dim,
                          std::vector<std::optional<GeoPoint>> geo, std::vector<std::string> ids) {
    const std::size_t n = matrix.size() / dim;
    std::vector<ImageRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
        records[i].id = ids.empty() ? row_id(i) : ids[i];
        records[i].uri = "mem://" + records[i].id;
        if (!geo.empty()) {
            records[i].geo = geo[i];
        }
    }
    return EmbeddingStore(dim, "test", std::move(matrix), std::move(records));
}

std::vector<float> TableEncoder::image_features(std::span<const std::uint8_t>) {
    throw std::runtime_error("table encoder has no image support");
}

std::vector<float> TableEncoder::text_features(std::string_view text) {
    auto it = table_.find(std::string(text));
    if (it == table_.end()) {
        throw std::runtime_error("no entry for '" + std::string(text) + "'");
    }
    return it->second;
}

fs::path write_solid_corpus(const fs::path& dir, const std::vector<SolidImage>& images) {
    fs::create_directories(dir / "img");
    std::ostringstream manifest;
    manifest << "id,uri,lat,lon,colour\n";
    for (const auto& im : images) {
        const Rgb c = named_colours().at(im.colour);
        const auto png = encode_solid_png(c.r, c.g, c.b);
        const std::string rel = "img/" + im.id + ".png";
        write_file(dir / rel, png);
        manifest << im.id << ',' << rel << ',';
        if (im.geo) {
            manifest.precision(17);
            manifest << im.geo->lat << ',' << im.geo->lon;
        } else {
            manifest << ',';
        }
        manifest << ',' << im.colour << '\n';
    }
    const auto path = dir / "manifest.csv";
    write_text(path, manifest.str());
    return path;
}

std::vector<std::uint8_t> random_ppm(int width, int height, std::uint64_t seed) {
    const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    std::mt19937_64 rng(seed);
    for (int i = 0; i < width * height * 3; ++i) {
        out.push_back(static_cast<std::uint8_t>(rng() & 0xff));
    }
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace atlas::testing
