#include "atlas/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "atlas/errors.hpp"

namespace atlas {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

cv::Mat decode_mat(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw Error(ErrorKind::DecodeError, "empty image data");
    }
    const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                         const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buffer, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw Error(ErrorKind::DecodeError, std::string("undecodable image: ") + e.what());
    }
    if (img.empty()) {
        throw Error(ErrorKind::DecodeError, "undecodable image");
    }
    return img;
}

}  // namespace

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) {
    cv::Mat bgr = decode_mat(bytes);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    if (!rgb.isContinuous()) {
        rgb = rgb.clone();
    }
    RgbImage out;
    out.width = rgb.cols;
    out.height = rgb.rows;
    out.pixels.assign(rgb.data, rgb.data + rgb.total() * rgb.elemSize());
    return out;
}

std::vector<std::uint8_t> make_thumbnail(std::span<const std::uint8_t> bytes, int max_edge) {
    cv::Mat img = decode_mat(bytes);
    const int long_edge = std::max(img.cols, img.rows);
    if (long_edge > max_edge) {
        const double scale = static_cast<double>(max_edge) / long_edge;
        cv::Mat small;
        cv::resize(img, small,
                   cv::Size(std::max(1, static_cast<int>(img.cols * scale + 0.5)),
                            std::max(1, static_cast<int>(img.rows * scale + 0.5))),
                   0, 0, cv::INTER_AREA);
        img = small;
    }
    std::vector<std::uint8_t> out;
    cv::imencode(".jpg", img, out, {cv::IMWRITE_JPEG_QUALITY, 85});
    return out;
}

std::vector<std::uint8_t> encode_solid_png(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                                           int width, int height) {
    const cv::Mat img(height, width, CV_8UC3, cv::Scalar(b, g, r));
    std::vector<std::uint8_t> out;
    cv::imencode(".png", img, out);
    return out;
}

bool has_image_extension(const std::filesystem::path& path) {
    static constexpr std::array<std::string_view, 10> kExtensions = {
        ".jpg", ".jpeg", ".png", ".bmp", ".ppm", ".pgm", ".tif", ".tiff", ".webp", ".pnm"};
    const std::string ext = lower_extension(path);
    return std::find(kExtensions.begin(), kExtensions.end(), ext) != kExtensions.end();
}

std::string content_type_for(const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    if (ext == ".bmp") return "image/bmp";
    if (ext == ".webp") return "image/webp";
    if (ext == ".tif" || ext == ".tiff") return "image/tiff";
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return "image/x-portable-anymap";
    return "application/octet-stream";
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
}

std::string hex_digest(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace atlas
