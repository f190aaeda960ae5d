#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace atlas {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // interleaved R, G, B
};

// Decodes any format OpenCV understands. Throws DecodeError.
RgbImage decode_rgb(std::span<const std::uint8_t> bytes);

// JPEG re-encode scaled so the long edge is at most `max_edge` (never upscaled).
std::vector<std::uint8_t> make_thumbnail(std::span<const std::uint8_t> bytes, int max_edge = 256);

// Encodes a solid colour image; used by fixtures and demos.
std::vector<std::uint8_t> encode_solid_png(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                                           int width = 8, int height = 8);

bool has_image_extension(const std::filesystem::path& path);
std::string content_type_for(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Lowercase hex of a 64-bit FNV-1a digest.
std::string hex_digest(std::span<const std::uint8_t> bytes);

}  // namespace atlas
