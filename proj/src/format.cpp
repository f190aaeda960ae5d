#include "atlas/format.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "atlas/errors.hpp"

namespace atlas {

std::string f32_to_string(float value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

double f32_display(double value) {
    if (!std::isfinite(value)) {
        return value;
    }
    const std::string text = f32_to_string(static_cast<float>(value));
    double out = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

float parse_f32(const std::string& text) {
    float out = 0.0f;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
        throw Error(ErrorKind::BadArgument, "not a number: '" + text + "'");
    }
    return out;
}

}  // namespace atlas
