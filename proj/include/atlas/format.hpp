#pragma once

#include <string>

namespace atlas {

// Shortest decimal that parses back to the same float.
std::string f32_to_string(float value);

// The double nearest to f32_to_string(float(value)); JSON payloads use it so
// scores print as "0.3" rather than "0.30000001192092896".
double f32_display(double value);

float parse_f32(const std::string& text);

}  // namespace atlas
