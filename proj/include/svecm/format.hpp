#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace svecm {

/// Shortest decimal text that parses back to exactly `v`; "NaN" for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

}  // namespace svecm
