#pragma once

#include <charconv>
#include <cstddef>
#include <string>
#include <vector>

namespace nef {

// Locale-free formatting with 17 significant digits: every double
// round-trips and the decimal separator is always '.', so output files are
// byte-stable golden-test material.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string csv_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
    return out;
}

}  // namespace nef
