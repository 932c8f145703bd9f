#pragma once

#include <string>
#include <string_view>

namespace factgap {

inline std::string_view trim_view(std::string_view s) {
    constexpr std::string_view kSpace = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(kSpace);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(kSpace);
    return s.substr(first, last - first + 1);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

}  // namespace factgap
