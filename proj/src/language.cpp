#include "factgap/language.h"

#include <string>

#include "factgap/errors.h"

namespace factgap {

namespace {

using enum ResourceCategory;

constexpr std::array<LanguageInfo, kLanguageCount> kLanguages{{
    {"en", "English", VeryHigh, 46.45, 1456, 6832},
    {"ja", "Japanese", High, 5.09, 123, 1419},
    {"zh", "Chinese", High, 4.17, 1138, 1423},
    {"es", "Spanish", High, 4.55, 559, 1957},
    {"fr", "French", High, 4.64, 310, 2616},
    {"pl", "Polish", High, 1.76, 41, 1620},
    {"vi", "Vietnamese", Medium, 0.99, 86, 1294},
    {"tr", "Turkish", Medium, 0.99, 90, 608},
    {"fa", "Persian", Medium, 0.67, 79, 1004},
    {"ko", "Korean", Medium, 0.65, 82, 672},
    {"ar", "Arabic", Medium, 0.59, 274, 1235},
    {"hu", "Hungarian", Medium, 0.56, 17, 543},
    {"th", "Thai", Medium, 0.41, 61, 165},
    {"hi", "Hindi", Medium, 0.18, 610, 162},
    {"bn", "Bengali", Low, 0.10, 273, 154},
    {"ms", "Malay", Low, 0.07, 290, 377},
    {"ta", "Tamil", Low, 0.04, 87, 166},
    {"sw", "Swahili", Low, 0.008, 72, 80},
    {"jv", "Javanese", Low, 0.002, 68, 73},
}};

}  // namespace

std::string_view to_string(ResourceCategory category) {
    switch (category) {
        case VeryHigh: return "very_high";
        case High: return "high";
        case Medium: return "medium";
        case Low: return "low";
    }
    return "unknown";
}

const std::array<LanguageInfo, kLanguageCount>& language_table() { return kLanguages; }

const LanguageInfo* find_language(std::string_view code) noexcept {
    for (const auto& info : kLanguages) {
        if (info.code == code) {
            return &info;
        }
    }
    return nullptr;
}

const LanguageInfo& lookup_language(std::string_view code) {
    if (const auto* info = find_language(code)) {
        return *info;
    }
    throw ValidationError("unknown language code '" + std::string(code) + "'");
}

bool is_supported_language(std::string_view code) noexcept {
    return find_language(code) != nullptr;
}

bool is_unsegmented_language(std::string_view code) noexcept {
    return code == "zh" || code == "ja" || code == "th";
}

}  // namespace factgap
