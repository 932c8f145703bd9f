#pragma once

#include <array>
#include <string_view>

namespace factgap {

/// Resource tier derived from a language's share of Common Crawl.
enum class ResourceCategory { VeryHigh, High, Medium, Low };

std::string_view to_string(ResourceCategory category);

struct LanguageInfo {
    std::string_view code;  // ISO-639-1
    std::string_view name;  // English name, used in "in {name}" directives
    ResourceCategory category;
    // Informational only; nothing branches on these.
    double cc_ratio;
    int speakers_millions;
    int wiki_pages_thousands;
};

inline constexpr std::size_t kLanguageCount = 19;

/// The 19 supported languages, grouped by category, in reporting order.
const std::array<LanguageInfo, kLanguageCount>& language_table();

/// nullptr when `code` is not one of the supported languages.
const LanguageInfo* find_language(std::string_view code) noexcept;

/// Throws ValidationError for unknown codes.
const LanguageInfo& lookup_language(std::string_view code);

bool is_supported_language(std::string_view code) noexcept;

/// Scripts written without spaces between words (zh, ja, th).
bool is_unsegmented_language(std::string_view code) noexcept;

}  // namespace factgap
