#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace factgap {

struct Entity {
    std::string id;
    std::string canonical_name;  // fills prompt templates in every language

    bool operator==(const Entity&) const = default;
};

enum class DocVariant { Original, TranslatedToEnglish };

std::string_view to_string(DocVariant variant);
DocVariant parse_doc_variant(std::string_view text);

struct DocKey {
    std::string entity_id;
    std::string language;
    DocVariant variant = DocVariant::Original;

    auto operator<=>(const DocKey&) const = default;
};

/// Reference text for one (entity, language) that facts are judged against.
struct KnowledgeDoc {
    std::string entity_id;
    std::string language;
    DocVariant variant = DocVariant::Original;
    std::string text;

    DocKey key() const { return {entity_id, language, variant}; }
    bool operator==(const KnowledgeDoc&) const = default;
};

/// Validated, immutable set of entities and knowledge documents.
class Corpus {
public:
    Corpus() = default;

    /// Checks every invariant and throws ValidationError on the first
    /// violation: duplicate ids or doc keys, empty names or texts, unknown
    /// language codes, dangling entity references.
    Corpus(std::vector<Entity> entities, std::vector<KnowledgeDoc> docs);

    /// Sorted by id.
    const std::vector<Entity>& entities() const noexcept { return entities_; }
    /// Sorted by key.
    const std::vector<KnowledgeDoc>& docs() const noexcept { return docs_; }

    const Entity* find_entity(std::string_view id) const;
    const KnowledgeDoc* find_doc(std::string_view entity_id, std::string_view language,
                                 DocVariant variant = DocVariant::Original) const;

    /// Languages that have at least one Original doc, sorted by code.
    std::vector<std::string> languages() const;

    /// Original-variant texts grouped by language.
    std::map<std::string, std::vector<std::string>> texts_by_language() const;

    /// SHA-256 over the canonical serialization of the corpus.
    std::string digest() const;

    bool operator==(const Corpus&) const = default;

private:
    std::vector<Entity> entities_;
    std::vector<KnowledgeDoc> docs_;
};

/// Reads line-delimited entity and doc records. Errors name file and line.
Corpus load_corpus(const std::filesystem::path& entities_path,
                   const std::filesystem::path& docs_path);

/// Reads `entities.jsonl` and `docs.jsonl` from `dir`.
Corpus load_corpus_dir(const std::filesystem::path& dir);

/// Writes `entities.jsonl` and `docs.jsonl` into `dir` in sorted order.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace factgap
