#include "factgap/corpus.h"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/language.h"

namespace factgap {

namespace fs = std::filesystem;

std::string_view to_string(DocVariant variant) {
    return variant == DocVariant::Original ? "original" : "translated_to_english";
}

DocVariant parse_doc_variant(std::string_view text) {
    if (text == "original") return DocVariant::Original;
    if (text == "translated_to_english") return DocVariant::TranslatedToEnglish;
    throw ValidationError("unknown doc variant '" + std::string(text) + "'");
}

Corpus::Corpus(std::vector<Entity> entities, std::vector<KnowledgeDoc> docs)
    : entities_(std::move(entities)), docs_(std::move(docs)) {
    std::ranges::sort(entities_, {}, &Entity::id);
    for (std::size_t i = 0; i < entities_.size(); ++i) {
        if (entities_[i].id.empty()) {
            throw ValidationError("entity with empty id");
        }
        if (entities_[i].canonical_name.empty()) {
            throw ValidationError("entity '" + entities_[i].id + "' has an empty canonical_name");
        }
        if (i > 0 && entities_[i].id == entities_[i - 1].id) {
            throw ValidationError("duplicate entity id '" + entities_[i].id + "'");
        }
    }
    std::ranges::sort(docs_, {}, &KnowledgeDoc::key);
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& doc = docs_[i];
        lookup_language(doc.language);
        if (doc.text.empty()) {
            throw ValidationError("empty text for doc (" + doc.entity_id + ", " + doc.language + ")");
        }
        if (find_entity(doc.entity_id) == nullptr) {
            throw ValidationError("doc references unknown entity '" + doc.entity_id + "'");
        }
        if (i > 0 && doc.key() == docs_[i - 1].key()) {
            throw ValidationError("duplicate doc (" + doc.entity_id + ", " + doc.language + ", " +
                                  std::string(to_string(doc.variant)) + ")");
        }
    }
}

const Entity* Corpus::find_entity(std::string_view id) const {
    auto it = std::ranges::lower_bound(entities_, id, {}, [](const Entity& e) -> std::string_view {
        return e.id;
    });
    return it != entities_.end() && it->id == id ? &*it : nullptr;
}

const KnowledgeDoc* Corpus::find_doc(std::string_view entity_id, std::string_view language,
                                     DocVariant variant) const {
    DocKey key{std::string(entity_id), std::string(language), variant};
    auto it = std::ranges::lower_bound(docs_, key, {}, &KnowledgeDoc::key);
    return it != docs_.end() && it->key() == key ? &*it : nullptr;
}

std::vector<std::string> Corpus::languages() const {
    std::set<std::string> codes;
    for (const auto& doc : docs_) {
        if (doc.variant == DocVariant::Original) {
            codes.insert(doc.language);
        }
    }
    return {codes.begin(), codes.end()};
}

std::map<std::string, std::vector<std::string>> Corpus::texts_by_language() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& doc : docs_) {
        if (doc.variant == DocVariant::Original) {
            out[doc.language].push_back(doc.text);
        }
    }
    return out;
}

namespace {

json to_json(const Entity& e) { return {{"id", e.id}, {"canonical_name", e.canonical_name}}; }

json to_json(const KnowledgeDoc& d) {
    return {{"entity_id", d.entity_id},
            {"language", d.language},
            {"variant", to_string(d.variant)},
            {"text", d.text}};
}

std::string require_string(const json& record, const char* field, const fs::path& path,
                           std::size_t line) {
    auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw ValidationError(path.filename().string() + ":" + std::to_string(line) +
                              ": missing string field '" + field + "'");
    }
    return it->get<std::string>();
}

}  // namespace

std::string Corpus::digest() const {
    std::vector<json> records;
    for (const auto& e : entities_) records.push_back(to_json(e));
    for (const auto& d : docs_) records.push_back(to_json(d));
    return sha256_hex(to_jsonl(records));
}

Corpus load_corpus(const fs::path& entities_path, const fs::path& docs_path) {
    std::vector<Entity> entities;
    std::set<std::string> entity_ids;
    for_each_jsonl(entities_path, [&](const json& r, std::size_t line) {
        Entity e{require_string(r, "id", entities_path, line),
                 require_string(r, "canonical_name", entities_path, line)};
        auto where = entities_path.filename().string() + ":" + std::to_string(line) + ": ";
        if (e.id.empty() || e.canonical_name.empty()) {
            throw ValidationError(where + "empty id or canonical_name");
        }
        if (!entity_ids.insert(e.id).second) {
            throw ValidationError(where + "duplicate entity id '" + e.id + "'");
        }
        entities.push_back(std::move(e));
    });

    std::vector<KnowledgeDoc> docs;
    std::set<DocKey> doc_keys;
    for_each_jsonl(docs_path, [&](const json& r, std::size_t line) {
        auto where = docs_path.filename().string() + ":" + std::to_string(line) + ": ";
        KnowledgeDoc d;
        d.entity_id = require_string(r, "entity_id", docs_path, line);
        d.language = require_string(r, "language", docs_path, line);
        d.text = require_string(r, "text", docs_path, line);
        try {
            d.variant = r.contains("variant")
                            ? parse_doc_variant(require_string(r, "variant", docs_path, line))
                            : DocVariant::Original;
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
        if (!is_supported_language(d.language)) {
            throw ValidationError(where + "unknown language code '" + d.language + "'");
        }
        if (!entity_ids.contains(d.entity_id)) {
            throw ValidationError(where + "unknown entity_id '" + d.entity_id + "'");
        }
        if (d.text.empty()) {
            throw ValidationError(where + "empty text");
        }
        if (!doc_keys.insert(d.key()).second) {
            throw ValidationError(where + "duplicate doc key");
        }
        docs.push_back(std::move(d));
    });
    if (docs.empty()) {
        spdlog::warn("{} contains no knowledge docs", docs_path.string());
    }
    return Corpus(std::move(entities), std::move(docs));
}

Corpus load_corpus_dir(const fs::path& dir) {
    return load_corpus(dir / "entities.jsonl", dir / "docs.jsonl");
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
    std::vector<json> entities;
    for (const auto& e : corpus.entities()) entities.push_back(to_json(e));
    std::vector<json> docs;
    for (const auto& d : corpus.docs()) docs.push_back(to_json(d));
    write_file_atomic(dir / "entities.jsonl", to_jsonl(entities));
    write_file_atomic(dir / "docs.jsonl", to_jsonl(docs));
}

}  // namespace factgap
