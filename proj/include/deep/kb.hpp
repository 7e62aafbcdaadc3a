#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deep/error.hpp"
#include "deep/util/jsonl.hpp"

namespace deep {

// One knowledge-base entity: an opaque id plus its surface forms per
// language. The first form of each language is the canonical one.
struct EntityRecord {
  std::string id;
  std::map<std::string, std::vector<std::string>> surfaces;
};

// Immutable after load; safe to share read-only across workers.
struct KBSnapshot {
  std::map<std::string, EntityRecord> records;
  // language -> surface form -> entity ids carrying that form
  std::map<std::string, std::map<std::string, std::set<std::string>>> index;

  bool has_language(const std::string& lang) const { return index.count(lang) > 0; }
  size_t size() const { return records.size(); }
};

namespace detail {

inline void index_record(KBSnapshot& kb, const EntityRecord& rec) {
  for (const auto& [lang, forms] : rec.surfaces) {
    auto& lang_index = kb.index[lang];
    for (const auto& form : forms) lang_index[form].insert(rec.id);
  }
}

// Dedup preserving order; empty forms are a data error.
inline std::vector<std::string> clean_forms(const std::vector<std::string>& forms,
                                            const std::string& context) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& f : forms) {
    if (f.empty()) throw Error(context + ": empty surface form");
    if (seen.insert(f).second) out.push_back(f);
  }
  return out;
}

}  // namespace detail

// Loads a JSONL snapshot, keeping only surfaces in the requested languages.
// Records left with no surfaces are dropped. Indices are built for every
// requested language, including ones no record mentions.
inline KBSnapshot load_kb(const std::filesystem::path& path,
                          const std::set<std::string>& languages) {
  if (languages.empty()) throw Error("load_kb: no languages requested");
  KBSnapshot kb;
  for (const auto& lang : languages) kb.index[lang];
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("surfaces") ||
        !obj["id"].is_string() || !obj["surfaces"].is_object()) {
      throw Error(where + ": expected {\"id\":..., \"surfaces\":{...}}");
    }
    EntityRecord rec;
    rec.id = obj["id"].get<std::string>();
    if (rec.id.empty()) throw Error(where + ": empty entity id");
    for (const auto& [lang, forms] : obj["surfaces"].items()) {
      if (languages.count(lang) == 0) continue;
      if (!forms.is_array()) throw Error(where + ": surfaces for " + lang + " must be an array");
      std::vector<std::string> raw;
      for (const auto& f : forms) {
        if (!f.is_string()) throw Error(where + ": non-string surface form");
        raw.push_back(f.get<std::string>());
      }
      auto cleaned = detail::clean_forms(raw, where);
      if (!cleaned.empty()) rec.surfaces[lang] = std::move(cleaned);
    }
    if (rec.surfaces.empty()) return;  // nothing in the requested languages
    if (kb.records.count(rec.id) > 0) throw Error(where + ": duplicate entity id " + rec.id);
    detail::index_record(kb, rec);
    kb.records.emplace(rec.id, std::move(rec));
  });
  return kb;
}

// T_e: all surface forms of an entity, keyed by language.
// Unknown ids yield an empty map.
inline std::map<std::string, std::vector<std::string>> surface(const std::string& entity_id,
                                                               const KBSnapshot& kb) {
  auto it = kb.records.find(entity_id);
  if (it == kb.records.end()) return {};
  return it->second.surfaces;
}

// Canonical translation of an entity into `lang`; absent when the entity has
// no surface in that language (callers skip replacement in that case).
inline std::optional<std::string> lookup(const std::string& entity_id, const KBSnapshot& kb,
                                         const std::string& lang) {
  auto it = kb.records.find(entity_id);
  if (it == kb.records.end()) return std::nullopt;
  auto lit = it->second.surfaces.find(lang);
  if (lit == it->second.surfaces.end() || lit->second.empty()) return std::nullopt;
  return lit->second.front();
}

// Canonical JSONL serialization: records sorted by id, object keys sorted.
// load_kb(save_kb(kb)) is the identity, byte for byte.
inline void save_kb(const KBSnapshot& kb, const std::filesystem::path& path) {
  AtomicWriter out(path);
  for (const auto& [id, rec] : kb.records) {
    json surfaces = json::object();
    for (const auto& [lang, forms] : rec.surfaces) surfaces[lang] = forms;
    out.write_line(json{{"id", id}, {"surfaces", surfaces}});
  }
  out.commit();
}

// Converter from Wikidata-dump-derived TSV (id<TAB>lang<TAB>form).
// Keeps the file's form order per (id, lang); languages filter optional.
inline KBSnapshot kb_from_tsv(const std::filesystem::path& path,
                              const std::set<std::string>& languages) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::map<std::string, EntityRecord> records;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(where + ": expected id<TAB>lang<TAB>form");
    std::string id = line.substr(0, t1);
    std::string lang = line.substr(t1 + 1, t2 - t1 - 1);
    std::string form = line.substr(t2 + 1);
    if (id.empty() || lang.empty()) throw Error(where + ": empty id or language");
    if (form.empty()) throw Error(where + ": empty surface form");
    if (!languages.empty() && languages.count(lang) == 0) continue;
    auto [it, inserted] = records.try_emplace(id);
    if (inserted) it->second.id = id;
    auto& forms = it->second.surfaces[lang];
    if (std::find(forms.begin(), forms.end(), form) == forms.end()) forms.push_back(form);
  }
  KBSnapshot kb;
  for (const auto& lang : languages) kb.index[lang];
  for (auto& [id, rec] : records) {
    if (rec.surfaces.empty()) continue;
    detail::index_record(kb, rec);
    kb.records.emplace(id, std::move(rec));
  }
  return kb;
}

// Transpose check used by tests and `deep build-kb --check`: rebuilds the
// inverted index from the records and compares key for key.
inline bool index_matches_records(const KBSnapshot& kb) {
  KBSnapshot rebuilt;
  for (const auto& [lang, _] : kb.index) rebuilt.index[lang];
  for (const auto& [id, rec] : kb.records) detail::index_record(rebuilt, rec);
  return rebuilt.index == kb.index;
}

}  // namespace deep
