#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "deep/error.hpp"
#include "deep/kb.hpp"
#include "deep/util/jsonl.hpp"
#include "deep/util/text.hpp"

namespace deep {

enum class NormPolicy { Exact, CaseFold };

inline std::string norm_policy_name(NormPolicy p) {
  return p == NormPolicy::Exact ? "exact" : "casefold";
}

inline NormPolicy norm_policy_from_name(const std::string& name) {
  if (name == "exact") return NormPolicy::Exact;
  if (name == "casefold") return NormPolicy::CaseFold;
  throw Error("unknown normalization policy: " + name);
}

// A token span resolved to an entity. Token indices are half-open and local
// to one sentence.
struct LinkedSpan {
  size_t sentence_index = 0;
  size_t token_start = 0;
  size_t token_end = 0;
  std::string entity_id;
  std::string matched_surface;  // normalized form, tokens joined by one space

  friend bool operator==(const LinkedSpan&, const LinkedSpan&) = default;
};

// Deterministic gazetteer over one language's surface forms: a trie keyed by
// normalized word tokens. Immutable after build; matching is pure.
class Gazetteer {
 public:
  Gazetteer() : nodes_(1) {}

  const std::string& language() const { return lang_; }
  NormPolicy policy() const { return policy_; }
  size_t form_count() const { return forms_.size(); }

  std::string normalize(std::string_view token) const {
    return policy_ == NormPolicy::CaseFold ? casefold(token) : std::string(token);
  }

  // All accepted token sequences with their entity id sets (test oracle hook).
  std::map<std::vector<std::string>, std::set<std::string>> accepted_sequences() const {
    std::map<std::vector<std::string>, std::set<std::string>> out;
    std::vector<std::string> path;
    walk(0, path, out);
    return out;
  }

 private:
  struct Node {
    std::map<std::string, size_t> next;
    int form = -1;  // index into forms_ when a surface form ends here
  };
  struct Form {
    std::string surface;            // normalized, space-joined
    std::vector<std::string> ids;   // sorted ascending
  };

  void insert(const std::vector<std::string>& tokens, const std::string& id) {
    size_t node = 0;
    for (const auto& t : tokens) {
      auto it = nodes_[node].next.find(t);
      if (it == nodes_[node].next.end()) {
        nodes_.emplace_back();
        size_t fresh = nodes_.size() - 1;
        nodes_[node].next.emplace(t, fresh);
        node = fresh;
      } else {
        node = it->second;
      }
    }
    if (nodes_[node].form < 0) {
      nodes_[node].form = static_cast<int>(forms_.size());
      forms_.push_back(Form{join(tokens), {}});
    }
    auto& ids = forms_[static_cast<size_t>(nodes_[node].form)].ids;
    auto pos = std::lower_bound(ids.begin(), ids.end(), id);
    if (pos == ids.end() || *pos != id) ids.insert(pos, id);
  }

  void walk(size_t node, std::vector<std::string>& path,
            std::map<std::vector<std::string>, std::set<std::string>>& out) const {
    if (nodes_[node].form >= 0) {
      const auto& f = forms_[static_cast<size_t>(nodes_[node].form)];
      out[path] = std::set<std::string>(f.ids.begin(), f.ids.end());
    }
    for (const auto& [tok, child] : nodes_[node].next) {
      path.push_back(tok);
      walk(child, path, out);
      path.pop_back();
    }
  }

  std::string lang_;
  NormPolicy policy_ = NormPolicy::Exact;
  std::vector<Node> nodes_;
  std::vector<Form> forms_;

  friend Gazetteer build_gazetteer(const KBSnapshot&, const std::string&, NormPolicy);
  friend std::vector<LinkedSpan> link(const std::vector<std::string>&, const Gazetteer&);
};

inline Gazetteer build_gazetteer(const KBSnapshot& kb, const std::string& lang,
                                 NormPolicy policy = NormPolicy::Exact) {
  if (!kb.has_language(lang)) {
    throw Error("build_gazetteer: language " + lang + " not indexed in KB");
  }
  Gazetteer gaz;
  gaz.lang_ = lang;
  gaz.policy_ = policy;
  for (const auto& [form, ids] : kb.index.at(lang)) {
    std::vector<std::string> tokens = split_whitespace(gaz.normalize(form));
    if (tokens.empty()) continue;
    for (const auto& id : ids) gaz.insert(tokens, id);
  }
  return gaz;
}

// Leftmost-longest non-overlapping matching over one sentence. At each
// position the longest match wins and scanning resumes after it; a form
// shared by several entities resolves to the lexicographically smallest id.
inline std::vector<LinkedSpan> link(const std::vector<std::string>& sentence_tokens,
                                    const Gazetteer& gaz) {
  std::vector<std::string> norm;
  norm.reserve(sentence_tokens.size());
  for (const auto& t : sentence_tokens) norm.push_back(gaz.normalize(t));

  std::vector<LinkedSpan> out;
  size_t i = 0;
  while (i < norm.size()) {
    size_t node = 0;
    int best_form = -1;
    size_t best_end = i;
    for (size_t j = i; j < norm.size(); ++j) {
      auto it = gaz.nodes_[node].next.find(norm[j]);
      if (it == gaz.nodes_[node].next.end()) break;
      node = it->second;
      if (gaz.nodes_[node].form >= 0) {
        best_form = gaz.nodes_[node].form;
        best_end = j + 1;
      }
    }
    if (best_form >= 0) {
      const auto& form = gaz.forms_[static_cast<size_t>(best_form)];
      out.push_back(LinkedSpan{0, i, best_end, form.ids.front(), form.surface});
      i = best_end;
    } else {
      ++i;
    }
  }
  return out;
}

// Links every sentence of a segment, filling sentence_index.
inline std::vector<LinkedSpan> link_segment(const std::vector<std::vector<std::string>>& sentences,
                                            const Gazetteer& gaz) {
  std::vector<LinkedSpan> out;
  for (size_t s = 0; s < sentences.size(); ++s) {
    for (LinkedSpan span : link(sentences[s], gaz)) {
      span.sentence_index = s;
      out.push_back(std::move(span));
    }
  }
  return out;
}

// --- linked-corpus file: {"segment_id":..., "spans":[{"sent","start","end","id","surface"}]} ---

inline json spans_to_json(const std::vector<LinkedSpan>& spans) {
  json arr = json::array();
  for (const auto& s : spans) {
    arr.push_back(json{{"sent", s.sentence_index},
                       {"start", s.token_start},
                       {"end", s.token_end},
                       {"id", s.entity_id},
                       {"surface", s.matched_surface}});
  }
  return arr;
}

inline std::vector<LinkedSpan> spans_from_json(const json& arr) {
  std::vector<LinkedSpan> out;
  for (const auto& o : arr) {
    out.push_back(LinkedSpan{o.at("sent").get<size_t>(), o.at("start").get<size_t>(),
                             o.at("end").get<size_t>(), o.at("id").get<std::string>(),
                             o.value("surface", std::string{})});
  }
  return out;
}

struct LinkedCorpus {
  // segment (or document) id -> spans, in file order
  std::vector<std::pair<std::string, std::vector<LinkedSpan>>> items;
  std::map<std::string, size_t> by_id;

  void add(std::string id, std::vector<LinkedSpan> spans) {
    by_id.emplace(id, items.size());
    items.emplace_back(std::move(id), std::move(spans));
  }

  const std::vector<LinkedSpan>* find(const std::string& id) const {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &items[it->second].second;
  }
};

inline void save_links(const LinkedCorpus& corpus, const std::filesystem::path& path) {
  AtomicWriter out(path);
  for (const auto& [id, spans] : corpus.items) {
    out.write_line(json{{"segment_id", id}, {"spans", spans_to_json(spans)}});
  }
  out.commit();
}

inline LinkedCorpus load_links(const std::filesystem::path& path) {
  LinkedCorpus corpus;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    if (!obj.contains("segment_id") || !obj.contains("spans")) {
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected {\"segment_id\":..., \"spans\":[...]}");
    }
    corpus.add(obj["segment_id"].get<std::string>(), spans_from_json(obj["spans"]));
  });
  return corpus;
}

}  // namespace deep
