#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "deep/error.hpp"
#include "deep/util/jsonl.hpp"
#include "deep/util/text.hpp"

namespace deep {

// Reserved symbol ids occupy a fixed header block at the top of every vocab
// file, in this exact order.
struct Reserved {
  static constexpr int kUnk = 0;
  static constexpr int kMask = 1;
  static constexpr int kBos = 2;
  static constexpr int kMt = 3;
  static constexpr int kDae = 4;
  static constexpr int kDeep = 5;
  static constexpr size_t kCount = 6;
};

inline const std::vector<std::string>& reserved_symbols() {
  static const std::vector<std::string> symbols = {"<unk>", "<mask>", "<s>",
                                                   "[MT]", "[DAE]", "[DEEP]"};
  return symbols;
}

constexpr const char* kMaskToken = "<mask>";

// Fixed subword vocabulary with greedy longest-match encoding. Immutable
// after load; encode/decode are pure.
class SubwordVocab {
 public:
  static SubwordVocab from_entries(const std::vector<std::string>& entries) {
    SubwordVocab v;
    const auto& reserved = reserved_symbols();
    if (entries.size() < reserved.size()) {
      throw Error("vocab: missing reserved symbol header");
    }
    for (size_t i = 0; i < reserved.size(); ++i) {
      if (entries[i] != reserved[i]) {
        throw Error("vocab: line " + std::to_string(i + 1) + " must be " + reserved[i] +
                    ", got " + entries[i]);
      }
    }
    for (size_t i = 0; i < entries.size(); ++i) {
      const std::string& s = entries[i];
      if (s.empty()) throw Error("vocab: empty subword at line " + std::to_string(i + 1));
      if (v.ids_.count(s) > 0) {
        throw Error("vocab: duplicate subword " + s + " at line " + std::to_string(i + 1));
      }
      v.ids_.emplace(s, static_cast<int>(i));
      v.entries_.push_back(s);
    }
    for (size_t i = 0; i < v.entries_.size(); ++i) v.trie_insert(v.entries_[i], static_cast<int>(i));
    return v;
  }

  static SubwordVocab load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw Error(path.string() + ": empty vocab line " +
                                    std::to_string(entries.size() + 1));
      entries.push_back(line);
    }
    return from_entries(entries);
  }

  void save(const std::filesystem::path& path) const {
    AtomicWriter out(path);
    for (const auto& s : entries_) out.write_line(s);
    out.commit();
  }

  size_t size() const { return entries_.size(); }
  const std::string& str(int id) const { return entries_.at(static_cast<size_t>(id)); }

  std::optional<int> id_of(const std::string& s) const {
    auto it = ids_.find(s);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  // Greedy longest-match from the left over bytes. Where no entry matches,
  // one whole UTF-8 character becomes UNK and scanning continues after it.
  std::vector<int> encode(std::string_view text) const {
    std::vector<int> out;
    size_t i = 0;
    while (i < text.size()) {
      int node = 0;
      int best_id = -1;
      size_t best_len = 0;
      for (size_t j = i; j < text.size(); ++j) {
        auto it = trie_[static_cast<size_t>(node)].next.find(text[j]);
        if (it == trie_[static_cast<size_t>(node)].next.end()) break;
        node = it->second;
        if (trie_[static_cast<size_t>(node)].id >= 0) {
          best_id = trie_[static_cast<size_t>(node)].id;
          best_len = j - i + 1;
        }
      }
      if (best_id >= 0) {
        out.push_back(best_id);
        i += best_len;
      } else {
        out.push_back(Reserved::kUnk);
        i += std::min(text.size() - i, utf8_len(static_cast<unsigned char>(text[i])));
      }
    }
    return out;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) out += str(id);
    return out;
  }

  // Subword count of one whitespace-delimited word.
  size_t count(std::string_view word) const { return encode(word).size(); }

 private:
  struct TrieNode {
    std::map<char, int> next;
    int id = -1;
  };

  void trie_insert(const std::string& s, int id) {
    int node = 0;
    for (char c : s) {
      auto it = trie_[static_cast<size_t>(node)].next.find(c);
      if (it == trie_[static_cast<size_t>(node)].next.end()) {
        trie_.push_back(TrieNode{});
        int fresh = static_cast<int>(trie_.size() - 1);
        trie_[static_cast<size_t>(node)].next.emplace(c, fresh);
        node = fresh;
      } else {
        node = it->second;
      }
    }
    trie_[static_cast<size_t>(node)].id = id;
  }

  std::vector<std::string> entries_;
  std::unordered_map<std::string, int> ids_;
  std::vector<TrieNode> trie_{TrieNode{}};
};

// A packed monolingual training unit: consecutive sentences of one document,
// at most `max_subwords` subwords in total.
struct Segment {
  std::string id;
  std::string doc;
  size_t first_sentence = 0;                       // index within the document
  std::vector<std::vector<std::string>> sentences; // word tokens
  std::vector<std::vector<size_t>> word_subwords;  // parallel to sentences
  size_t total_subwords = 0;
  bool truncated = false;

  size_t word_count() const {
    size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }
};

struct Document {
  std::string id;
  std::vector<std::vector<std::string>> sentences;
};

constexpr size_t kDefaultMaxSubwords = 512;

// Greedy packing: sentences are appended in order; a sentence that would
// overflow starts a new segment; a single oversize sentence is cut at a word
// boundary (overflow words dropped) and the segment flagged. Segments never
// straddle document boundaries.
inline std::vector<Segment> pack_segments(const std::vector<Document>& docs,
                                          const SubwordVocab& vocab,
                                          size_t max_subwords = kDefaultMaxSubwords) {
  std::vector<Segment> out;
  for (const auto& doc : docs) {
    Segment cur;
    size_t seg_index = 0;
    size_t sent_index = 0;
    auto open = [&](size_t first_sentence) {
      cur = Segment{};
      cur.doc = doc.id;
      cur.id = doc.id + ":" + std::to_string(seg_index);
      cur.first_sentence = first_sentence;
    };
    auto flush = [&](size_t next_first_sentence) {
      if (cur.sentences.empty()) return;
      out.push_back(std::move(cur));
      ++seg_index;
      open(next_first_sentence);
    };
    open(0);
    for (; sent_index < doc.sentences.size(); ++sent_index) {
      const auto& words = doc.sentences[sent_index];
      std::vector<size_t> counts;
      counts.reserve(words.size());
      size_t sent_subwords = 0;
      for (const auto& w : words) {
        counts.push_back(vocab.count(w));
        sent_subwords += counts.back();
      }
      if (cur.total_subwords + sent_subwords > max_subwords && !cur.sentences.empty()) {
        flush(sent_index);
      }
      if (sent_subwords > max_subwords) {
        // Oversize sentence: keep the word prefix that fits, flag the segment.
        std::vector<std::string> kept;
        std::vector<size_t> kept_counts;
        size_t used = 0;
        for (size_t w = 0; w < words.size(); ++w) {
          if (used + counts[w] > max_subwords) break;
          kept.push_back(words[w]);
          kept_counts.push_back(counts[w]);
          used += counts[w];
        }
        if (!kept.empty()) {
          cur.sentences.push_back(std::move(kept));
          cur.word_subwords.push_back(std::move(kept_counts));
          cur.total_subwords += used;
          cur.truncated = true;
          flush(sent_index + 1);
        }
        continue;
      }
      cur.sentences.push_back(words);
      cur.word_subwords.push_back(std::move(counts));
      cur.total_subwords += sent_subwords;
    }
    flush(sent_index);
  }
  return out;
}

// --- file formats ---

inline std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    if (!obj.contains("doc") || !obj.contains("sentences")) {
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected {\"doc\":..., \"sentences\":[[tok,...],...]}");
    }
    Document d;
    d.id = obj["doc"].get<std::string>();
    d.sentences = obj["sentences"].get<std::vector<std::vector<std::string>>>();
    docs.push_back(std::move(d));
  });
  return docs;
}

inline void save_documents(const std::vector<Document>& docs,
                           const std::filesystem::path& path) {
  AtomicWriter out(path);
  for (const auto& d : docs) {
    out.write_line(json{{"doc", d.id}, {"sentences", d.sentences}});
  }
  out.commit();
}

inline void save_segments(const std::vector<Segment>& segments,
                          const std::filesystem::path& path) {
  AtomicWriter out(path);
  for (const auto& s : segments) {
    json obj{{"segment_id", s.id},
             {"doc", s.doc},
             {"first_sentence", s.first_sentence},
             {"sentences", s.sentences},
             {"subwords", s.total_subwords}};
    if (s.truncated) obj["truncated"] = true;
    out.write_line(obj);
  }
  out.commit();
}

// Per-word subword counts are not stored in the file; pass a vocab to
// recompute them (stats and sampling need them, linking does not).
inline std::vector<Segment> load_segments(const std::filesystem::path& path,
                                          const SubwordVocab* vocab = nullptr) {
  std::vector<Segment> segments;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    if (!obj.contains("segment_id") || !obj.contains("sentences")) {
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected {\"segment_id\":..., \"sentences\":...}");
    }
    Segment s;
    s.id = obj["segment_id"].get<std::string>();
    s.doc = obj.value("doc", std::string{});
    s.first_sentence = obj.value("first_sentence", size_t{0});
    s.sentences = obj["sentences"].get<std::vector<std::vector<std::string>>>();
    s.total_subwords = obj.value("subwords", size_t{0});
    s.truncated = obj.value("truncated", false);
    if (vocab != nullptr) {
      size_t total = 0;
      for (const auto& sent : s.sentences) {
        std::vector<size_t> counts;
        counts.reserve(sent.size());
        for (const auto& w : sent) {
          counts.push_back(vocab->count(w));
          total += counts.back();
        }
        s.word_subwords.push_back(std::move(counts));
      }
      s.total_subwords = total;
    }
    segments.push_back(std::move(s));
  });
  return segments;
}

}  // namespace deep
