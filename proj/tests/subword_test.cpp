#include "deep/subword.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace deep;
using deep::testing::TempDir;
using deep::testing::write_file;

namespace {

SubwordVocab vocab_of(std::vector<std::string> extra) {
  std::vector<std::string> entries = reserved_symbols();
  entries.insert(entries.end(), extra.begin(), extra.end());
  return SubwordVocab::from_entries(entries);
}

// Independent greedy longest-match oracle scanning the entry list directly.
std::vector<int> oracle_encode(const std::string& text, const std::vector<std::string>& entries) {
  std::vector<int> out;
  size_t i = 0;
  while (i < text.size()) {
    int best = -1;
    size_t best_len = 0;
    for (size_t e = 0; e < entries.size(); ++e) {
      const auto& s = entries[e];
      if (s.size() > best_len && text.compare(i, s.size(), s) == 0) {
        best = static_cast<int>(e);
        best_len = s.size();
      }
    }
    if (best >= 0) {
      out.push_back(best);
      i += best_len;
    } else {
      out.push_back(Reserved::kUnk);
      i += utf8_len(static_cast<unsigned char>(text[i]));
    }
  }
  return out;
}

std::vector<std::string> all_entries(const SubwordVocab& v) {
  std::vector<std::string> out;
  for (size_t i = 0; i < v.size(); ++i) out.push_back(v.str(static_cast<int>(i)));
  return out;
}

Document doc_of(const std::string& id, std::vector<size_t> sentence_word_counts) {
  Document d;
  d.id = id;
  for (size_t n : sentence_word_counts) {
    d.sentences.push_back(std::vector<std::string>(n, "a"));
  }
  return d;
}

}  // namespace

TEST_CASE("encode of the empty string is empty") {
  auto v = vocab_of({"a"});
  CHECK(v.encode("").empty());
}

TEST_CASE("greedy longest-match from the left: aab -> a, ab") {
  auto v = vocab_of({"ab", "a", "b"});
  auto ids = v.encode("aab");
  REQUIRE(ids.size() == 2);
  CHECK(v.str(ids[0]) == "a");
  CHECK(v.str(ids[1]) == "ab");
  CHECK(ids == oracle_encode("aab", all_entries(v)));
}

TEST_CASE("encode agrees with the oracle on random strings") {
  auto v = vocab_of({"ab", "abc", "a", "b", "c", "bc", "cc"});
  auto entries = all_entries(v);
  Rng rng(11);
  for (int round = 0; round < 200; ++round) {
    std::string text;
    size_t len = rng.below(24);
    for (size_t i = 0; i < len; ++i) text += static_cast<char>('a' + rng.below(3));
    auto got = v.encode(text);
    CHECK(got == oracle_encode(text, entries));
    CHECK(v.decode(got) == text);
  }
}

TEST_CASE("unknown characters map to UNK and advance one character") {
  auto v = vocab_of({"a"});
  auto ids = v.encode("aжa");
  REQUIRE(ids.size() == 3);
  CHECK(ids[0] == v.id_of("a").value());
  CHECK(ids[1] == Reserved::kUnk);
  CHECK(ids[2] == v.id_of("a").value());
}

TEST_CASE("reserved symbols encode to their own ids") {
  auto v = vocab_of({"a"});
  auto ids = v.encode("<mask>");
  REQUIRE(ids.size() == 1);
  CHECK(ids[0] == Reserved::kMask);
}

TEST_CASE("encode is prefix-stable across segmentation boundaries") {
  auto v = vocab_of({"ab", "a", "b", "c"});
  Rng rng(3);
  for (int round = 0; round < 100; ++round) {
    std::string text;
    size_t len = 2 + rng.below(16);
    for (size_t i = 0; i < len; ++i) text += static_cast<char>('a' + rng.below(3));
    auto full = v.encode(text);
    // Boundaries of the full segmentation; at each one the prefix encodes
    // to exactly the ids before it.
    size_t consumed = 0;
    std::vector<int> prefix_ids;
    for (int id : full) {
      consumed += v.str(id).size();
      prefix_ids.push_back(id);
      CHECK(v.encode(text.substr(0, consumed)) == prefix_ids);
    }
  }
}

TEST_CASE("vocab files reject bad headers and duplicates") {
  TempDir dir;
  CHECK_THROWS_AS(SubwordVocab::from_entries({"<unk>", "<mask>"}), Error);
  CHECK_THROWS_AS(
      SubwordVocab::from_entries({"<unk>", "<s>", "<mask>", "[MT]", "[DAE]", "[DEEP]"}), Error);
  CHECK_THROWS_AS(
      SubwordVocab::from_entries({"<unk>", "<mask>", "<s>", "[MT]", "[DAE]", "[DEEP]", "a", "a"}),
      Error);

  auto path = write_file(dir.file("vocab.txt"), "<unk>\n<mask>\n<s>\n[MT]\n[DAE]\n[DEEP]\nab\na\n");
  auto v = SubwordVocab::load(path);
  CHECK(v.size() == 8);
  v.save(dir.file("copy.txt"));
  CHECK(deep::testing::read_file(dir.file("copy.txt")) ==
        deep::testing::read_file(dir.file("vocab.txt")));
}

TEST_CASE("three 200-subword sentences pack as 400 + 200") {
  auto v = vocab_of({"a"});
  auto segments = pack_segments({doc_of("d0", {200, 200, 200})}, v);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].sentences.size() == 2);
  CHECK(segments[0].total_subwords == 400);
  CHECK(segments[1].sentences.size() == 1);
  CHECK(segments[1].total_subwords == 200);
  CHECK(segments[0].id == "d0:0");
  CHECK(segments[1].id == "d0:1");
  CHECK(segments[1].first_sentence == 2);
}

TEST_CASE("a single small sentence packs into one segment") {
  auto v = vocab_of({"a"});
  auto segments = pack_segments({doc_of("d0", {10})}, v);
  REQUIRE(segments.size() == 1);
  CHECK(segments[0].total_subwords == 10);
  CHECK_FALSE(segments[0].truncated);
}

TEST_CASE("an oversize sentence is cut at a word boundary and flagged") {
  auto v = vocab_of({"a"});
  // Words of 3 subwords each: 200 words = 600 subwords > 512; 170 words fit.
  Document d;
  d.id = "d0";
  d.sentences.push_back(std::vector<std::string>(200, "aaa"));
  auto segments = pack_segments({d}, v);
  REQUIRE(segments.size() == 1);
  CHECK(segments[0].truncated);
  CHECK(segments[0].sentences[0].size() == 170);
  CHECK(segments[0].total_subwords == 510);
}

TEST_CASE("every packed segment respects the budget and the corpus is preserved") {
  auto v = vocab_of({"a"});
  Rng rng(5);
  std::vector<Document> docs;
  for (int d = 0; d < 8; ++d) {
    std::vector<size_t> sentence_sizes;
    size_t n = 1 + rng.below(12);
    for (size_t s = 0; s < n; ++s) sentence_sizes.push_back(1 + rng.below(300));
    docs.push_back(doc_of("d" + std::to_string(d), sentence_sizes));
  }
  auto segments = pack_segments(docs, v);
  std::map<std::string, std::vector<std::vector<std::string>>> rebuilt;
  for (const auto& seg : segments) {
    CHECK(seg.total_subwords <= kDefaultMaxSubwords);
    CHECK(!seg.sentences.empty());
    CHECK_FALSE(seg.truncated);  // all sentences fit by construction
    auto& sink = rebuilt[seg.doc];
    sink.insert(sink.end(), seg.sentences.begin(), seg.sentences.end());
  }
  for (const auto& doc : docs) {
    CHECK(rebuilt[doc.id] == doc.sentences);
  }
}

TEST_CASE("documents never share a segment") {
  auto v = vocab_of({"a"});
  auto segments = pack_segments({doc_of("d0", {5}), doc_of("d1", {5})}, v);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].doc == "d0");
  CHECK(segments[1].doc == "d1");
}

TEST_CASE("segments round-trip through the segment file") {
  TempDir dir;
  auto v = vocab_of({"a"});
  auto segments = pack_segments({doc_of("d0", {10, 20}), doc_of("d1", {700})}, v);
  save_segments(segments, dir.file("segments.jsonl"));
  auto loaded = load_segments(dir.file("segments.jsonl"), &v);
  REQUIRE(loaded.size() == segments.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].id == segments[i].id);
    CHECK(loaded[i].sentences == segments[i].sentences);
    CHECK(loaded[i].total_subwords == segments[i].total_subwords);
    CHECK(loaded[i].truncated == segments[i].truncated);
    CHECK(loaded[i].word_subwords == segments[i].word_subwords);
  }
}
