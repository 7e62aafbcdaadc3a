#include "deep/linker.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "deep/util/rng.hpp"
#include "test_util.hpp"

using namespace deep;
using deep::testing::TempDir;
using deep::testing::write_file;

namespace {

KBSnapshot kb_of(const std::vector<std::pair<std::string, std::vector<std::string>>>& entries,
                 const std::string& lang) {
  TempDir dir;
  std::string data;
  for (const auto& [id, forms] : entries) {
    json obj{{"id", id}, {"surfaces", json{{lang, forms}}}};
    data += obj.dump() + "\n";
  }
  return load_kb(write_file(dir.file("kb.jsonl"), data), {lang});
}

// Reference matcher built straight on the form set, no trie: at each
// position try every form, take the longest, tie-break on smallest id.
std::vector<LinkedSpan> oracle_link(
    const std::vector<std::string>& tokens,
    const std::map<std::vector<std::string>, std::set<std::string>>& forms) {
  std::vector<LinkedSpan> out;
  size_t i = 0;
  while (i < tokens.size()) {
    size_t best_len = 0;
    const std::set<std::string>* best_ids = nullptr;
    std::string best_surface;
    for (const auto& [form, ids] : forms) {
      if (form.size() <= best_len || i + form.size() > tokens.size()) continue;
      bool matches = true;
      for (size_t j = 0; j < form.size() && matches; ++j) matches = tokens[i + j] == form[j];
      if (matches) {
        best_len = form.size();
        best_ids = &ids;
        best_surface = join(form);
      }
    }
    if (best_len > 0) {
      out.push_back(LinkedSpan{0, i, i + best_len, *best_ids->begin(), best_surface});
      i += best_len;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("gazetteer matches a single-token Russian form") {
  auto kb = kb_of({{"Q1", {"Краснодаре"}}}, "ru");
  auto gaz = build_gazetteer(kb, "ru");
  auto spans = link({"в", "Краснодаре", ","}, gaz);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == LinkedSpan{0, 1, 2, "Q1", "Краснодаре"});
}

TEST_CASE("empty KB yields a gazetteer that matches nothing") {
  auto kb = kb_of({}, "ru");
  auto gaz = build_gazetteer(kb, "ru");
  CHECK(gaz.form_count() == 0);
  CHECK(link({"в", "Краснодаре"}, gaz).empty());
}

TEST_CASE("building for an unindexed language is an error") {
  auto kb = kb_of({{"Q1", {"x"}}}, "ru");
  CHECK_THROWS_AS(build_gazetteer(kb, "de"), Error);
}

TEST_CASE("tokens with no gazetteer hits link to nothing") {
  auto kb = kb_of({{"Q1", {"Краснодаре"}}}, "ru");
  auto gaz = build_gazetteer(kb, "ru");
  CHECK(link({"новые", "магазины"}, gaz).empty());
}

TEST_CASE("accepted sequences equal the normalized form set") {
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::set<std::vector<std::string>> expected;
  for (size_t i = 0; i < 500; ++i) {
    std::string form = "форма" + std::to_string(i);
    if (i % 3 == 0) form += " хвост" + std::to_string(i);  // multi-token every third
    entries.push_back({"Q" + std::to_string(i), {form}});
    expected.insert(split_whitespace(form));
  }
  auto kb = kb_of(entries, "ru");
  auto gaz = build_gazetteer(kb, "ru");
  std::set<std::vector<std::string>> accepted;
  for (const auto& [seq, ids] : gaz.accepted_sequences()) accepted.insert(seq);
  CHECK(accepted == expected);
}

TEST_CASE("leftmost-longest beats a later overlapping match") {
  auto kb = kb_of({{"Q1", {"a b"}}, {"Q2", {"b c"}}}, "xx");
  auto gaz = build_gazetteer(kb, "xx");
  std::vector<std::string> tokens{"a", "b", "c"};

  // All maximal non-overlapping matchings of {a b, b c} over "a b c":
  // {[0,2)} and {[1,3)}. Leftmost-longest selects the first.
  auto spans = link(tokens, gaz);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].token_start == 0);
  CHECK(spans[0].token_end == 2);
  CHECK(spans[0].entity_id == "Q1");

  auto expected = oracle_link(tokens, gaz.accepted_sequences());
  CHECK(spans == expected);
}

TEST_CASE("at one position the longest of several matches wins") {
  auto kb = kb_of({{"Q1", {"a"}}, {"Q2", {"a b c"}}, {"Q3", {"a b"}}}, "xx");
  auto gaz = build_gazetteer(kb, "xx");
  auto spans = link({"z", "a", "b", "c"}, gaz);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].token_end - spans[0].token_start == 3);
  CHECK(spans[0].entity_id == "Q2");
}

TEST_CASE("ambiguous form resolves to the smallest entity id") {
  auto kb = kb_of({{"Q9", {"Springfield"}}, {"Q10", {"Springfield"}}, {"Q2", {"Springfield"}}},
                  "en");
  auto gaz = build_gazetteer(kb, "en");
  auto spans = link({"in", "Springfield"}, gaz);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].entity_id == "Q10");  // lexicographic: "Q10" < "Q2" < "Q9"
}

TEST_CASE("random sentences: linker agrees with the brute-force oracle") {
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::vector<std::string> alphabet{"a", "b", "c", "d", "e"};
  // Dense pattern set over a tiny alphabet so overlaps are common.
  Rng pattern_rng(7);
  for (size_t i = 0; i < 40; ++i) {
    size_t len = 1 + pattern_rng.below(3);
    std::string form;
    for (size_t j = 0; j < len; ++j) {
      if (j > 0) form += " ";
      form += alphabet[pattern_rng.below(alphabet.size())];
    }
    entries.push_back({"Q" + std::to_string(i), {form}});
  }
  auto kb = kb_of(entries, "xx");
  auto gaz = build_gazetteer(kb, "xx");
  auto forms = gaz.accepted_sequences();

  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<std::string> tokens;
    size_t len = 3 + rng.below(20);
    for (size_t j = 0; j < len; ++j) tokens.push_back(alphabet[rng.below(alphabet.size())]);
    auto got = link(tokens, gaz);
    auto expected = oracle_link(tokens, forms);
    REQUIRE(got == expected);

    // Spans never overlap and each matched surface is the normalized join.
    for (size_t s = 0; s < got.size(); ++s) {
      if (s > 0) CHECK(got[s - 1].token_end <= got[s].token_start);
      CHECK(join(std::vector<std::string>(tokens.begin() + got[s].token_start,
                                          tokens.begin() + got[s].token_end)) ==
            got[s].matched_surface);
    }
  }
}

TEST_CASE("adding a form only ever grows or lengthens matches") {
  auto kb1 = kb_of({{"Q1", {"b"}}}, "xx");
  auto kb2 = kb_of({{"Q1", {"b"}}, {"Q2", {"a b c"}}}, "xx");
  std::vector<std::string> tokens{"a", "b", "c"};
  auto spans1 = link(tokens, build_gazetteer(kb1, "xx"));
  auto spans2 = link(tokens, build_gazetteer(kb2, "xx"));
  REQUIRE(spans1.size() == 1);
  REQUIRE(spans2.size() == 1);
  // The old span is gone only because a longer leftmost match covers it.
  CHECK(spans2[0].token_start <= spans1[0].token_start);
  CHECK(spans2[0].token_end >= spans1[0].token_end);
}

TEST_CASE("casefold policy folds Latin and Cyrillic") {
  auto kb = kb_of({{"Q1", {"Краснодаре"}}, {"Q2", {"Kyiv"}}}, "ru");
  auto gaz = build_gazetteer(kb, "ru", NormPolicy::CaseFold);
  auto spans = link({"КРАСНОДАРЕ", "kyiv"}, gaz);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].entity_id == "Q1");
  CHECK(spans[0].matched_surface == "краснодаре");
  CHECK(spans[1].entity_id == "Q2");
}

TEST_CASE("exact policy does not fold") {
  auto kb = kb_of({{"Q1", {"Краснодаре"}}}, "ru");
  auto gaz = build_gazetteer(kb, "ru", NormPolicy::Exact);
  CHECK(link({"КРАСНОДАРЕ"}, gaz).empty());
}

TEST_CASE("gazetteer under-recalls inflections absent from the KB") {
  // A pure gazetteer has no morphology: the nominative form does not match
  // an inflected mention unless the KB lists it as an alias.
  auto kb = kb_of({{"Q1", {"Краснодар"}}}, "ru");
  auto gaz = build_gazetteer(kb, "ru");
  CHECK(link({"в", "Краснодаре"}, gaz).empty());

  auto kb_alias = kb_of({{"Q1", {"Краснодар", "Краснодаре"}}}, "ru");
  auto spans = link({"в", "Краснодаре"}, build_gazetteer(kb_alias, "ru"));
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].entity_id == "Q1");
}

TEST_CASE("link_segment fills sentence indices") {
  auto kb = kb_of({{"Q1", {"x"}}}, "xx");
  auto gaz = build_gazetteer(kb, "xx");
  auto spans = link_segment({{"x", "y"}, {"y"}, {"y", "x"}}, gaz);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].sentence_index == 0);
  CHECK(spans[1].sentence_index == 2);
  CHECK(spans[1].token_start == 1);
}

TEST_CASE("links round-trip through the linked-corpus file") {
  TempDir dir;
  LinkedCorpus corpus;
  corpus.add("s0", {LinkedSpan{0, 1, 2, "Q1", "x"}, LinkedSpan{2, 0, 2, "Q7", "a b"}});
  corpus.add("s1", {});
  save_links(corpus, dir.file("links.jsonl"));
  auto loaded = load_links(dir.file("links.jsonl"));
  REQUIRE(loaded.items.size() == 2);
  CHECK(loaded.items[0].second == corpus.items[0].second);
  CHECK(loaded.find("s1")->empty());
}
