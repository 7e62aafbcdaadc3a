#include "deep/noise.hpp"

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "deep/util/parallel.hpp"
#include "test_util.hpp"

using namespace deep;
using deep::testing::TempDir;
using deep::testing::write_file;

namespace {

Segment segment_of(const std::string& id, std::vector<std::vector<std::string>> sentences) {
  Segment seg;
  seg.id = id;
  seg.sentences = std::move(sentences);
  return seg;
}

Segment words_segment(const std::string& id, size_t n_sentences, size_t words_per_sentence) {
  std::vector<std::vector<std::string>> sentences(n_sentences);
  size_t k = 0;
  for (auto& s : sentences) {
    for (size_t w = 0; w < words_per_sentence; ++w) s.push_back("w" + std::to_string(k++));
  }
  return segment_of(id, std::move(sentences));
}

KBSnapshot fig1_kb() {
  TempDir dir;
  std::string data;
  data += json{{"id", "Q1"}, {"surfaces", json{{"en", {"Krasnodar"}}, {"ru", {"Краснодаре"}}}}}.dump() + "\n";
  data += json{{"id", "Q2"}, {"surfaces", json{{"en", {"Saratov"}}, {"ru", {"Саратове"}}}}}.dump() + "\n";
  data += json{{"id", "Q3"}, {"surfaces", json{{"en", {"Ulyanovsk"}}, {"ru", {"Ульяновске"}}}}}.dump() + "\n";
  data += json{{"id", "Q4"}, {"surfaces", json{{"ru", {"Барнауле"}}}}}.dump() + "\n";  // no en
  return load_kb(write_file(dir.file("kb.jsonl"), data), {"en", "ru"});
}

const std::vector<std::string> kFig1Tokens = {"Магазины", "нового",   "формата", "заработали",
                                              "в",        "Краснодаре", ",",     "Саратове",
                                              "и",        "Ульяновске", "."};

std::vector<LinkedSpan> fig1_spans() {
  return {LinkedSpan{0, 5, 6, "Q1", "Краснодаре"}, LinkedSpan{0, 7, 8, "Q2", "Саратове"},
          LinkedSpan{0, 9, 10, "Q3", "Ульяновске"}};
}

size_t count_token(const std::vector<std::string>& tokens, const std::string& t) {
  return static_cast<size_t>(std::count(tokens.begin(), tokens.end(), t));
}

}  // namespace

TEST_CASE("mask_spans with budget 0 changes nothing") {
  auto seg = words_segment("s", 2, 10);
  NoiseParams params;
  Rng rng(1);
  auto res = mask_spans(seg, 0, {}, params, rng);
  CHECK(res.sentences == seg.sentences);
  CHECK(res.masked_positions.empty());
  CHECK_FALSE(res.warning);
}

TEST_CASE("mask_spans hits the budget within the overshoot bound") {
  auto seg = words_segment("s", 1, 20);
  NoiseParams params;
  for (uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    auto res = mask_spans(seg, 7, {}, params, rng);
    REQUIRE_FALSE(res.warning);
    REQUIRE(res.masked_positions.size() >= 7);
    REQUIRE(res.masked_positions.size() <= 7 + res.max_span - 1);
    REQUIRE(static_cast<double>(res.masked_positions.size()) / 20.0 >= 0.35);
  }
}

TEST_CASE("mask_spans with everything protected returns unchanged plus a warning") {
  auto seg = words_segment("s", 1, 8);
  std::set<size_t> all;
  for (size_t i = 0; i < 8; ++i) all.insert(i);
  NoiseParams params;
  Rng rng(2);
  auto res = mask_spans(seg, 3, all, params, rng);
  CHECK(res.sentences == seg.sentences);
  CHECK(res.masked_positions.empty());
  CHECK(res.warning);
}

TEST_CASE("masked spans collapse to a single mask token each") {
  auto seg = words_segment("s", 1, 30);
  NoiseParams params;
  params.lambda = 3.5;
  Rng rng(7);
  auto res = mask_spans(seg, 10, {}, params, rng);
  size_t masks = count_token(res.sentences[0], kMaskToken);
  CHECK(masks == res.spans.size());
  CHECK(res.sentences[0].size() == 30 - res.masked_positions.size() + res.spans.size());
}

TEST_CASE("mask_spans never crosses a sentence boundary") {
  auto seg = words_segment("s", 4, 5);
  NoiseParams params;
  params.lambda = 8.0;  // long spans force clipping
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    auto res = mask_spans(seg, 10, {}, params, rng);
    for (const auto& span : res.spans) {
      CHECK(span.start / 5 == (span.start + span.len - 1) / 5);
    }
  }
}

TEST_CASE("permute_sentences is identity for one sentence or prob 0") {
  std::vector<std::vector<std::string>> one{{"a", "b"}};
  Rng rng(1);
  auto res = permute_sentences(one, 1.0, rng);
  CHECK(res.sentences == one);

  std::vector<std::vector<std::string>> four{{"a"}, {"b"}, {"c"}, {"d"}};
  Rng rng2(2);
  auto res2 = permute_sentences(four, 0.0, rng2);
  CHECK(res2.sentences == four);
  CHECK_FALSE(res2.permuted);
}

TEST_CASE("permute_sentences preserves the sentence multiset") {
  std::vector<std::vector<std::string>> sentences{{"a", "x"}, {"b"}, {"a", "x"}, {"c", "y", "z"}};
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto res = permute_sentences(sentences, 1.0, rng);
    auto sorted_in = sentences;
    auto sorted_out = res.sentences;
    std::sort(sorted_in.begin(), sorted_in.end());
    std::sort(sorted_out.begin(), sorted_out.end());
    CHECK(sorted_in == sorted_out);
  }
}

TEST_CASE("permutations of 4 sentences are uniform (chi-square, p > 0.01)") {
  std::vector<std::vector<std::string>> four{{"0"}, {"1"}, {"2"}, {"3"}};
  std::map<std::string, size_t> counts;
  constexpr size_t kRuns = 48000;
  for (uint64_t seed = 0; seed < kRuns; ++seed) {
    Rng rng(seed);
    auto res = permute_sentences(four, 1.0, rng);
    std::string key;
    for (const auto& s : res.sentences) key += s[0];
    ++counts[key];
  }
  REQUIRE(counts.size() == 24);
  const double expected = static_cast<double>(kRuns) / 24.0;
  double chi2 = 0.0;
  for (const auto& [perm, n] : counts) {
    const double d = static_cast<double>(n) - expected;
    chi2 += d * d / expected;
  }
  // Critical value of chi-square with 23 degrees of freedom at alpha = 0.01.
  CHECK(chi2 < 41.6384);
}

TEST_CASE("replace_entities swaps Fig.1-style mentions for English surfaces") {
  auto kb = fig1_kb();
  auto seg = segment_of("fig1", {kFig1Tokens});
  auto res = replace_entities(seg, fig1_spans(), kb, "en");
  REQUIRE(res.replaced.size() == 3);
  CHECK(res.skipped.empty());
  const std::vector<std::string> expected = {"Магазины", "нового", "формата", "заработали",
                                             "в",        "Krasnodar", ",",    "Saratov",
                                             "и",        "Ulyanovsk", "."};
  CHECK(res.sentences[0] == expected);
  CHECK(res.replaced[0].tgt_surface == "Краснодаре");
  CHECK(res.replaced[0].src_tokens == std::vector<std::string>{"Krasnodar"});
}

TEST_CASE("replace_entities with no spans is identity") {
  auto kb = fig1_kb();
  auto seg = segment_of("s", {kFig1Tokens});
  auto res = replace_entities(seg, {}, kb, "en");
  CHECK(res.sentences == seg.sentences);
  CHECK(res.replaced.empty());
}

TEST_CASE("entities without a source surface are skipped and reported") {
  auto kb = fig1_kb();
  auto seg = segment_of("s", {{"В", "Барнауле", "дождь"}});
  std::vector<LinkedSpan> spans{LinkedSpan{0, 1, 2, "Q4", "Барнауле"}};
  auto res = replace_entities(seg, spans, kb, "en");
  CHECK(res.sentences == seg.sentences);
  CHECK(res.replaced.empty());
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0].entity_id == "Q4");
}

TEST_CASE("a multi-token replacement splices in place") {
  TempDir dir;
  auto kb = load_kb(
      write_file(dir.file("kb.jsonl"),
                 json{{"id", "Q1"}, {"surfaces", json{{"en", {"New York"}}, {"xx", {"НьюЙорк"}}}}}
                         .dump() +
                     "\n"),
      {"en", "xx"});
  auto seg = segment_of("s", {{"в", "НьюЙорк", "поезд"}});
  auto res = replace_entities(seg, {LinkedSpan{0, 1, 2, "Q1", "НьюЙорк"}}, kb, "en");
  CHECK(res.sentences[0] == std::vector<std::string>{"в", "New", "York", "поезд"});
}

TEST_CASE("out-of-bounds spans violate the linker contract") {
  auto kb = fig1_kb();
  auto seg = segment_of("s", {{"a", "b"}});
  CHECK_THROWS_AS(replace_entities(seg, {LinkedSpan{0, 1, 5, "Q1", "x"}}, kb, "en"), Error);
  CHECK_THROWS_AS(replace_entities(seg, {LinkedSpan{3, 0, 1, "Q1", "x"}}, kb, "en"), Error);
}

TEST_CASE("f_deep on the Fig.1 segment code-switches and tops up with masks") {
  auto kb = fig1_kb();
  auto seg = segment_of("fig1", {kFig1Tokens});
  NoiseParams params;
  params.seed = 17;
  auto ex = f_deep(seg, fig1_spans(), kb, "en", params);

  auto src = ex.src_flat();
  CHECK(count_token(src, "Krasnodar") == 1);
  CHECK(count_token(src, "Saratov") == 1);
  CHECK(count_token(src, "Ulyanovsk") == 1);
  CHECK(count_token(src, kMaskToken) >= 1);
  // Replaced target-language surfaces never survive in the source.
  CHECK(count_token(src, "Краснодаре") == 0);
  CHECK(count_token(src, "Саратове") == 0);
  CHECK(count_token(src, "Ульяновске") == 0);
  // Target is the original Russian, untouched.
  CHECK(ex.tgt_sentences == seg.sentences);
  // 11 words, budget ceil(3.85) = 4, 3 replaced -> at least 1 masked.
  CHECK(ex.noised_word_count() >= 4);
}

TEST_CASE("f_deep adds no masks when replacements already cover the budget") {
  TempDir dir;
  auto kb = load_kb(write_file(dir.file("kb.jsonl"),
                               json{{"id", "Q1"},
                                    {"surfaces", json{{"en", {"A B C D"}}, {"xx", {"а б в г"}}}}}
                                       .dump() +
                                   "\n"),
                    {"en", "xx"});
  // 10 words, 4 of them one entity span: replaced 40% >= 35% budget.
  auto seg = segment_of("s", {{"w1", "w2", "w3", "а", "б", "в", "г", "w4", "w5", "w6"}});
  std::vector<LinkedSpan> spans{LinkedSpan{0, 3, 7, "Q1", "а б в г"}};
  NoiseParams params;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    params.seed = seed;
    auto ex = f_deep(seg, spans, kb, "en", params);
    CHECK(ex.masked_positions.empty());
    CHECK(ex.replaced.size() == 1);
  }
}

TEST_CASE("f_deep without entities degenerates to DAE-style noise") {
  auto kb = fig1_kb();
  auto seg = words_segment("s", 2, 10);
  NoiseParams params;
  params.seed = 5;
  auto ex = f_deep(seg, {}, kb, "en", params);
  CHECK(ex.task == Task::DEEP);
  CHECK(ex.replaced.empty());
  CHECK(ex.noised_word_count() >= noise_budget(params.mask_ratio, 20));
  CHECK(ex.tgt_sentences == seg.sentences);
}

TEST_CASE("f_deep never masks entity words, replaced or skipped") {
  auto kb = fig1_kb();
  // Two sentences; Q1 replaceable, Q4 has no en surface.
  auto seg = segment_of("s", {{"в", "Краснодаре", "шёл", "сильный", "дождь", "утром"},
                              {"в", "Барнауле", "шёл", "снег", "вечером", "тоже"}});
  std::vector<LinkedSpan> spans{LinkedSpan{0, 1, 2, "Q1", "Краснодаре"},
                                LinkedSpan{1, 1, 2, "Q4", "Барнауле"}};
  NoiseParams params;
  for (uint64_t seed = 0; seed < 500; ++seed) {
    params.seed = seed;
    auto ex = f_deep(seg, spans, kb, "en", params);
    REQUIRE(ex.skipped_spans == 1);
    for (size_t pos : ex.masked_positions) {
      CHECK(pos != 1);  // flat position of Краснодаре
      CHECK(pos != 7);  // flat position of Барнауле
    }
    auto src = ex.src_flat();
    CHECK(count_token(src, "Краснодаре") == 0);
    CHECK(count_token(src, "Барнауле") == 1);  // skipped span stays in place
  }
}

TEST_CASE("g_dae masks to budget and keeps the target intact") {
  auto seg = words_segment("s", 5, 20);
  NoiseParams params;
  for (uint64_t seed = 0; seed < 500; ++seed) {
    params.seed = seed;
    auto ex = g_dae(seg, params);
    REQUIRE_FALSE(ex.budget_warning);
    const size_t masked = ex.masked_positions.size();
    REQUIRE(masked >= 35);
    REQUIRE(masked <= 35 + ex.max_mask_span - 1);
    CHECK(ex.tgt_sentences == seg.sentences);
  }
}

TEST_CASE("forced single-word spans replay byte-identically from the seed") {
  auto seg = words_segment("s", 3, 12);
  NoiseParams params;
  params.lambda = 1e-9;  // Poisson mass at 0, clamped to length-1 spans
  params.permute_prob = 0.0;
  params.seed = 99;
  auto a = g_dae(seg, params);
  auto b = g_dae(seg, params);
  CHECK(pair_to_json(a).dump() == pair_to_json(b).dump());
  for (const auto& span : a.mask_spans_applied) CHECK(span.len == 1);
  CHECK(a.masked_positions.size() == noise_budget(params.mask_ratio, 36));
}

TEST_CASE("noised output is independent of evaluation order") {
  auto kb = fig1_kb();
  std::vector<Segment> segments;
  for (int i = 0; i < 24; ++i) segments.push_back(words_segment("seg" + std::to_string(i), 3, 15));
  NoiseParams params;
  params.seed = 1234;
  auto serial = parallel_map<std::string>(segments.size(), 1, [&](size_t i) {
    return pair_to_json(g_dae(segments[i], params)).dump();
  });
  auto parallel = parallel_map<std::string>(segments.size(), 8, [&](size_t i) {
    return pair_to_json(g_dae(segments[i], params)).dump();
  });
  CHECK(serial == parallel);
}

TEST_CASE("subword-counted budgets use per-word subword weights") {
  // Words of 3 subwords each under a single-character vocab.
  std::vector<std::string> entries = reserved_symbols();
  entries.push_back("a");
  auto vocab = SubwordVocab::from_entries(entries);
  Document d;
  d.id = "d0";
  d.sentences.push_back(std::vector<std::string>(10, "aaa"));
  auto segments = pack_segments({d}, vocab);
  REQUIRE(segments.size() == 1);

  NoiseParams params;
  params.count_subwords = true;
  params.seed = 3;
  auto ex = g_dae(segments[0], params);
  // Budget: ceil(0.35 * 30) = 11 subwords; each masked word contributes 3.
  CHECK(ex.masked_positions.size() * 3 >= 11);
  CHECK(ex.masked_positions.size() >= 4);

  // Without per-word counts the subword budget cannot be computed.
  auto bare = words_segment("s", 1, 10);
  CHECK_THROWS_AS(g_dae(bare, params), Error);
}

TEST_CASE("invalid noise parameters are rejected") {
  auto seg = words_segment("s", 1, 10);
  NoiseParams params;
  params.mask_ratio = 1.5;
  CHECK_THROWS_WITH(g_dae(seg, params), Catch::Matchers::ContainsSubstring("mask_ratio"));
  params.mask_ratio = 0.35;
  params.lambda = 0.0;
  CHECK_THROWS_AS(g_dae(seg, params), Error);
}

TEST_CASE("the paper's literal lambda = 0.35 is accepted and works") {
  auto seg = words_segment("s", 2, 50);
  NoiseParams params;
  params.lambda = 0.35;  // mostly length-1 spans after the max(1, .) clamp
  params.seed = 8;
  auto ex = g_dae(seg, params);
  CHECK_FALSE(ex.budget_warning);
  CHECK(ex.masked_positions.size() >= 35);
}

TEST_CASE("pairs round-trip through the pairs file") {
  TempDir dir;
  auto kb = fig1_kb();
  auto seg = segment_of("fig1", {kFig1Tokens});
  NoiseParams params;
  params.seed = 21;
  std::vector<NoisedExample> examples{f_deep(seg, fig1_spans(), kb, "en", params),
                                      g_dae(seg, params)};
  save_pairs(examples, dir.file("pairs.jsonl"));
  auto pairs = load_pairs(dir.file("pairs.jsonl"));
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].task == Task::DEEP);
  CHECK(pairs[0].src == examples[0].src_flat());
  CHECK(pairs[0].tgt == examples[0].tgt_flat());
  CHECK(pairs[0].replaced.size() == 3);
  CHECK(pairs[0].segment_id == "fig1");
  CHECK(pairs[1].task == Task::DAE);
  CHECK(pairs[1].replaced.empty());
  // Replacement coordinates in the file point at the right tokens.
  for (const auto& r : pairs[0].replaced) {
    std::string src_phrase = join(std::vector<std::string>(
        pairs[0].src.begin() + r.src_start, pairs[0].src.begin() + r.src_end));
    CHECK((src_phrase == "Krasnodar" || src_phrase == "Saratov" || src_phrase == "Ulyanovsk"));
  }
}
