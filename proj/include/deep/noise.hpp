#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deep/error.hpp"
#include "deep/kb.hpp"
#include "deep/linker.hpp"
#include "deep/subword.hpp"
#include "deep/util/jsonl.hpp"
#include "deep/util/rng.hpp"
#include "deep/util/text.hpp"

namespace deep {

enum class Task { MT, DAE, DEEP };

inline std::string task_name(Task t) {
  switch (t) {
    case Task::MT: return "MT";
    case Task::DAE: return "DAE";
    default: return "DEEP";
  }
}

inline Task task_from_name(const std::string& s) {
  if (s == "MT") return Task::MT;
  if (s == "DAE") return Task::DAE;
  if (s == "DEEP") return Task::DEEP;
  throw Error("unknown task: " + s);
}

inline const char* task_token(Task t) {
  switch (t) {
    case Task::MT: return "[MT]";
    case Task::DAE: return "[DAE]";
    default: return "[DEEP]";
  }
}

struct NoiseParams {
  double lambda = 3.5;       // Poisson mean for span length; see README for
                             // the 0.35-vs-3.5 reading, both are accepted
  double mask_ratio = 0.35;  // fraction of words to mask or replace
  double permute_prob = 1.0;
  uint64_t seed = 0;
  bool count_subwords = false;  // budget counted in subwords instead of words
  size_t attempt_factor = 100;  // attempt limit = factor x budget

  void validate() const {
    if (!(mask_ratio > 0.0 && mask_ratio <= 1.0)) throw Error("mask_ratio must be in (0,1]");
    if (!(lambda > 0.0)) throw Error("lambda must be > 0");
    if (permute_prob < 0.0 || permute_prob > 1.0) throw Error("permute_prob must be in [0,1]");
  }
};

// Budget = smallest integer >= ratio * total (epsilon guards the binary
// representation of ratios like 0.35), clamped to total.
inline size_t noise_budget(double ratio, size_t total) {
  if (total == 0) return 0;
  auto b = static_cast<size_t>(std::ceil(ratio * static_cast<double>(total) - 1e-9));
  return std::min(b, total);
}

// Flat word coordinates over a segment's sentences.
struct FlatIndex {
  std::vector<size_t> sentence_start;  // prefix sums, size = n_sentences + 1

  explicit FlatIndex(const std::vector<std::vector<std::string>>& sentences) {
    sentence_start.reserve(sentences.size() + 1);
    sentence_start.push_back(0);
    for (const auto& s : sentences) sentence_start.push_back(sentence_start.back() + s.size());
  }
  size_t total() const { return sentence_start.back(); }
  size_t sentence_of(size_t flat) const {
    size_t lo = 0, hi = sentence_start.size() - 1;
    while (lo + 1 < hi) {
      size_t mid = (lo + hi) / 2;
      if (sentence_start[mid] <= flat) lo = mid; else hi = mid;
    }
    return lo;
  }
  size_t flat(size_t sentence, size_t offset) const { return sentence_start[sentence] + offset; }
};

struct MaskSpan {
  size_t start = 0;  // flat original word position
  size_t len = 0;

  friend bool operator==(const MaskSpan&, const MaskSpan&) = default;
};

struct MaskSelection {
  std::vector<MaskSpan> spans;        // sorted by start
  std::vector<size_t> masked_positions;
  size_t achieved_weight = 0;
  size_t max_span = 0;
  bool warning = false;
};

namespace detail {

// Repeatedly samples span length L ~ max(1, Poisson(lambda)) and a uniform
// start, clips the span at its sentence end, and applies it unless it touches
// a protected or already-masked word. weights lets the budget count words
// (all ones) or subwords.
inline MaskSelection select_mask_spans(const FlatIndex& index,
                                       const std::vector<size_t>& weights, size_t budget,
                                       const std::vector<bool>& protected_positions,
                                       const NoiseParams& params, Rng& rng) {
  MaskSelection sel;
  const size_t total = index.total();
  if (budget == 0 || total == 0) {
    sel.warning = budget > 0;
    return sel;
  }
  std::vector<bool> blocked = protected_positions;
  size_t free_words = 0;
  for (size_t i = 0; i < total; ++i) free_words += blocked[i] ? 0 : 1;

  const size_t attempt_limit = params.attempt_factor * budget;
  size_t attempts = 0;
  while (sel.achieved_weight < budget && attempts < attempt_limit && free_words > 0) {
    ++attempts;
    const size_t len = std::max<uint64_t>(1, rng.poisson(params.lambda));
    const size_t start = rng.below(total);
    const size_t sent = index.sentence_of(start);
    const size_t end = std::min(start + len, index.sentence_start[sent + 1]);
    bool clear = end > start;
    for (size_t i = start; i < end && clear; ++i) clear = !blocked[i];
    if (!clear) continue;
    for (size_t i = start; i < end; ++i) {
      blocked[i] = true;
      sel.masked_positions.push_back(i);
      sel.achieved_weight += weights[i];
    }
    sel.spans.push_back(MaskSpan{start, end - start});
    sel.max_span = std::max(sel.max_span, end - start);
    free_words -= end - start;
  }
  sel.warning = sel.achieved_weight < budget;
  std::sort(sel.spans.begin(), sel.spans.end(),
            [](const MaskSpan& a, const MaskSpan& b) { return a.start < b.start; });
  std::sort(sel.masked_positions.begin(), sel.masked_positions.end());
  return sel;
}

inline std::vector<size_t> unit_weights(size_t n) { return std::vector<size_t>(n, 1); }

inline std::vector<size_t> subword_weights(const Segment& seg) {
  if (seg.word_subwords.size() != seg.sentences.size()) {
    throw Error("segment " + seg.id + " lacks per-word subword counts (load with a vocab)");
  }
  std::vector<size_t> w;
  for (const auto& counts : seg.word_subwords) w.insert(w.end(), counts.begin(), counts.end());
  return w;
}

}  // namespace detail

struct MaskResult {
  std::vector<std::vector<std::string>> sentences;  // each span collapsed to one <mask>
  std::vector<size_t> masked_positions;             // flat original coords
  std::vector<MaskSpan> spans;
  size_t max_span = 0;
  bool warning = false;
};

// DAE building block: span masking only, original sentence order.
inline MaskResult mask_spans(const Segment& segment, size_t budget_words,
                             const std::set<size_t>& protected_positions,
                             const NoiseParams& params, Rng& rng) {
  FlatIndex index(segment.sentences);
  std::vector<bool> blocked(index.total(), false);
  for (size_t p : protected_positions) {
    if (p >= index.total()) throw Error("protected position out of range");
    blocked[p] = true;
  }
  auto sel = detail::select_mask_spans(index, detail::unit_weights(index.total()), budget_words,
                                       blocked, params, rng);
  MaskResult res;
  res.masked_positions = sel.masked_positions;
  res.spans = sel.spans;
  res.max_span = sel.max_span;
  res.warning = sel.warning;
  res.sentences.resize(segment.sentences.size());
  size_t next_span = 0;
  for (size_t s = 0; s < segment.sentences.size(); ++s) {
    const auto& sent = segment.sentences[s];
    auto& out = res.sentences[s];
    size_t w = 0;
    while (w < sent.size()) {
      const size_t flat = index.flat(s, w);
      if (next_span < sel.spans.size() && sel.spans[next_span].start == flat) {
        out.emplace_back(kMaskToken);
        w += sel.spans[next_span].len;
        ++next_span;
      } else {
        out.push_back(sent[w]);
        ++w;
      }
    }
  }
  return res;
}

struct PermuteResult {
  std::vector<std::vector<std::string>> sentences;
  std::vector<size_t> order;  // order[k] = original index of output sentence k
  bool permuted = false;
};

// With probability permute_prob, reorders sentences by a uniform permutation.
inline PermuteResult permute_sentences(const std::vector<std::vector<std::string>>& sentences,
                                       double permute_prob, Rng& rng) {
  PermuteResult res;
  res.order.resize(sentences.size());
  for (size_t i = 0; i < sentences.size(); ++i) res.order[i] = i;
  if (permute_prob > 0.0 && rng.uniform() < permute_prob && sentences.size() > 1) {
    res.order = rng.permutation(sentences.size());
    res.permuted = true;
  }
  res.sentences.reserve(sentences.size());
  for (size_t i : res.order) res.sentences.push_back(sentences[i]);
  return res;
}

struct Replacement {
  std::string entity_id;
  size_t tgt_start = 0, tgt_end = 0;  // flat coords in the original segment
  size_t src_start = 0, src_end = 0;  // flat coords in the emitted source
  std::vector<std::string> src_tokens;
  std::string tgt_surface;  // original tokens, space-joined
};

struct ReplaceResult {
  std::vector<std::vector<std::string>> sentences;  // code-switched
  std::vector<Replacement> replaced;                // sorted by tgt_start
  std::vector<LinkedSpan> skipped;                  // no surface in src language
};

namespace detail {

inline void validate_spans(const Segment& seg, const std::vector<LinkedSpan>& spans) {
  for (const auto& s : spans) {
    if (s.sentence_index >= seg.sentences.size() || s.token_start >= s.token_end ||
        s.token_end > seg.sentences[s.sentence_index].size()) {
      throw Error("span out of bounds for segment " + seg.id + " (entity " + s.entity_id + ")");
    }
  }
}

}  // namespace detail

// Swaps every linked span that has a source-language surface for that surface
// (whitespace-tokenized). Spans without one are skipped and reported.
inline ReplaceResult replace_entities(const Segment& segment,
                                      const std::vector<LinkedSpan>& spans, const KBSnapshot& kb,
                                      const std::string& src_lang) {
  detail::validate_spans(segment, spans);
  FlatIndex index(segment.sentences);
  ReplaceResult res;
  res.sentences = segment.sentences;

  std::vector<const LinkedSpan*> ordered;
  ordered.reserve(spans.size());
  for (const auto& s : spans) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(), [&](const LinkedSpan* a, const LinkedSpan* b) {
    return index.flat(a->sentence_index, a->token_start) >
           index.flat(b->sentence_index, b->token_start);
  });

  // Right-to-left so earlier token indices stay valid while splicing.
  for (const LinkedSpan* span : ordered) {
    auto translation = lookup(span->entity_id, kb, src_lang);
    if (!translation.has_value()) {
      res.skipped.push_back(*span);
      continue;
    }
    std::vector<std::string> src_tokens = split_whitespace(*translation);
    auto& sent = res.sentences[span->sentence_index];
    const auto& orig = segment.sentences[span->sentence_index];
    Replacement rep;
    rep.entity_id = span->entity_id;
    rep.tgt_start = index.flat(span->sentence_index, span->token_start);
    rep.tgt_end = index.flat(span->sentence_index, span->token_end);
    rep.tgt_surface = join(orig.begin() + static_cast<ptrdiff_t>(span->token_start),
                           orig.begin() + static_cast<ptrdiff_t>(span->token_end));
    rep.src_tokens = src_tokens;
    sent.erase(sent.begin() + static_cast<ptrdiff_t>(span->token_start),
               sent.begin() + static_cast<ptrdiff_t>(span->token_end));
    sent.insert(sent.begin() + static_cast<ptrdiff_t>(span->token_start),
                src_tokens.begin(), src_tokens.end());
    res.replaced.push_back(std::move(rep));
  }
  std::sort(res.replaced.begin(), res.replaced.end(),
            [](const Replacement& a, const Replacement& b) { return a.tgt_start < b.tgt_start; });
  std::sort(res.skipped.begin(), res.skipped.end(),
            [](const LinkedSpan& a, const LinkedSpan& b) {
              return std::tie(a.sentence_index, a.token_start) <
                     std::tie(b.sentence_index, b.token_start);
            });
  return res;
}

// One training pair. target_tokens always equal the pre-noise segment; the
// task token is prepended later, by the sampler or `deep emit`.
struct NoisedExample {
  Task task = Task::DAE;
  std::string segment_id;
  std::vector<std::vector<std::string>> src_sentences;  // noised, permuted
  std::vector<std::vector<std::string>> tgt_sentences;  // original order
  std::vector<size_t> masked_positions;                 // flat tgt coords
  std::vector<MaskSpan> mask_spans_applied;
  std::vector<Replacement> replaced;  // src_start/src_end in final src coords
  size_t skipped_spans = 0;
  size_t max_mask_span = 0;
  bool budget_warning = false;

  std::vector<std::string> src_flat() const {
    std::vector<std::string> out;
    for (const auto& s : src_sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }
  std::vector<std::string> tgt_flat() const {
    std::vector<std::string> out;
    for (const auto& s : tgt_sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
  }
  // Words of the original segment that were masked or swapped out.
  size_t noised_word_count() const {
    size_t n = masked_positions.size();
    for (const auto& r : replaced) n += r.tgt_end - r.tgt_start;
    return n;
  }
};

namespace detail {

// Builds the noised source from the original sentences plus disjoint
// mask/replacement events, then permutes sentences, filling each
// replacement's position in the final flat source.
inline void materialize(const Segment& segment, const std::vector<MaskSpan>& mask,
                        std::vector<Replacement>& replacements, double permute_prob, Rng& rng,
                        NoisedExample& out) {
  FlatIndex index(segment.sentences);
  struct Event {
    size_t start, end;
    const Replacement* rep;  // nullptr for a mask span
  };
  std::vector<Event> events;
  events.reserve(mask.size() + replacements.size());
  for (const auto& m : mask) events.push_back({m.start, m.start + m.len, nullptr});
  for (const auto& r : replacements) events.push_back({r.tgt_start, r.tgt_end, &r});
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.start < b.start; });

  std::vector<std::vector<std::string>> noised(segment.sentences.size());
  struct SrcPos {
    const Replacement* rep;
    size_t sentence, start, end;  // within-sentence coords in noised output
  };
  std::vector<SrcPos> positions;
  size_t next_event = 0;
  for (size_t s = 0; s < segment.sentences.size(); ++s) {
    const auto& sent = segment.sentences[s];
    auto& out_sent = noised[s];
    size_t w = 0;
    while (w < sent.size()) {
      const size_t flat = index.flat(s, w);
      if (next_event < events.size() && events[next_event].start == flat) {
        const Event& ev = events[next_event++];
        if (ev.rep == nullptr) {
          out_sent.emplace_back(kMaskToken);
        } else {
          positions.push_back({ev.rep, s, out_sent.size(), out_sent.size() + ev.rep->src_tokens.size()});
          out_sent.insert(out_sent.end(), ev.rep->src_tokens.begin(), ev.rep->src_tokens.end());
        }
        w += ev.end - ev.start;
      } else {
        out_sent.push_back(sent[w]);
        ++w;
      }
    }
  }

  auto perm = permute_sentences(noised, permute_prob, rng);
  out.src_sentences = std::move(perm.sentences);

  // Flat offset of each original sentence in the permuted output.
  std::vector<size_t> base(noised.size(), 0);
  size_t offset = 0;
  for (size_t k = 0; k < perm.order.size(); ++k) {
    base[perm.order[k]] = offset;
    offset += out.src_sentences[k].size();
  }
  for (auto& r : replacements) {
    for (const auto& p : positions) {
      if (p.rep == &r) {
        r.src_start = base[p.sentence] + p.start;
        r.src_end = base[p.sentence] + p.end;
        break;
      }
    }
  }
  out.replaced = std::move(replacements);
  out.tgt_sentences = segment.sentences;
}

}  // namespace detail

inline Rng segment_rng(const NoiseParams& params, const std::string& segment_id) {
  return Rng(mix_seed(params.seed, segment_id));
}

// mBART-style noise g: span masking to the budget, then sentence permutation.
inline NoisedExample g_dae(const Segment& segment, const NoiseParams& params, Rng& rng) {
  params.validate();
  NoisedExample out;
  out.task = Task::DAE;
  out.segment_id = segment.id;
  FlatIndex index(segment.sentences);
  const std::vector<size_t> weights = params.count_subwords
                                          ? detail::subword_weights(segment)
                                          : detail::unit_weights(index.total());
  size_t total_weight = 0;
  for (size_t w : weights) total_weight += w;
  const size_t budget = noise_budget(params.mask_ratio, total_weight);
  auto sel = detail::select_mask_spans(index, weights, budget,
                                       std::vector<bool>(index.total(), false), params, rng);
  out.masked_positions = sel.masked_positions;
  out.mask_spans_applied = sel.spans;
  out.max_mask_span = sel.max_span;
  out.budget_warning = sel.warning;
  std::vector<Replacement> none;
  detail::materialize(segment, sel.spans, none, params.permute_prob, rng, out);
  return out;
}

inline NoisedExample g_dae(const Segment& segment, const NoiseParams& params) {
  Rng rng = segment_rng(params, segment.id);
  return g_dae(segment, params, rng);
}

// Entity noise f: swap linked spans for their source-language surfaces, top
// up with span masking on non-entity words until the budget is met, then
// permute sentences. Replaced words count toward the budget at their
// original word count.
inline NoisedExample f_deep(const Segment& segment, const std::vector<LinkedSpan>& spans,
                            const KBSnapshot& kb, const std::string& src_lang,
                            const NoiseParams& params, Rng& rng) {
  params.validate();
  NoisedExample out;
  out.task = Task::DEEP;
  out.segment_id = segment.id;

  ReplaceResult rep = replace_entities(segment, spans, kb, src_lang);
  out.skipped_spans = rep.skipped.size();

  FlatIndex index(segment.sentences);
  const std::vector<size_t> weights = params.count_subwords
                                          ? detail::subword_weights(segment)
                                          : detail::unit_weights(index.total());
  size_t total_weight = 0;
  for (size_t w : weights) total_weight += w;
  const size_t budget = noise_budget(params.mask_ratio, total_weight);

  // Entity positions (replaced or skipped) are never masked on top.
  std::vector<bool> protected_positions(index.total(), false);
  size_t replaced_weight = 0;
  for (const auto& r : rep.replaced) {
    for (size_t i = r.tgt_start; i < r.tgt_end; ++i) {
      protected_positions[i] = true;
      replaced_weight += weights[i];
    }
  }
  for (const auto& s : rep.skipped) {
    for (size_t t = s.token_start; t < s.token_end; ++t) {
      protected_positions[index.flat(s.sentence_index, t)] = true;
    }
  }

  MaskSelection sel;
  if (replaced_weight < budget) {
    sel = detail::select_mask_spans(index, weights, budget - replaced_weight,
                                    protected_positions, params, rng);
  }
  out.masked_positions = sel.masked_positions;
  out.mask_spans_applied = sel.spans;
  out.max_mask_span = sel.max_span;
  out.budget_warning = sel.warning;
  detail::materialize(segment, sel.spans, rep.replaced, params.permute_prob, rng, out);
  return out;
}

inline NoisedExample f_deep(const Segment& segment, const std::vector<LinkedSpan>& spans,
                            const KBSnapshot& kb, const std::string& src_lang,
                            const NoiseParams& params) {
  Rng rng = segment_rng(params, segment.id);
  return f_deep(segment, spans, kb, src_lang, params, rng);
}

// --- pairs file ---
// {"task":..., "src":[...], "tgt":[...], "meta":{"masked":[...], "replaced":[...],
//  "skipped_spans":n, "segment_id":...}}

struct NoisedPair {
  Task task = Task::DAE;
  std::string segment_id;
  std::vector<std::string> src, tgt;
  std::vector<size_t> masked;
  struct ReplacedRef {
    std::string entity_id;
    size_t src_start, src_end, tgt_start, tgt_end;
  };
  std::vector<ReplacedRef> replaced;
  size_t skipped_spans = 0;
};

inline json pair_to_json(const NoisedExample& ex) {
  json replaced = json::array();
  for (const auto& r : ex.replaced) {
    replaced.push_back(json{{"id", r.entity_id},
                            {"src", json::array({r.src_start, r.src_end})},
                            {"tgt", json::array({r.tgt_start, r.tgt_end})}});
  }
  json meta{{"masked", ex.masked_positions},
            {"replaced", replaced},
            {"skipped_spans", ex.skipped_spans},
            {"segment_id", ex.segment_id}};
  if (ex.budget_warning) meta["warning"] = true;
  return json{{"task", task_name(ex.task)},
              {"src", ex.src_flat()},
              {"tgt", ex.tgt_flat()},
              {"meta", meta}};
}

inline void save_pairs(const std::vector<NoisedExample>& pairs,
                       const std::filesystem::path& path) {
  AtomicWriter out(path);
  for (const auto& ex : pairs) out.write_line(pair_to_json(ex));
  out.commit();
}

inline std::vector<NoisedPair> load_pairs(const std::filesystem::path& path) {
  std::vector<NoisedPair> pairs;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    if (!obj.contains("task") || !obj.contains("src") || !obj.contains("tgt")) {
      throw Error(path.string() + ":" + std::to_string(lineno) +
                  ": expected {\"task\",\"src\",\"tgt\",\"meta\"}");
    }
    NoisedPair p;
    p.task = task_from_name(obj["task"].get<std::string>());
    p.src = obj["src"].get<std::vector<std::string>>();
    p.tgt = obj["tgt"].get<std::vector<std::string>>();
    if (obj.contains("meta")) {
      const json& meta = obj["meta"];
      p.segment_id = meta.value("segment_id", std::string{});
      if (meta.contains("masked")) p.masked = meta["masked"].get<std::vector<size_t>>();
      p.skipped_spans = meta.value("skipped_spans", size_t{0});
      for (const auto& r : meta.value("replaced", json::array())) {
        p.replaced.push_back(NoisedPair::ReplacedRef{
            r.at("id").get<std::string>(), r.at("src")[0].get<size_t>(),
            r.at("src")[1].get<size_t>(), r.at("tgt")[0].get<size_t>(),
            r.at("tgt")[1].get<size_t>()});
      }
    }
    pairs.push_back(std::move(p));
  });
  return pairs;
}

}  // namespace deep
