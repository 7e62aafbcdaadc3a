#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deep/error.hpp"
#include "deep/linker.hpp"
#include "deep/subword.hpp"
#include "deep/util/jsonl.hpp"

namespace deep {

// --- corpus BLEU ---

namespace detail {

// n-gram -> count for one token sequence; grams keyed by joined tokens.
inline std::map<std::string, size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                  size_t n) {
  std::map<std::string, size_t> counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (size_t j = 0; j < n; ++j) {
      if (j > 0) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

// Corpus-level BLEU-4: geometric mean of clipped n-gram precisions times the
// brevity penalty, scaled to [0, 100]. Without smoothing any zero precision
// zeroes the score; with smoothing, orders above 1 get add-one smoothing.
// Orders for which the hypotheses have no n-grams at all are vacuous, so an
// identical corpus always scores 100 however short it is.
inline double corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                          const std::vector<std::vector<std::string>>& references,
                          bool smoothing = false) {
  if (hypotheses.size() != references.size()) {
    throw Error("corpus_bleu: hypothesis/reference count mismatch");
  }
  if (hypotheses.empty()) throw Error("corpus_bleu: empty corpus");

  constexpr size_t kMaxOrder = 4;
  size_t matched[kMaxOrder] = {0, 0, 0, 0};
  size_t total[kMaxOrder] = {0, 0, 0, 0};
  size_t hyp_len = 0, ref_len = 0;
  for (size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += hypotheses[i].size();
    ref_len += references[i].size();
    for (size_t n = 1; n <= kMaxOrder; ++n) {
      auto hyp_grams = detail::ngram_counts(hypotheses[i], n);
      auto ref_grams = detail::ngram_counts(references[i], n);
      for (const auto& [gram, count] : hyp_grams) {
        total[n - 1] += count;
        auto it = ref_grams.find(gram);
        if (it != ref_grams.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_precision_sum = 0.0;
  for (size_t n = 0; n < kMaxOrder; ++n) {
    double m = static_cast<double>(matched[n]);
    double t = static_cast<double>(total[n]);
    if (smoothing && n > 0) {
      m += 1.0;
      t += 1.0;
    }
    if (t == 0.0) continue;  // no n-grams of this order anywhere: vacuous
    if (m == 0.0) return 0.0;
    log_precision_sum += std::log(m / t);
  }
  const double brevity = hyp_len >= ref_len || hyp_len == 0
                             ? 1.0
                             : std::exp(1.0 - static_cast<double>(ref_len) /
                                                  static_cast<double>(hyp_len));
  return 100.0 * brevity * std::exp(log_precision_sum / static_cast<double>(kMaxOrder));
}

// --- entity translation accuracy ---

enum class EntityGroup { PFT, PT, FT, Other };

inline std::string entity_group_name(EntityGroup g) {
  switch (g) {
    case EntityGroup::PFT: return "PFT";
    case EntityGroup::PT: return "PT";
    case EntityGroup::FT: return "FT";
    default: return "other";
  }
}

struct EntityStats {
  size_t ref_occurrences = 0;
  size_t matched = 0;

  double accuracy() const {
    return ref_occurrences == 0 ? 0.0
                                : static_cast<double>(matched) / static_cast<double>(ref_occurrences);
  }
};

struct EntityAccuracyReport {
  std::map<std::string, EntityStats> per_entity;  // only entities seen in references
  double macro_accuracy = 0.0;
  std::map<std::string, EntityGroup> group;  // filled by partition_entities

  void recompute_macro() {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& [id, stats] : per_entity) {
      if (stats.ref_occurrences == 0) continue;
      sum += stats.accuracy();
      ++n;
    }
    macro_accuracy = n == 0 ? 0.0 : sum / static_cast<double>(n);
  }
};

// Links hypotheses and references with the same gazetteer, sentence by
// sentence. A reference occurrence counts as matched when the hypothesis
// sentence links the same entity id, count-aware: k reference occurrences
// need k hypothesis occurrences. Untranslated copies therefore miss, since
// the target-language gazetteer cannot link them.
inline EntityAccuracyReport entity_accuracy(
    const std::vector<std::vector<std::string>>& hyp_sentences,
    const std::vector<std::vector<std::string>>& ref_sentences, const Gazetteer& gazetteer) {
  if (hyp_sentences.size() != ref_sentences.size()) {
    throw Error("entity_accuracy: hypothesis/reference count mismatch");
  }
  EntityAccuracyReport report;
  for (size_t i = 0; i < ref_sentences.size(); ++i) {
    std::map<std::string, size_t> ref_counts, hyp_counts;
    for (const auto& span : link(ref_sentences[i], gazetteer)) ++ref_counts[span.entity_id];
    for (const auto& span : link(hyp_sentences[i], gazetteer)) ++hyp_counts[span.entity_id];
    for (const auto& [id, k] : ref_counts) {
      auto& stats = report.per_entity[id];
      stats.ref_occurrences += k;
      auto it = hyp_counts.find(id);
      if (it != hyp_counts.end()) stats.matched += std::min(k, it->second);
    }
  }
  report.recompute_macro();
  return report;
}

// --- PFT / PT / FT partition ---

// Every test entity falls in exactly one group: PFT when it appears in both
// pre-training and finetuning data, PT when only in pre-training, FT when
// only in finetuning, other when in neither.
inline std::map<std::string, EntityGroup> partition_entities(
    const std::set<std::string>& pretrain_ids, const std::set<std::string>& finetune_ids,
    const std::set<std::string>& test_ids) {
  std::map<std::string, EntityGroup> out;
  for (const auto& id : test_ids) {
    const bool in_pre = pretrain_ids.count(id) > 0;
    const bool in_fine = finetune_ids.count(id) > 0;
    EntityGroup g = EntityGroup::Other;
    if (in_pre && in_fine) g = EntityGroup::PFT;
    else if (in_pre) g = EntityGroup::PT;
    else if (in_fine) g = EntityGroup::FT;
    out.emplace(id, g);
  }
  return out;
}

// --- frequency-binned gain matrix ---

// Half-open frequency bins [0,e0), [e0,e1), ..., [eK,inf). The default edges
// {1,4,16,64} give bins 0, 1-3, 4-15, 16-63, 64+; bin 0 of the finetune axis
// is exactly the entities absent from finetuning data.
struct BinSpec {
  std::vector<size_t> edges{1, 4, 16, 64};

  size_t bin_count() const { return edges.size() + 1; }

  size_t bin_of(size_t freq) const {
    size_t b = 0;
    while (b < edges.size() && freq >= edges[b]) ++b;
    return b;
  }

  std::string label(size_t bin) const {
    const size_t lo = bin == 0 ? 0 : edges[bin - 1];
    if (bin == edges.size()) return std::to_string(lo) + "+";
    const size_t hi = edges[bin];
    if (hi == lo + 1) return std::to_string(lo);
    return std::to_string(lo) + "-" + std::to_string(hi - 1);
  }

  void validate() const {
    if (edges.empty()) throw Error("bin_edges must be non-empty");
    size_t prev = 0;
    for (size_t e : edges) {
      if (e <= prev) throw Error("bin_edges must be strictly ascending and >= 1");
      prev = e;
    }
  }
};

struct GainCell {
  size_t n_entities = 0;
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double delta = 0.0;
  std::vector<std::string> ids;
};

struct GainMatrix {
  BinSpec bins;
  // cells[pretrain_bin][finetune_bin]; absent where no entity lands
  std::vector<std::vector<std::optional<GainCell>>> cells;
};

inline size_t freq_of(const std::map<std::string, size_t>& freqs, const std::string& id) {
  auto it = freqs.find(id);
  return it == freqs.end() ? 0 : it->second;
}

// Buckets the reports' entities by (pretrain frequency, finetune frequency)
// and takes the per-bucket macro accuracy difference report_b - report_a.
// Both reports must cover the same test corpus.
inline GainMatrix frequency_gain_matrix(const EntityAccuracyReport& report_a,
                                        const EntityAccuracyReport& report_b,
                                        const std::map<std::string, size_t>& pretrain_freqs,
                                        const std::map<std::string, size_t>& finetune_freqs,
                                        const BinSpec& bins = BinSpec{}) {
  bins.validate();
  if (report_a.per_entity.size() != report_b.per_entity.size()) {
    throw Error("frequency_gain_matrix: reports cover different entity sets");
  }
  for (const auto& [id, stats] : report_a.per_entity) {
    auto it = report_b.per_entity.find(id);
    if (it == report_b.per_entity.end() || it->second.ref_occurrences != stats.ref_occurrences) {
      throw Error("frequency_gain_matrix: reports cover different corpora (entity " + id + ")");
    }
  }

  const size_t k = bins.bin_count();
  struct Bucket {
    double sum_a = 0.0, sum_b = 0.0;
    std::vector<std::string> ids;
  };
  std::vector<std::vector<Bucket>> buckets(k, std::vector<Bucket>(k));
  for (const auto& [id, stats_a] : report_a.per_entity) {
    const auto& stats_b = report_b.per_entity.at(id);
    const size_t pb = bins.bin_of(freq_of(pretrain_freqs, id));
    const size_t fb = bins.bin_of(freq_of(finetune_freqs, id));
    auto& bucket = buckets[pb][fb];
    bucket.sum_a += stats_a.accuracy();
    bucket.sum_b += stats_b.accuracy();
    bucket.ids.push_back(id);
  }

  GainMatrix matrix;
  matrix.bins = bins;
  matrix.cells.assign(k, std::vector<std::optional<GainCell>>(k));
  for (size_t p = 0; p < k; ++p) {
    for (size_t f = 0; f < k; ++f) {
      auto& bucket = buckets[p][f];
      if (bucket.ids.empty()) continue;
      GainCell cell;
      cell.n_entities = bucket.ids.size();
      cell.accuracy_a = bucket.sum_a / static_cast<double>(cell.n_entities);
      cell.accuracy_b = bucket.sum_b / static_cast<double>(cell.n_entities);
      cell.delta = cell.accuracy_b - cell.accuracy_a;
      std::sort(bucket.ids.begin(), bucket.ids.end());
      cell.ids = std::move(bucket.ids);
      matrix.cells[p][f] = std::move(cell);
    }
  }
  return matrix;
}

// --- corpus and coverage statistics ---

struct CoverageStats {
  // corpus_stats fields
  size_t segments = 0;
  size_t sentences = 0;
  size_t words = 0;
  size_t subwords = 0;
  size_t entity_types = 0;
  size_t entity_occurrences = 0;
  double avg_entity_subwords_per_segment = 0.0;  // the N of the corpus tables

  // coverage_stats fields; percentages in [0,100]
  struct CorpusCount {
    size_t types = 0;
    size_t occurrences = 0;
  };
  CorpusCount pretrain, finetune, test;
  std::optional<double> pf_f_type_pct, pf_f_count_pct;
  std::optional<double> pt_t_type_pct, pt_t_count_pct;
};

inline std::map<std::string, size_t> entity_counts(const LinkedCorpus& corpus) {
  std::map<std::string, size_t> counts;
  for (const auto& [id, spans] : corpus.items) {
    for (const auto& span : spans) ++counts[span.entity_id];
  }
  return counts;
}

namespace detail {

// type% = share of types covered; count% = share of occurrences whose type
// is covered. Empty denominators are vacuously full coverage.
inline std::pair<double, double> coverage_of(const std::map<std::string, size_t>& target,
                                             const std::map<std::string, size_t>& covering) {
  if (target.empty()) return {100.0, 100.0};
  size_t covered_types = 0, covered_occurrences = 0, total_occurrences = 0;
  for (const auto& [id, count] : target) {
    total_occurrences += count;
    if (covering.count(id) > 0) {
      ++covered_types;
      covered_occurrences += count;
    }
  }
  const double type_pct =
      100.0 * static_cast<double>(covered_types) / static_cast<double>(target.size());
  const double count_pct =
      total_occurrences == 0
          ? 100.0
          : 100.0 * static_cast<double>(covered_occurrences) / static_cast<double>(total_occurrences);
  return {type_pct, count_pct};
}

}  // namespace detail

// Table-2 style coverage: what share of finetuning (test) entity types and
// occurrence counts the pre-training data covers.
inline CoverageStats coverage_stats(const LinkedCorpus& pretrain_links,
                                    const LinkedCorpus& finetune_links,
                                    const LinkedCorpus& test_links) {
  CoverageStats stats;
  auto pre = entity_counts(pretrain_links);
  auto fine = entity_counts(finetune_links);
  auto test = entity_counts(test_links);
  auto total = [](const std::map<std::string, size_t>& m) {
    size_t n = 0;
    for (const auto& [id, c] : m) n += c;
    return n;
  };
  stats.pretrain = {pre.size(), total(pre)};
  stats.finetune = {fine.size(), total(fine)};
  stats.test = {test.size(), total(test)};
  auto [pf_t, pf_c] = detail::coverage_of(fine, pre);
  auto [pt_t, pt_c] = detail::coverage_of(test, pre);
  stats.pf_f_type_pct = pf_t;
  stats.pf_f_count_pct = pf_c;
  stats.pt_t_type_pct = pt_t;
  stats.pt_t_count_pct = pt_c;
  return stats;
}

// Table-1 style corpus statistics over a packed, linked corpus. N is the
// mean over segments of the subword count inside entity spans, so it needs
// segments loaded with a vocab.
inline CoverageStats corpus_stats(const std::vector<Segment>& segments,
                                  const LinkedCorpus& links) {
  CoverageStats stats;
  std::set<std::string> types;
  double entity_subwords_total = 0.0;
  for (const auto& seg : segments) {
    ++stats.segments;
    stats.sentences += seg.sentences.size();
    stats.words += seg.word_count();
    stats.subwords += seg.total_subwords;
    const auto* spans = links.find(seg.id);
    if (spans == nullptr) continue;
    if (!spans->empty() && seg.word_subwords.size() != seg.sentences.size()) {
      throw Error("corpus_stats: segment " + seg.id +
                  " lacks per-word subword counts (load with a vocab)");
    }
    size_t seg_entity_subwords = 0;
    for (const auto& span : *spans) {
      if (span.sentence_index >= seg.sentences.size() ||
          span.token_end > seg.sentences[span.sentence_index].size() ||
          span.token_start >= span.token_end) {
        throw Error("corpus_stats: span out of bounds in segment " + seg.id);
      }
      types.insert(span.entity_id);
      ++stats.entity_occurrences;
      for (size_t t = span.token_start; t < span.token_end; ++t) {
        seg_entity_subwords += seg.word_subwords[span.sentence_index][t];
      }
    }
    entity_subwords_total += static_cast<double>(seg_entity_subwords);
  }
  stats.entity_types = types.size();
  stats.avg_entity_subwords_per_segment =
      stats.segments == 0 ? 0.0 : entity_subwords_total / static_cast<double>(stats.segments);
  return stats;
}

// --- report serialization ---

inline json report_to_json(const EntityAccuracyReport& report) {
  json per_entity = json::object();
  for (const auto& [id, stats] : report.per_entity) {
    json entry{{"ref_occurrences", stats.ref_occurrences},
               {"matched", stats.matched},
               {"accuracy", stats.accuracy()}};
    auto git = report.group.find(id);
    if (git != report.group.end()) entry["group"] = entity_group_name(git->second);
    per_entity[id] = std::move(entry);
  }
  json groups = json::object();
  for (const auto& [id, g] : report.group) groups[id] = entity_group_name(g);
  return json{{"per_entity", per_entity},
              {"macro_accuracy", report.macro_accuracy},
              {"groups", groups}};
}

inline json matrix_to_json(const GainMatrix& matrix) {
  const size_t k = matrix.bins.bin_count();
  json rows = json::array();
  json cols = json::array();
  for (size_t b = 0; b < k; ++b) {
    rows.push_back(matrix.bins.label(b));
    cols.push_back(matrix.bins.label(b));
  }
  json cells = json::array();
  for (size_t p = 0; p < k; ++p) {
    json row = json::array();
    for (size_t f = 0; f < k; ++f) {
      const auto& cell = matrix.cells[p][f];
      if (!cell.has_value()) {
        row.push_back(nullptr);
      } else {
        row.push_back(json{{"n_entities", cell->n_entities},
                           {"accuracy_a", cell->accuracy_a},
                           {"accuracy_b", cell->accuracy_b},
                           {"delta", cell->delta}});
      }
    }
    cells.push_back(std::move(row));
  }
  return json{{"pretrain_bins", rows}, {"finetune_bins", cols}, {"cells", cells}};
}

// Heatmap CSV: rows = pretrain bins, columns = finetune bins, empty cells
// left blank.
inline void matrix_to_csv(const GainMatrix& matrix, const std::filesystem::path& path) {
  AtomicWriter out(path);
  const size_t k = matrix.bins.bin_count();
  std::string header = "pretrain_bin\\finetune_bin";
  for (size_t f = 0; f < k; ++f) header += "," + matrix.bins.label(f);
  out.write_line(header);
  for (size_t p = 0; p < k; ++p) {
    std::string row = matrix.bins.label(p);
    for (size_t f = 0; f < k; ++f) {
      row += ",";
      const auto& cell = matrix.cells[p][f];
      if (cell.has_value()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", cell->delta);
        row += buf;
      }
    }
    out.write_line(row);
  }
  out.commit();
}

inline json coverage_to_json(const CoverageStats& stats) {
  json out{{"segments", stats.segments},
           {"sentences", stats.sentences},
           {"words", stats.words},
           {"subwords", stats.subwords},
           {"entity_types", stats.entity_types},
           {"entity_occurrences", stats.entity_occurrences},
           {"avg_entity_subwords_per_segment", stats.avg_entity_subwords_per_segment}};
  auto corpus = [](const CoverageStats::CorpusCount& c) {
    return json{{"types", c.types}, {"occurrences", c.occurrences}};
  };
  if (stats.pf_f_type_pct.has_value()) {
    out["pretrain"] = corpus(stats.pretrain);
    out["finetune"] = corpus(stats.finetune);
    out["test"] = corpus(stats.test);
    out["pf_f"] = json{{"type_pct", *stats.pf_f_type_pct}, {"count_pct", *stats.pf_f_count_pct}};
    out["pt_t"] = json{{"type_pct", *stats.pt_t_type_pct}, {"count_pct", *stats.pt_t_count_pct}};
  }
  return out;
}

}  // namespace deep
