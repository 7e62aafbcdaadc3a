#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deep/error.hpp"
#include "deep/kb.hpp"
#include "deep/linker.hpp"
#include "deep/noise.hpp"
#include "deep/subword.hpp"
#include "deep/util/jsonl.hpp"
#include "deep/util/rng.hpp"

namespace deep {

struct ParallelPair {
  std::vector<std::string> src_tokens;
  std::vector<std::string> tgt_tokens;
  size_t src_subwords = 0;
  size_t tgt_subwords = 0;
};

inline size_t count_subwords(const std::vector<std::string>& tokens, const SubwordVocab& vocab) {
  size_t n = 0;
  for (const auto& t : tokens) n += vocab.count(t);
  return n;
}

// Parallel corpus file: {"src":[tok,...], "tgt":[tok,...]} per line.
// Subword counts are recomputed from the vocab when one is given.
inline std::vector<ParallelPair> load_parallel(const std::filesystem::path& path,
                                               const SubwordVocab* vocab = nullptr) {
  std::vector<ParallelPair> pairs;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!obj.contains("src") || !obj.contains("tgt")) {
      throw Error(where + ": expected {\"src\":[...], \"tgt\":[...]}");
    }
    ParallelPair p;
    p.src_tokens = obj["src"].get<std::vector<std::string>>();
    p.tgt_tokens = obj["tgt"].get<std::vector<std::string>>();
    if (p.src_tokens.empty() || p.tgt_tokens.empty()) {
      throw Error(where + ": empty side in parallel pair");
    }
    if (vocab != nullptr) {
      p.src_subwords = count_subwords(p.src_tokens, *vocab);
      p.tgt_subwords = count_subwords(p.tgt_tokens, *vocab);
    }
    pairs.push_back(std::move(p));
  });
  return pairs;
}

inline void save_parallel(const std::vector<ParallelPair>& pairs,
                          const std::filesystem::path& path) {
  AtomicWriter out(path);
  for (const auto& p : pairs) {
    out.write_line(json{{"src", p.src_tokens}, {"tgt", p.tgt_tokens}});
  }
  out.commit();
}

// Sum over pairs of max(|x|, |y|): the subword budget the sampled monolingual
// subset must match.
inline size_t parallel_budget(const std::vector<ParallelPair>& pairs) {
  size_t total = 0;
  for (const auto& p : pairs) total += std::max(p.src_subwords, p.tgt_subwords);
  return total;
}

struct MonoSample {
  std::vector<size_t> indices;   // into the segment pool, selection order
  size_t subwords = 0;
  bool shortfall = false;        // pool smaller than the budget
};

// Uniform sampling without replacement until the cumulative subword count
// reaches the budget; overshoot is at most the last segment's size.
inline MonoSample sample_mono_subset(const std::vector<Segment>& segments, size_t budget,
                                     uint64_t seed) {
  MonoSample out;
  if (budget == 0) return out;
  Rng rng(seed);
  std::vector<size_t> order = rng.permutation(segments.size());
  for (size_t idx : order) {
    if (out.subwords >= budget) break;
    out.indices.push_back(idx);
    out.subwords += segments[idx].total_subwords;
  }
  out.shortfall = out.subwords < budget;
  return out;
}

enum class MixMode { Single, Multitask };

inline std::string mix_mode_name(MixMode m) {
  return m == MixMode::Single ? "single" : "multitask";
}

inline MixMode mix_mode_from_name(const std::string& s) {
  if (s == "single") return MixMode::Single;
  if (s == "multitask") return MixMode::Multitask;
  throw Error("unknown mode: " + s + " (expected single|multitask)");
}

// The monolingual side of a finetuning mixture: packed segments plus link
// annotations when the DEEP objective is in play.
struct MonoPool {
  std::vector<Segment> segments;
  std::optional<LinkedCorpus> links;

  const std::vector<LinkedSpan>& spans_for(const Segment& seg) const {
    static const std::vector<LinkedSpan> empty;
    if (!links.has_value()) return empty;
    const auto* spans = links->find(seg.id);
    return spans == nullptr ? empty : *spans;
  }
};

struct PlanEntry {
  Task task = Task::MT;
  size_t index = 0;  // into the parallel pairs or the mono pool
};

struct EpochPlan {
  size_t epoch = 0;
  MixMode mode = MixMode::Single;
  Task objective = Task::DAE;
  std::vector<PlanEntry> entries;
  size_t parallel_subwords = 0;
  size_t mono_subwords = 0;
  bool shortfall = false;
};

// One finetuning epoch: every parallel pair exactly once (identical across
// modes for a given seed), plus — in multitask mode — a budget-matched
// sample of monolingual segments noised under `objective`.
inline EpochPlan build_epoch(const std::vector<ParallelPair>& pairs, const MonoPool& mono_pool,
                             MixMode mode, Task objective, uint64_t seed, size_t epoch = 0) {
  if (objective != Task::DAE && objective != Task::DEEP) {
    throw Error("build_epoch: objective must be DAE or DEEP");
  }
  EpochPlan plan;
  plan.epoch = epoch;
  plan.mode = mode;
  plan.objective = objective;
  plan.parallel_subwords = parallel_budget(pairs);
  for (size_t i = 0; i < pairs.size(); ++i) plan.entries.push_back({Task::MT, i});

  const uint64_t epoch_seed = mix_seed(seed, epoch);
  if (mode == MixMode::Multitask) {
    if (objective == Task::DEEP && !mono_pool.links.has_value()) {
      throw Error("build_epoch: DEEP objective requires link annotations on the mono pool");
    }
    MonoSample sample = sample_mono_subset(mono_pool.segments, plan.parallel_subwords,
                                           mix_seed(epoch_seed, "mono"));
    plan.mono_subwords = sample.subwords;
    plan.shortfall = sample.shortfall;
    for (size_t idx : sample.indices) plan.entries.push_back({objective, idx});
  }
  Rng shuffle_rng(mix_seed(epoch_seed, "shuffle"));
  shuffle_rng.shuffle(plan.entries);
  return plan;
}

// Materializes one plan entry into a training example. Denoising entries are
// noised here, freshly per epoch; every source sequence starts with its task
// token in place of the start token.
inline json materialize_entry(const PlanEntry& entry, const std::vector<ParallelPair>& pairs,
                              const MonoPool& mono_pool, const KBSnapshot* kb,
                              const std::string& src_lang, const NoiseParams& params,
                              uint64_t seed, size_t epoch) {
  std::vector<std::string> src, tgt;
  if (entry.task == Task::MT) {
    const auto& p = pairs.at(entry.index);
    src = p.src_tokens;
    tgt = p.tgt_tokens;
  } else {
    const Segment& seg = mono_pool.segments.at(entry.index);
    NoiseParams epoch_params = params;
    epoch_params.seed = mix_seed(mix_seed(seed, epoch), "noise");
    NoisedExample ex = entry.task == Task::DEEP
                           ? f_deep(seg, mono_pool.spans_for(seg), *kb, src_lang, epoch_params)
                           : g_dae(seg, epoch_params);
    src = ex.src_flat();
    tgt = ex.tgt_flat();
  }
  src.insert(src.begin(), task_token(entry.task));
  return json{{"task", task_name(entry.task)}, {"src", src}, {"tgt", tgt}};
}

// Plan file: a header line with the budget report and the task-token ids a
// trainer must map onto the start-token embedding, then one entry per line.
inline void save_epoch_plan(const EpochPlan& plan, const std::vector<ParallelPair>& pairs,
                            const MonoPool& mono_pool, const KBSnapshot* kb,
                            const std::string& src_lang, const NoiseParams& params,
                            uint64_t seed, const std::filesystem::path& path) {
  AtomicWriter out(path);
  json header{{"epoch", plan.epoch},
              {"mode", mix_mode_name(plan.mode)},
              {"objective", task_name(plan.objective)},
              {"entries", plan.entries.size()},
              {"parallel_subwords", plan.parallel_subwords},
              {"mono_subwords", plan.mono_subwords},
              {"start_token_id", Reserved::kBos},
              {"task_token_ids",
               json{{"[MT]", Reserved::kMt}, {"[DAE]", Reserved::kDae}, {"[DEEP]", Reserved::kDeep}}}};
  if (plan.shortfall) header["shortfall"] = true;
  out.write_line(header);
  for (const auto& entry : plan.entries) {
    out.write_line(
        materialize_entry(entry, pairs, mono_pool, kb, src_lang, params, seed, plan.epoch));
  }
  out.commit();
}

}  // namespace deep
