// deep: command-line front end for the entity-denoising data pipeline.
// Subcommands cover the whole flow: synth -> pack -> link -> noise -> emit ->
// sample -> eval/stats, plus build-kb and validate. All outputs are written
// atomically (temp + rename) and every stage logs one structured line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deep/config.hpp"
#include "deep/error.hpp"
#include "deep/eval.hpp"
#include "deep/kb.hpp"
#include "deep/linker.hpp"
#include "deep/noise.hpp"
#include "deep/sampler.hpp"
#include "deep/subword.hpp"
#include "deep/synth.hpp"
#include "deep/util/log.hpp"
#include "deep/util/parallel.hpp"

namespace fs = std::filesystem;

namespace {

using deep::json;

std::set<std::string> parse_langs(const std::string& csv) {
  std::set<std::string> langs;
  size_t start = 0;
  while (start <= csv.size()) {
    size_t comma = csv.find(',', start);
    if (comma == std::string::npos) comma = csv.size();
    if (comma > start) langs.insert(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return langs;
}

std::vector<std::vector<std::string>> load_token_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw deep::Error("cannot open " + path.string());
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(deep::split_whitespace(line));
  return out;
}

// Shared flag plumbing: load --config first, then let explicit flags win.
struct Common {
  std::string config_path;
  deep::PipelineConfig config;

  void load() {
    if (!config_path.empty()) config = deep::PipelineConfig::load(config_path);
  }

  std::string path_or(const std::string& flag_value, const std::string& key) const {
    if (!flag_value.empty()) return flag_value;
    auto it = config.paths.find(key);
    return it == config.paths.end() ? std::string{} : it->second;
  }

  std::string require_path(const std::string& flag_value, const std::string& key) const {
    std::string value = path_or(flag_value, key);
    if (value.empty()) {
      throw deep::ConfigError("missing required path: --" + key + " (or paths." + key +
                              " in the config)");
    }
    return value;
  }

  uint64_t require_seed(const std::optional<uint64_t>& flag_value) const {
    if (flag_value.has_value()) return *flag_value;
    if (config.seed.has_value()) return *config.seed;
    throw deep::ConfigError("seed is mandatory (no wall-clock default): pass --seed");
  }

  deep::NoiseParams noise_params(const std::optional<double>& lambda,
                                 const std::optional<double>& mask_ratio,
                                 const std::optional<double>& permute_prob,
                                 bool count_subwords_flag) const {
    deep::NoiseParams params = config.noise;
    if (lambda.has_value()) params.lambda = *lambda;
    if (mask_ratio.has_value()) params.mask_ratio = *mask_ratio;
    if (permute_prob.has_value()) params.permute_prob = *permute_prob;
    if (count_subwords_flag) params.count_subwords = true;
    try {
      params.validate();
    } catch (const deep::Error& e) {
      throw deep::ConfigError(e.what());
    }
    return params;
  }
};

int cmd_build_kb(const Common& common, const std::string& tsv, const std::string& snapshot,
                 const std::string& langs_csv, const std::string& out, bool check) {
  const std::set<std::string> langs = parse_langs(langs_csv);
  if (langs.empty()) throw deep::ConfigError("--langs must list at least one language code");
  deep::KBSnapshot kb;
  if (!tsv.empty()) {
    kb = deep::kb_from_tsv(tsv, langs);
  } else if (!snapshot.empty()) {
    kb = deep::load_kb(snapshot, langs);
  } else {
    throw deep::ConfigError("build-kb needs --tsv or --snapshot");
  }
  if (check && !deep::index_matches_records(kb)) {
    throw deep::Error("inverted index does not match records (corrupt snapshot)");
  }
  deep::save_kb(kb, common.require_path(out, "out"));
  size_t forms = 0;
  for (const auto& [lang, index] : kb.index) forms += index.size();
  deep::StageLog("build-kb").count("records", kb.size()).count("indexed_forms", forms).emit();
  return 0;
}

int cmd_link(const Common& common, const std::string& kb_path, const std::string& lang,
             const std::string& policy, const std::string& input, const std::string& out,
             unsigned workers) {
  auto kb = deep::load_kb(common.require_path(kb_path, "kb"), {lang});
  auto gaz = deep::build_gazetteer(kb, lang, deep::norm_policy_from_name(policy));

  // Accepts either packed segments or raw documents; both carry "sentences".
  std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> items;
  deep::for_each_jsonl(input, [&](size_t lineno, const json& obj) {
    std::string id;
    if (obj.contains("segment_id")) id = obj["segment_id"].get<std::string>();
    else if (obj.contains("doc")) id = obj["doc"].get<std::string>();
    else throw deep::Error(input + ":" + std::to_string(lineno) + ": no segment_id or doc field");
    if (!obj.contains("sentences")) {
      throw deep::Error(input + ":" + std::to_string(lineno) + ": no sentences field");
    }
    items.emplace_back(id, obj["sentences"].get<std::vector<std::vector<std::string>>>());
  });

  auto spans = deep::parallel_map<std::vector<deep::LinkedSpan>>(
      items.size(), workers, [&](size_t i) { return deep::link_segment(items[i].second, gaz); });

  deep::LinkedCorpus corpus;
  size_t total_spans = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    total_spans += spans[i].size();
    corpus.add(items[i].first, std::move(spans[i]));
  }
  deep::save_links(corpus, common.require_path(out, "out"));
  deep::StageLog("link")
      .count("segments", items.size())
      .count("spans", total_spans)
      .count("forms", gaz.form_count())
      .emit();
  return 0;
}

int cmd_pack(const Common& common, const std::string& corpus, const std::string& vocab_path,
             const std::string& out, size_t max_subwords) {
  auto vocab = deep::SubwordVocab::load(common.require_path(vocab_path, "vocab"));
  auto docs = deep::load_documents(common.require_path(corpus, "corpus"));
  auto segments = deep::pack_segments(docs, vocab, max_subwords);
  deep::save_segments(segments, common.require_path(out, "out"));
  size_t truncated = 0, subwords = 0;
  for (const auto& s : segments) {
    truncated += s.truncated ? 1 : 0;
    subwords += s.total_subwords;
  }
  deep::StageLog("pack")
      .count("docs", docs.size())
      .count("segments", segments.size())
      .count("subwords", subwords)
      .count("truncated", truncated)
      .emit();
  return 0;
}

int cmd_noise(const Common& common, const std::string& segments_path,
              const std::string& links_path, const std::string& kb_path,
              const std::string& src_lang_flag, const std::string& objective,
              std::optional<uint64_t> seed_flag, std::optional<double> lambda,
              std::optional<double> mask_ratio, std::optional<double> permute_prob,
              bool count_subwords, const std::string& out, unsigned workers) {
  deep::NoiseParams params = common.noise_params(lambda, mask_ratio, permute_prob, count_subwords);
  params.seed = common.require_seed(seed_flag);
  const deep::Task task = deep::task_from_name(objective);
  if (task == deep::Task::MT) throw deep::ConfigError("--objective must be DAE or DEEP");

  const std::string vocab_path = common.path_or("", "vocab");
  std::optional<deep::SubwordVocab> vocab;
  if (params.count_subwords) {
    if (vocab_path.empty()) {
      throw deep::ConfigError("count_subwords requires paths.vocab in the config");
    }
    vocab = deep::SubwordVocab::load(vocab_path);
  }
  auto segments = deep::load_segments(common.require_path(segments_path, "segments"),
                                      vocab.has_value() ? &*vocab : nullptr);

  deep::KBSnapshot kb;
  deep::LinkedCorpus links;
  std::string src_lang = src_lang_flag.empty() ? common.config.src_lang : src_lang_flag;
  if (task == deep::Task::DEEP) {
    const std::string kb_file = common.require_path(kb_path, "kb");
    const std::string links_file = common.require_path(links_path, "links");
    kb = deep::load_kb(kb_file, {src_lang});
    links = deep::load_links(links_file);
  }

  static const std::vector<deep::LinkedSpan> no_spans;
  auto results = deep::parallel_map<deep::NoisedExample>(
      segments.size(), workers, [&](size_t i) {
        if (task == deep::Task::DEEP) {
          const auto* spans = links.find(segments[i].id);
          return deep::f_deep(segments[i], spans == nullptr ? no_spans : *spans, kb, src_lang,
                              params);
        }
        return deep::g_dae(segments[i], params);
      });

  size_t warnings = 0, replaced = 0, skipped = 0, masked = 0;
  for (const auto& ex : results) {
    warnings += ex.budget_warning ? 1 : 0;
    replaced += ex.replaced.size();
    skipped += ex.skipped_spans;
    masked += ex.masked_positions.size();
  }
  deep::save_pairs(results, common.require_path(out, "out"));
  deep::StageLog("noise")
      .count("segments", segments.size())
      .count("pairs", results.size())
      .count("replaced_spans", replaced)
      .count("skipped_spans", skipped)
      .count("masked_words", masked)
      .count("warnings", warnings)
      .emit();
  return 0;
}

int cmd_emit(const Common& common, const std::string& pairs_path, const std::string& out) {
  auto pairs = deep::load_pairs(common.require_path(pairs_path, "pairs"));
  deep::AtomicWriter writer(common.require_path(out, "out"));
  writer.write_line(json{{"start_token_id", deep::Reserved::kBos},
                         {"task_token_ids", json{{"[MT]", deep::Reserved::kMt},
                                                 {"[DAE]", deep::Reserved::kDae},
                                                 {"[DEEP]", deep::Reserved::kDeep}}}});
  for (const auto& p : pairs) {
    std::vector<std::string> src = p.src;
    src.insert(src.begin(), deep::task_token(p.task));
    writer.write_line(json{{"task", deep::task_name(p.task)}, {"src", src}, {"tgt", p.tgt}});
  }
  writer.commit();
  deep::StageLog("emit").count("examples", pairs.size()).emit();
  return 0;
}

int cmd_sample(const Common& common, const std::string& parallel_path,
               const std::string& segments_path, const std::string& links_path,
               const std::string& kb_path, const std::string& vocab_path,
               const std::string& src_lang_flag, const std::string& mode_name,
               const std::string& objective, std::optional<uint64_t> seed_flag, size_t epochs,
               std::optional<double> lambda, std::optional<double> mask_ratio,
               std::optional<double> permute_prob, const std::string& out_dir) {
  deep::NoiseParams params = common.noise_params(lambda, mask_ratio, permute_prob, false);
  const uint64_t seed = common.require_seed(seed_flag);
  const deep::MixMode mode = deep::mix_mode_from_name(mode_name);
  const deep::Task task = deep::task_from_name(objective);
  if (task == deep::Task::MT) throw deep::ConfigError("--objective must be DAE or DEEP");

  auto vocab = deep::SubwordVocab::load(common.require_path(vocab_path, "vocab"));
  auto pairs = deep::load_parallel(common.require_path(parallel_path, "parallel"), &vocab);

  deep::MonoPool pool;
  deep::KBSnapshot kb;
  std::string src_lang = src_lang_flag.empty() ? common.config.src_lang : src_lang_flag;
  if (mode == deep::MixMode::Multitask) {
    pool.segments = deep::load_segments(common.require_path(segments_path, "segments"), &vocab);
    const std::string links_file = common.path_or(links_path, "links");
    if (!links_file.empty()) pool.links = deep::load_links(links_file);
    if (task == deep::Task::DEEP) {
      if (!pool.links.has_value()) {
        throw deep::ConfigError("DEEP objective requires --links annotations for the mono pool");
      }
      kb = deep::load_kb(common.require_path(kb_path, "kb"), {src_lang});
    }
  }

  const fs::path dir = common.require_path(out_dir, "out_dir");
  fs::create_directories(dir);
  for (size_t epoch = 0; epoch < epochs; ++epoch) {
    auto plan = deep::build_epoch(pairs, pool, mode, task, seed, epoch);
    char name[32];
    std::snprintf(name, sizeof(name), "plan-epoch%04zu.jsonl", epoch);
    deep::save_epoch_plan(plan, pairs, pool, &kb, src_lang, params, seed, dir / name);
    deep::StageLog("sample")
        .count("epoch", epoch)
        .count("entries", plan.entries.size())
        .count("parallel_subwords", plan.parallel_subwords)
        .count("mono_subwords", plan.mono_subwords)
        .count("shortfall", plan.shortfall ? 1 : 0)
        .emit();
  }
  return 0;
}

int cmd_eval(const Common& common, const std::string& hyp_path, const std::string& ref_path,
             const std::string& kb_path, const std::string& lang, const std::string& policy,
             const std::string& baseline_hyp, const std::string& pretrain_links,
             const std::string& finetune_links, const std::string& bin_edges_csv,
             bool smooth_bleu, const std::string& out, const std::string& csv) {
  auto hyps = load_token_lines(hyp_path);
  auto refs = load_token_lines(ref_path);
  auto kb = deep::load_kb(common.require_path(kb_path, "kb"), {lang});
  auto gaz = deep::build_gazetteer(kb, lang, deep::norm_policy_from_name(policy));

  const bool smoothing = smooth_bleu || common.config.bleu_smoothing;
  const double bleu = deep::corpus_bleu(hyps, refs, smoothing);
  auto report = deep::entity_accuracy(hyps, refs, gaz);

  std::map<std::string, size_t> pre_counts, fine_counts;
  const std::string pre_path = common.path_or(pretrain_links, "pretrain_links");
  const std::string fine_path = common.path_or(finetune_links, "finetune_links");
  if (!pre_path.empty()) pre_counts = deep::entity_counts(deep::load_links(pre_path));
  if (!fine_path.empty()) fine_counts = deep::entity_counts(deep::load_links(fine_path));
  if (!pre_path.empty() || !fine_path.empty()) {
    std::set<std::string> pre_ids, fine_ids, test_ids;
    for (const auto& [id, c] : pre_counts) pre_ids.insert(id);
    for (const auto& [id, c] : fine_counts) fine_ids.insert(id);
    for (const auto& [id, stats] : report.per_entity) test_ids.insert(id);
    report.group = deep::partition_entities(pre_ids, fine_ids, test_ids);
  }

  deep::BinSpec bins = common.config.bins;
  if (!bin_edges_csv.empty()) {
    bins.edges.clear();
    for (const auto& part : parse_langs(bin_edges_csv)) {
      bins.edges.push_back(std::stoull(part));
    }
    std::sort(bins.edges.begin(), bins.edges.end());
    bins.validate();
  }

  json result{{"bleu", bleu}, {"bleu_smoothing", smoothing}};
  json report_json = deep::report_to_json(report);
  for (auto& [key, value] : report_json.items()) result[key] = value;

  if (!baseline_hyp.empty()) {
    auto base_hyps = load_token_lines(baseline_hyp);
    auto base_report = deep::entity_accuracy(base_hyps, refs, gaz);
    auto matrix = deep::frequency_gain_matrix(base_report, report, pre_counts, fine_counts, bins);
    result["baseline_macro_accuracy"] = base_report.macro_accuracy;
    result["gain_matrix"] = deep::matrix_to_json(matrix);
    if (!csv.empty()) deep::matrix_to_csv(matrix, csv);
  }

  deep::AtomicWriter writer(common.require_path(out, "out"));
  writer.stream() << result.dump(2) << '\n';
  writer.commit();
  deep::StageLog("eval")
      .count("sentences", refs.size())
      .count("bleu", bleu)
      .count("macro_accuracy", report.macro_accuracy)
      .count("entities", report.per_entity.size())
      .emit();
  return 0;
}

int cmd_stats(const Common& common, const std::string& segments_path,
              const std::string& links_path, const std::string& vocab_path,
              const std::string& pretrain_links, const std::string& finetune_links,
              const std::string& test_links, const std::string& out) {
  json result = json::object();
  if (!segments_path.empty()) {
    if (links_path.empty()) throw deep::ConfigError("corpus stats need --links with --segments");
    auto vocab = deep::SubwordVocab::load(common.require_path(vocab_path, "vocab"));
    auto segments = deep::load_segments(segments_path, &vocab);
    auto links = deep::load_links(links_path);
    auto stats = deep::corpus_stats(segments, links);
    result["corpus"] = deep::coverage_to_json(stats);
    deep::StageLog("stats")
        .count("segments", stats.segments)
        .count("entity_occurrences", stats.entity_occurrences)
        .count("avg_entity_subwords", stats.avg_entity_subwords_per_segment)
        .emit();
  }
  if (!pretrain_links.empty() || !finetune_links.empty() || !test_links.empty()) {
    if (pretrain_links.empty() || finetune_links.empty() || test_links.empty()) {
      throw deep::ConfigError(
          "coverage stats need --pretrain-links, --finetune-links and --test-links");
    }
    auto coverage = deep::coverage_stats(deep::load_links(pretrain_links),
                                         deep::load_links(finetune_links),
                                         deep::load_links(test_links));
    result["coverage"] = deep::coverage_to_json(coverage);
    deep::StageLog("coverage")
        .count("pf_f_type_pct", *coverage.pf_f_type_pct)
        .count("pt_t_type_pct", *coverage.pt_t_type_pct)
        .emit();
  }
  if (result.empty()) {
    throw deep::ConfigError("stats: nothing to do (pass --segments or the three link files)");
  }
  deep::AtomicWriter writer(common.require_path(out, "out"));
  writer.stream() << result.dump(2) << '\n';
  writer.commit();
  return 0;
}

int cmd_synth(const Common& common, std::optional<uint64_t> seed_flag, const std::string& out_dir) {
  deep::WorldSpec spec = deep::world_spec_from_json(common.config.synth);
  if (seed_flag.has_value()) spec.seed = *seed_flag;
  else if (common.config.seed.has_value() && !common.config.synth.contains("seed")) {
    spec.seed = *common.config.seed;
  }
  auto world = deep::gen_world(spec);
  deep::save_world(world, common.require_path(out_dir, "out_dir"));
  size_t planted = 0;
  for (const auto& [id, spans] : world.pretrain_links.items) planted += spans.size();
  deep::StageLog("synth")
      .count("entities", world.plants.size())
      .count("docs", world.pretrain_docs.size())
      .count("train_pairs", world.train.size())
      .count("test_pairs", world.test.size())
      .count("planted_pretrain_spans", planted)
      .count("lexicon", world.lexicon.size())
      .emit();
  return 0;
}

int cmd_validate(const Common& common) {
  if (common.config_path.empty()) throw deep::ConfigError("validate needs --config");
  auto diagnostics = deep::validate(common.config);
  for (const auto& d : diagnostics) {
    std::cerr << "config: " << d.field << ": " << d.message << '\n';
  }
  if (!diagnostics.empty()) return 2;
  std::cerr << "config ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DEEP entity-denoising data pipeline"};
  app.require_subcommand(1);

  Common common;
  app.add_option("--config", common.config_path, "pipeline config file (JSON)");

  // build-kb
  std::string tsv, snapshot, langs, out, kb_path, lang, policy = "exact", input;
  bool check = false;
  auto* build_kb = app.add_subcommand("build-kb", "convert/canonicalize a KB snapshot");
  build_kb->add_option("--tsv", tsv, "TSV input: id<TAB>lang<TAB>form");
  build_kb->add_option("--snapshot", snapshot, "JSONL snapshot input");
  build_kb->add_option("--langs", langs, "comma-separated language codes")->required();
  build_kb->add_option("--out", out, "output snapshot path");
  build_kb->add_flag("--check", check, "verify the inverted index transpose");

  // link
  unsigned workers = 1;
  auto* link_cmd = app.add_subcommand("link", "gazetteer entity linking over a corpus");
  link_cmd->add_option("--kb", kb_path, "KB snapshot");
  link_cmd->add_option("--lang", lang, "language to link")->required();
  link_cmd->add_option("--policy", policy, "normalization: exact|casefold");
  link_cmd->add_option("--input", input, "segments or documents JSONL")->required();
  link_cmd->add_option("--out", out, "linked-corpus output");
  link_cmd->add_option("--workers", workers, "worker threads");

  // pack
  std::string corpus, vocab_path;
  size_t max_subwords = deep::kDefaultMaxSubwords;
  auto* pack = app.add_subcommand("pack", "pack documents into subword-bounded segments");
  pack->add_option("--corpus", corpus, "documents JSONL");
  pack->add_option("--vocab", vocab_path, "subword vocabulary file");
  pack->add_option("--out", out, "segments output");
  pack->add_option("--max-subwords", max_subwords, "segment budget (default 512)");

  // noise
  std::string segments_path, links_path, objective = "DEEP", src_lang;
  std::optional<uint64_t> seed;
  std::optional<double> lambda, mask_ratio, permute_prob;
  bool count_subwords = false;
  auto* noise = app.add_subcommand("noise", "apply DAE/DEEP noise to segments");
  noise->add_option("--segments", segments_path, "packed segments JSONL");
  noise->add_option("--links", links_path, "linked-corpus JSONL (DEEP)");
  noise->add_option("--kb", kb_path, "KB snapshot (DEEP)");
  noise->add_option("--src-lang", src_lang, "source language for replacements");
  noise->add_option("--objective", objective, "DAE|DEEP");
  noise->add_option("--seed", seed, "noise seed");
  noise->add_option("--lambda", lambda, "Poisson mean for span length");
  noise->add_option("--mask-ratio", mask_ratio, "noise budget fraction (default 0.35)");
  noise->add_option("--permute-prob", permute_prob, "sentence permutation probability");
  noise->add_flag("--count-subwords", count_subwords, "budget in subwords instead of words");
  noise->add_option("--out", out, "pairs output");
  noise->add_option("--workers", workers, "worker threads");

  // emit
  std::string pairs_path;
  auto* emit = app.add_subcommand("emit", "emit task-tagged pre-training examples");
  emit->add_option("--pairs", pairs_path, "noised pairs JSONL");
  emit->add_option("--out", out, "training examples output");

  // sample
  std::string parallel_path, mode = "multitask", out_dir;
  size_t epochs = 1;
  auto* sample = app.add_subcommand("sample", "build finetuning epoch plans");
  sample->add_option("--parallel", parallel_path, "parallel pairs JSONL");
  sample->add_option("--segments", segments_path, "mono segments JSONL (multitask)");
  sample->add_option("--links", links_path, "mono links JSONL (DEEP)");
  sample->add_option("--kb", kb_path, "KB snapshot (DEEP)");
  sample->add_option("--vocab", vocab_path, "subword vocabulary file");
  sample->add_option("--src-lang", src_lang, "source language");
  sample->add_option("--mode", mode, "single|multitask");
  sample->add_option("--objective", objective, "DAE|DEEP");
  sample->add_option("--seed", seed, "sampling seed");
  sample->add_option("--epochs", epochs, "number of epoch plans to emit");
  sample->add_option("--lambda", lambda, "Poisson mean for span length");
  sample->add_option("--mask-ratio", mask_ratio, "noise budget fraction");
  sample->add_option("--permute-prob", permute_prob, "sentence permutation probability");
  sample->add_option("--out-dir", out_dir, "directory for plan files");

  // eval
  std::string hyp, ref, baseline_hyp, pretrain_links, finetune_links, test_links;
  std::string bin_edges, csv;
  bool smooth_bleu = false;
  auto* eval = app.add_subcommand("eval", "BLEU + entity translation accuracy");
  eval->add_option("--hyp", hyp, "hypotheses, one tokenized sentence per line")->required();
  eval->add_option("--ref", ref, "references, aligned with --hyp")->required();
  eval->add_option("--kb", kb_path, "KB snapshot");
  eval->add_option("--lang", lang, "target language to link")->required();
  eval->add_option("--policy", policy, "normalization: exact|casefold");
  eval->add_option("--baseline-hyp", baseline_hyp, "baseline hypotheses for the gain matrix");
  eval->add_option("--pretrain-links", pretrain_links, "pretraining link annotations");
  eval->add_option("--finetune-links", finetune_links, "finetuning link annotations");
  eval->add_option("--bin-edges", bin_edges, "comma-separated frequency bin edges");
  eval->add_flag("--smooth-bleu", smooth_bleu, "add-one smoothing for n>1 precisions");
  eval->add_option("--out", out, "report JSON output");
  eval->add_option("--csv", csv, "gain-matrix heatmap CSV output");

  // stats
  auto* stats = app.add_subcommand("stats", "corpus and coverage statistics");
  stats->add_option("--segments", segments_path, "packed segments JSONL");
  stats->add_option("--links", links_path, "linked-corpus JSONL");
  stats->add_option("--vocab", vocab_path, "subword vocabulary file");
  stats->add_option("--pretrain-links", pretrain_links, "pretraining link annotations");
  stats->add_option("--finetune-links", finetune_links, "finetuning link annotations");
  stats->add_option("--test-links", test_links, "test link annotations");
  stats->add_option("--out", out, "stats JSON output");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic bilingual micro-world");
  synth->add_option("--seed", seed, "world seed");
  synth->add_option("--out-dir", out_dir, "output directory");

  // validate
  auto* validate = app.add_subcommand("validate", "validate a pipeline config");

  CLI11_PARSE(app, argc, argv);

  try {
    common.load();
    if (build_kb->parsed()) return cmd_build_kb(common, tsv, snapshot, langs, out, check);
    if (link_cmd->parsed()) return cmd_link(common, kb_path, lang, policy, input, out, workers);
    if (pack->parsed()) return cmd_pack(common, corpus, vocab_path, out, max_subwords);
    if (noise->parsed()) {
      return cmd_noise(common, segments_path, links_path, kb_path, src_lang, objective, seed,
                       lambda, mask_ratio, permute_prob, count_subwords, out, workers);
    }
    if (emit->parsed()) return cmd_emit(common, pairs_path, out);
    if (sample->parsed()) {
      return cmd_sample(common, parallel_path, segments_path, links_path, kb_path, vocab_path,
                        src_lang, mode, objective, seed, epochs, lambda, mask_ratio, permute_prob,
                        out_dir);
    }
    if (eval->parsed()) {
      return cmd_eval(common, hyp, ref, kb_path, lang, policy, baseline_hyp, pretrain_links,
                      finetune_links, bin_edges, smooth_bleu, out, csv);
    }
    if (stats->parsed()) {
      return cmd_stats(common, segments_path, links_path, vocab_path, pretrain_links,
                       finetune_links, test_links, out);
    }
    if (synth->parsed()) return cmd_synth(common, seed, out_dir);
    if (validate->parsed()) return cmd_validate(common);
  } catch (const deep::ConfigError& e) {
    std::cerr << "deep: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "deep: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
