#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deep/error.hpp"
#include "deep/eval.hpp"
#include "deep/noise.hpp"
#include "deep/sampler.hpp"
#include "deep/synth.hpp"
#include "deep/util/jsonl.hpp"

namespace deep {

struct Diagnostic {
  std::string field;
  std::string message;
};

// Shared pipeline configuration, one human-readable JSON file. Flags override
// individual fields; the seed is mandatory, there is no wall-clock default.
struct PipelineConfig {
  std::optional<uint64_t> seed;
  std::string src_lang = "en";
  std::string tgt_lang;
  std::map<std::string, std::string> paths;  // kb, vocab, corpus, out_dir, ...
  NoiseParams noise;
  std::string mode = "multitask";
  std::string objective = "DEEP";
  size_t epochs = 1;
  std::string norm_policy = "exact";
  BinSpec bins;
  bool bleu_smoothing = false;
  json synth = json::object();

  static PipelineConfig from_json(const json& obj) {
    PipelineConfig cfg;
    if (obj.contains("seed")) cfg.seed = obj["seed"].get<uint64_t>();
    if (obj.contains("languages")) {
      cfg.src_lang = obj["languages"].value("src", cfg.src_lang);
      cfg.tgt_lang = obj["languages"].value("tgt", cfg.tgt_lang);
    }
    if (obj.contains("paths")) {
      for (const auto& [key, value] : obj["paths"].items()) {
        cfg.paths[key] = value.get<std::string>();
      }
    }
    if (obj.contains("noise")) {
      const json& nz = obj["noise"];
      cfg.noise.lambda = nz.value("lambda", cfg.noise.lambda);
      cfg.noise.mask_ratio = nz.value("mask_ratio", cfg.noise.mask_ratio);
      cfg.noise.permute_prob = nz.value("permute_prob", cfg.noise.permute_prob);
      cfg.noise.count_subwords = nz.value("count_subwords", cfg.noise.count_subwords);
    }
    if (obj.contains("sampler")) {
      const json& sm = obj["sampler"];
      cfg.mode = sm.value("mode", cfg.mode);
      cfg.objective = sm.value("objective", cfg.objective);
      cfg.epochs = sm.value("epochs", cfg.epochs);
    }
    if (obj.contains("linker")) {
      cfg.norm_policy = obj["linker"].value("normalization", cfg.norm_policy);
    }
    if (obj.contains("eval")) {
      const json& ev = obj["eval"];
      if (ev.contains("bin_edges")) cfg.bins.edges = ev["bin_edges"].get<std::vector<size_t>>();
      cfg.bleu_smoothing = ev.value("bleu_smoothing", cfg.bleu_smoothing);
    }
    if (obj.contains("synth")) cfg.synth = obj["synth"];
    return cfg;
  }

  static PipelineConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json obj = json::parse(in, nullptr, false);
    if (obj.is_discarded()) throw ConfigError(path.string() + ": malformed JSON");
    try {
      return from_json(obj);
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
};

// Full-pipeline runnability check. Empty result iff the config can drive
// every stage; each diagnostic names the offending field.
inline std::vector<Diagnostic> validate(const PipelineConfig& cfg) {
  std::vector<Diagnostic> out;
  if (!cfg.seed.has_value()) {
    out.push_back({"seed", "seed is mandatory (no wall-clock default)"});
  }
  if (cfg.tgt_lang.empty()) {
    out.push_back({"languages.tgt", "target language code is required"});
  }
  for (const char* key : {"kb", "vocab", "out_dir"}) {
    auto it = cfg.paths.find(key);
    if (it == cfg.paths.end() || it->second.empty()) {
      out.push_back({std::string("paths.") + key, std::string("missing required path ") + key});
    } else if (std::string(key) != "out_dir" && !std::filesystem::exists(it->second)) {
      out.push_back({std::string("paths.") + key, "file does not exist: " + it->second});
    }
  }
  for (const auto& [key, value] : cfg.paths) {
    if (key == "kb" || key == "vocab" || key == "out_dir") continue;
    if (!std::filesystem::exists(value)) {
      out.push_back({"paths." + key, "file does not exist: " + value});
    }
  }
  if (!(cfg.noise.mask_ratio > 0.0 && cfg.noise.mask_ratio <= 1.0)) {
    out.push_back({"noise.mask_ratio", "mask_ratio must be in (0,1]"});
  }
  if (!(cfg.noise.lambda > 0.0)) {
    out.push_back({"noise.lambda", "lambda must be > 0"});
  }
  if (cfg.noise.permute_prob < 0.0 || cfg.noise.permute_prob > 1.0) {
    out.push_back({"noise.permute_prob", "permute_prob must be in [0,1]"});
  }
  if (cfg.mode != "single" && cfg.mode != "multitask") {
    out.push_back({"sampler.mode", "mode must be single or multitask"});
  }
  if (cfg.objective != "DAE" && cfg.objective != "DEEP") {
    out.push_back({"sampler.objective", "objective must be DAE or DEEP"});
  }
  if (cfg.norm_policy != "exact" && cfg.norm_policy != "casefold") {
    out.push_back({"linker.normalization", "normalization must be exact or casefold"});
  }
  try {
    cfg.bins.validate();
  } catch (const Error& e) {
    out.push_back({"eval.bin_edges", e.what()});
  }
  if (cfg.synth.is_object() && !cfg.synth.empty()) {
    try {
      world_spec_from_json(cfg.synth).validate();
    } catch (const std::exception& e) {
      out.push_back({"synth", e.what()});
    }
  }
  return out;
}

}  // namespace deep
