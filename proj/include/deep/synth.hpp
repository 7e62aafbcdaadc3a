#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "deep/error.hpp"
#include "deep/eval.hpp"
#include "deep/kb.hpp"
#include "deep/linker.hpp"
#include "deep/noise.hpp"
#include "deep/sampler.hpp"
#include "deep/subword.hpp"
#include "deep/util/jsonl.hpp"
#include "deep/util/rng.hpp"

namespace deep {

// Synthetic bilingual micro-world: a KB, a monolingual pretraining corpus,
// parallel train/dev/test data and ground truth for all of it. Source and
// target use disjoint alphabets (Latin vs Cyrillic-flavored pseudo-script)
// so an untranslated copy can never pass for a translation. Surface forms
// embed the entity index, which makes every planted span collision-free and
// exactly recoverable by the gazetteer.

struct GroupSizes {
  size_t pft = 10;
  size_t pt = 10;
  size_t ft = 10;
  size_t test_only = 0;
};

struct FreqRange {
  size_t lo = 1;
  size_t hi = 4;
};

struct WorldSpec {
  uint64_t seed = 1;
  std::string src_lang = "en";
  std::string tgt_lang = "xx";
  GroupSizes groups;
  FreqRange pretrain_freq{1, 6};
  FreqRange finetune_freq{1, 4};
  FreqRange test_freq{1, 3};
  size_t pretrain_docs = 40;
  size_t sentences_per_doc = 8;
  size_t train_pairs = 150;
  size_t dev_pairs = 20;
  size_t test_pairs = 80;
  size_t filler_words = 120;
  size_t min_sentence_words = 5;
  size_t max_sentence_words = 30;
  size_t multi_token_every = 4;  // every k-th entity gets a two-token surface
  size_t alias_every = 5;        // every k-th entity gets an unplanted target alias
  size_t unsourced_every = 0;    // every k-th entity lacks a source surface; 0 = none

  size_t n_entities() const { return groups.pft + groups.pt + groups.ft + groups.test_only; }

  void validate() const {
    if (min_sentence_words < 2 || max_sentence_words < min_sentence_words) {
      throw Error("world spec: sentence length bounds invalid");
    }
    if (filler_words == 0) throw Error("world spec: filler_words must be > 0");
    if (pretrain_freq.lo < 1 || finetune_freq.lo < 1 || test_freq.lo < 1 ||
        pretrain_freq.hi < pretrain_freq.lo || finetune_freq.hi < finetune_freq.lo ||
        test_freq.hi < test_freq.lo) {
      throw Error("world spec: frequency ranges must satisfy 1 <= lo <= hi");
    }
  }
};

struct PlantedEntity {
  std::string id;
  EntityGroup group = EntityGroup::Other;
  size_t pretrain = 0;
  size_t finetune = 0;
  size_t test = 0;
};

struct World {
  WorldSpec spec;
  KBSnapshot kb;
  SubwordVocab vocab;
  std::vector<Document> pretrain_docs;
  LinkedCorpus pretrain_links;  // keyed by document id
  std::vector<ParallelPair> train, dev, test;
  LinkedCorpus finetune_links;  // keyed train-<i>, spans on the target side
  LinkedCorpus test_links;      // keyed test-<i>
  std::vector<PlantedEntity> plants;
  std::map<std::string, EntityGroup> groups;
  std::set<std::pair<std::string, std::string>> lexicon;  // (src, tgt), pretrain entities
};

namespace detail {

// Index spelled with Cyrillic letters standing in for digits, so generated
// target words stay inside the pseudo-script alphabet.
inline std::string cyr_index(size_t i) {
  static const char* kDigits[10] = {"а", "б", "в", "г", "д", "е", "ж", "з", "и", "к"};
  std::string dec = std::to_string(i);
  std::string out;
  for (char c : dec) out += kDigits[c - '0'];
  return out;
}

struct EntityForms {
  std::vector<std::string> tgt_canonical;  // 1-2 tokens, planted in text
  std::vector<std::string> tgt_alias;      // optional extra form, never planted
  std::vector<std::string> src_canonical;  // empty when unsourced
};

inline EntityForms make_forms(const WorldSpec& spec, size_t i) {
  EntityForms f;
  const std::string tag = cyr_index(i);
  const bool multi = spec.multi_token_every > 0 && (i + 1) % spec.multi_token_every == 0;
  f.tgt_canonical = {"Кс" + tag};
  if (multi) f.tgt_canonical.push_back("Мт" + tag);
  if (spec.alias_every > 0 && (i + 1) % spec.alias_every == 0) {
    f.tgt_alias = {"Ал" + tag};
  }
  const bool unsourced = spec.unsourced_every > 0 && (i + 1) % spec.unsourced_every == 0;
  if (!unsourced) {
    f.src_canonical = {"Ent" + std::to_string(i)};
    if (multi) f.src_canonical.push_back("Co" + std::to_string(i));
  }
  return f;
}

// A sentence under construction: filler words plus whole entity surfaces
// inserted at span boundaries, never inside an earlier span.
struct SentenceDraft {
  std::vector<std::string> tokens;
  std::vector<LinkedSpan> spans;  // sentence_index filled by the caller

  void insert_surface(const std::string& entity_id, const std::vector<std::string>& surface,
                      Rng& rng) {
    std::vector<size_t> allowed;
    for (size_t p = 0; p <= tokens.size(); ++p) {
      bool inside = false;
      for (const auto& s : spans) inside = inside || (p > s.token_start && p < s.token_end);
      if (!inside) allowed.push_back(p);
    }
    const size_t pos = allowed[rng.below(allowed.size())];
    tokens.insert(tokens.begin() + static_cast<ptrdiff_t>(pos), surface.begin(), surface.end());
    for (auto& s : spans) {
      if (s.token_start >= pos) {
        s.token_start += surface.size();
        s.token_end += surface.size();
      }
    }
    spans.push_back(LinkedSpan{0, pos, pos + surface.size(), entity_id, join(surface)});
    std::sort(spans.begin(), spans.end(), [](const LinkedSpan& a, const LinkedSpan& b) {
      return a.token_start < b.token_start;
    });
  }
};

}  // namespace detail

inline World gen_world(const WorldSpec& spec) {
  spec.validate();
  Rng rng(mix_seed(spec.seed, "world"));
  World world;
  world.spec = spec;

  // --- entities, groups, planted frequencies ---
  const size_t n = spec.n_entities();
  auto freq_in = [&](const FreqRange& r) { return r.lo + rng.below(r.hi - r.lo + 1); };
  for (size_t i = 0; i < n; ++i) {
    PlantedEntity plant;
    plant.id = "Q" + std::to_string(i + 1);
    if (i < spec.groups.pft) plant.group = EntityGroup::PFT;
    else if (i < spec.groups.pft + spec.groups.pt) plant.group = EntityGroup::PT;
    else if (i < spec.groups.pft + spec.groups.pt + spec.groups.ft) plant.group = EntityGroup::FT;
    else plant.group = EntityGroup::Other;
    plant.pretrain = plant.group == EntityGroup::PFT || plant.group == EntityGroup::PT
                         ? freq_in(spec.pretrain_freq) : 0;
    plant.finetune = plant.group == EntityGroup::PFT || plant.group == EntityGroup::FT
                         ? freq_in(spec.finetune_freq) : 0;
    plant.test = freq_in(spec.test_freq);
    world.groups.emplace(plant.id, plant.group);
    world.plants.push_back(std::move(plant));
  }

  auto slots_needed = [](const std::vector<PlantedEntity>& plants, auto getter) {
    size_t total = 0;
    for (const auto& p : plants) total += getter(p);
    return total;
  };
  constexpr size_t kMentionsPerSentence = 2;
  const size_t pretrain_slots = spec.pretrain_docs * spec.sentences_per_doc;
  const size_t pre_occ = slots_needed(world.plants, [](const PlantedEntity& p) { return p.pretrain; });
  const size_t fine_occ = slots_needed(world.plants, [](const PlantedEntity& p) { return p.finetune; });
  const size_t test_occ = slots_needed(world.plants, [](const PlantedEntity& p) { return p.test; });
  if (pre_occ > pretrain_slots * kMentionsPerSentence) {
    throw Error("infeasible world spec: " + std::to_string(pre_occ) +
                " pretrain entity occurrences but only " + std::to_string(pretrain_slots) +
                " sentences");
  }
  if (fine_occ > spec.train_pairs * kMentionsPerSentence) {
    throw Error("infeasible world spec: " + std::to_string(fine_occ) +
                " finetune entity occurrences but only " + std::to_string(spec.train_pairs) +
                " train pairs");
  }
  if (test_occ > spec.test_pairs * kMentionsPerSentence) {
    throw Error("infeasible world spec: " + std::to_string(test_occ) +
                " test entity occurrences but only " + std::to_string(spec.test_pairs) +
                " test pairs");
  }

  // --- KB ---
  std::vector<detail::EntityForms> forms(n);
  for (size_t i = 0; i < n; ++i) {
    forms[i] = detail::make_forms(spec, i);
    EntityRecord rec;
    rec.id = world.plants[i].id;
    std::vector<std::string> tgt_forms{join(forms[i].tgt_canonical)};
    if (!forms[i].tgt_alias.empty()) tgt_forms.push_back(join(forms[i].tgt_alias));
    rec.surfaces[spec.tgt_lang] = tgt_forms;
    if (!forms[i].src_canonical.empty()) {
      rec.surfaces[spec.src_lang] = {join(forms[i].src_canonical)};
    }
    detail::index_record(world.kb, rec);
    world.kb.records.emplace(rec.id, std::move(rec));
  }
  world.kb.index[spec.src_lang];
  world.kb.index[spec.tgt_lang];

  // --- fillers and the token-level "translation" map ---
  std::vector<std::string> tgt_fillers(spec.filler_words), src_fillers(spec.filler_words);
  std::map<std::string, std::string> filler_translation;
  for (size_t j = 0; j < spec.filler_words; ++j) {
    tgt_fillers[j] = "но" + detail::cyr_index(j);
    src_fillers[j] = "wo" + std::to_string(j);
    filler_translation.emplace(tgt_fillers[j], src_fillers[j]);
  }

  // --- occurrence assignment: exact planted frequencies ---
  auto assign = [&](size_t n_sentences, auto getter) {
    std::vector<std::vector<size_t>> per_sentence(n_sentences);
    std::vector<size_t> occurrences;
    for (size_t i = 0; i < n; ++i) {
      for (size_t k = 0; k < getter(world.plants[i]); ++k) occurrences.push_back(i);
    }
    rng.shuffle(occurrences);
    std::vector<size_t> open(n_sentences);
    for (size_t s = 0; s < n_sentences; ++s) open[s] = s;
    for (size_t entity : occurrences) {
      const size_t pick = rng.below(open.size());
      const size_t sentence = open[pick];
      per_sentence[sentence].push_back(entity);
      if (per_sentence[sentence].size() >= kMentionsPerSentence) {
        open[pick] = open.back();
        open.pop_back();
      }
    }
    return per_sentence;
  };

  auto build_sentence = [&](const std::vector<size_t>& entities) {
    detail::SentenceDraft draft;
    size_t surface_tokens = 0;
    for (size_t e : entities) surface_tokens += forms[e].tgt_canonical.size();
    const size_t target_len =
        spec.min_sentence_words + rng.below(spec.max_sentence_words - spec.min_sentence_words + 1);
    const size_t filler_count = target_len > surface_tokens ? target_len - surface_tokens : 1;
    for (size_t k = 0; k < filler_count; ++k) {
      draft.tokens.push_back(tgt_fillers[rng.below(tgt_fillers.size())]);
    }
    for (size_t e : entities) {
      draft.insert_surface(world.plants[e].id, forms[e].tgt_canonical, rng);
    }
    return draft;
  };

  std::map<std::string, size_t> entity_index;
  for (size_t i = 0; i < n; ++i) entity_index.emplace(world.plants[i].id, i);

  // Source side mirrors the target token for token; entity spans swap to the
  // source surface, or stay copied verbatim when the entity is unsourced.
  auto translate = [&](const detail::SentenceDraft& draft) {
    std::vector<std::string> out;
    size_t t = 0;
    size_t next = 0;
    while (t < draft.tokens.size()) {
      if (next < draft.spans.size() && draft.spans[next].token_start == t) {
        const auto& span = draft.spans[next];
        const auto& src = forms[entity_index.at(span.entity_id)].src_canonical;
        if (src.empty()) {
          for (size_t k = span.token_start; k < span.token_end; ++k) out.push_back(draft.tokens[k]);
        } else {
          out.insert(out.end(), src.begin(), src.end());
        }
        t = span.token_end;
        ++next;
      } else {
        out.push_back(filler_translation.at(draft.tokens[t]));
        ++t;
      }
    }
    return out;
  };

  // --- pretraining documents ---
  auto pre_assign = assign(pretrain_slots, [](const PlantedEntity& p) { return p.pretrain; });
  for (size_t d = 0; d < spec.pretrain_docs; ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    std::vector<LinkedSpan> doc_spans;
    for (size_t s = 0; s < spec.sentences_per_doc; ++s) {
      auto draft = build_sentence(pre_assign[d * spec.sentences_per_doc + s]);
      for (LinkedSpan span : draft.spans) {
        span.sentence_index = s;
        doc_spans.push_back(std::move(span));
      }
      doc.sentences.push_back(std::move(draft.tokens));
    }
    world.pretrain_links.add(doc.id, std::move(doc_spans));
    world.pretrain_docs.push_back(std::move(doc));
  }

  // --- parallel data ---
  auto make_pairs = [&](size_t count, const std::vector<std::vector<size_t>>& assignment,
                        const std::string& key_prefix, LinkedCorpus* gold) {
    std::vector<ParallelPair> pairs;
    for (size_t i = 0; i < count; ++i) {
      auto draft = build_sentence(assignment.empty() ? std::vector<size_t>{} : assignment[i]);
      ParallelPair pair;
      pair.src_tokens = translate(draft);
      pair.tgt_tokens = draft.tokens;
      if (gold != nullptr) gold->add(key_prefix + std::to_string(i), draft.spans);
      pairs.push_back(std::move(pair));
    }
    return pairs;
  };
  auto fine_assign = assign(spec.train_pairs, [](const PlantedEntity& p) { return p.finetune; });
  auto test_assign = assign(spec.test_pairs, [](const PlantedEntity& p) { return p.test; });
  world.train = make_pairs(spec.train_pairs, fine_assign, "train-", &world.finetune_links);
  world.dev = make_pairs(spec.dev_pairs, {}, "dev-", nullptr);
  world.test = make_pairs(spec.test_pairs, test_assign, "test-", &world.test_links);

  // --- vocabulary: reserved header, then shared prefixes, then characters ---
  std::set<std::string> chars;
  auto collect = [&](const std::vector<std::string>& tokens) {
    for (const auto& tok : tokens) {
      size_t i = 0;
      while (i < tok.size()) {
        size_t len = std::min(tok.size() - i, utf8_len(static_cast<unsigned char>(tok[i])));
        chars.insert(tok.substr(i, len));
        i += len;
      }
    }
  };
  for (size_t i = 0; i < n; ++i) {
    collect(forms[i].tgt_canonical);
    collect(forms[i].tgt_alias);
    collect(forms[i].src_canonical);
  }
  collect(tgt_fillers);
  collect(src_fillers);
  std::vector<std::string> vocab_entries = reserved_symbols();
  for (const char* prefix : {"Кс", "Мт", "Ал", "но", "Ent", "Co", "wo"}) {
    vocab_entries.emplace_back(prefix);
  }
  vocab_entries.insert(vocab_entries.end(), chars.begin(), chars.end());
  world.vocab = SubwordVocab::from_entries(vocab_entries);

  // --- ground-truth lexicon: what the pretraining corpus can teach ---
  for (size_t i = 0; i < n; ++i) {
    if (world.plants[i].pretrain == 0 || forms[i].src_canonical.empty()) continue;
    world.lexicon.emplace(join(forms[i].src_canonical), join(forms[i].tgt_canonical));
  }
  return world;
}

// Writes every artifact of the world in the formats the pipeline consumes,
// plus the ground-truth sidecar world.json.
inline void save_world(const World& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_kb(world.kb, dir / "kb.jsonl");
  world.vocab.save(dir / "vocab.txt");
  save_documents(world.pretrain_docs, dir / "pretrain.docs.jsonl");
  save_links(world.pretrain_links, dir / "pretrain.gold_links.jsonl");
  save_parallel(world.train, dir / "train.pairs.jsonl");
  save_parallel(world.dev, dir / "dev.pairs.jsonl");
  save_parallel(world.test, dir / "test.pairs.jsonl");
  save_links(world.finetune_links, dir / "finetune.gold_links.jsonl");
  save_links(world.test_links, dir / "test.gold_links.jsonl");
  {
    AtomicWriter src_out(dir / "test.src.txt");
    AtomicWriter ref_out(dir / "test.ref.txt");
    for (const auto& pair : world.test) {
      src_out.write_line(join(pair.src_tokens));
      ref_out.write_line(join(pair.tgt_tokens));
    }
    src_out.commit();
    ref_out.commit();
  }
  json groups = json::object();
  for (const auto& [id, g] : world.groups) groups[id] = entity_group_name(g);
  json plants = json::object();
  for (const auto& p : world.plants) {
    plants[p.id] = json{{"pretrain", p.pretrain}, {"finetune", p.finetune}, {"test", p.test}};
  }
  json lexicon = json::array();
  for (const auto& [src, tgt] : world.lexicon) lexicon.push_back(json::array({src, tgt}));
  json sidecar{{"languages", json{{"src", world.spec.src_lang}, {"tgt", world.spec.tgt_lang}}},
               {"seed", world.spec.seed},
               {"groups", groups},
               {"plants", plants},
               {"lexicon", lexicon}};
  AtomicWriter out(dir / "world.json");
  out.stream() << sidecar.dump(2) << '\n';
  out.commit();
}

// Reads replaced-span metadata out of DEEP pairs and emits the
// (source surface, target surface) pairs they encode.
inline std::set<std::pair<std::string, std::string>> induce_lexicon(
    const std::vector<NoisedPair>& pairs) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& p : pairs) {
    if (p.task != Task::DEEP) {
      throw Error("induce_lexicon: pair for segment '" + p.segment_id +
                  "' has no replacement metadata (task " + task_name(p.task) + ")");
    }
    for (const auto& r : p.replaced) {
      if (r.src_end > p.src.size() || r.src_start >= r.src_end || r.tgt_end > p.tgt.size() ||
          r.tgt_start >= r.tgt_end) {
        throw Error("induce_lexicon: replacement span out of bounds in segment " + p.segment_id);
      }
      out.emplace(join(p.src.begin() + static_cast<ptrdiff_t>(r.src_start),
                       p.src.begin() + static_cast<ptrdiff_t>(r.src_end)),
                  join(p.tgt.begin() + static_cast<ptrdiff_t>(r.tgt_start),
                       p.tgt.begin() + static_cast<ptrdiff_t>(r.tgt_end)));
    }
  }
  return out;
}

inline std::set<std::pair<std::string, std::string>> induce_lexicon(
    const std::vector<NoisedExample>& examples) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& ex : examples) {
    if (ex.task != Task::DEEP) {
      throw Error("induce_lexicon: pair for segment '" + ex.segment_id +
                  "' has no replacement metadata (task " + task_name(ex.task) + ")");
    }
    const auto src = ex.src_flat();
    for (const auto& r : ex.replaced) {
      out.emplace(join(src.begin() + static_cast<ptrdiff_t>(r.src_start),
                       src.begin() + static_cast<ptrdiff_t>(r.src_end)),
                  r.tgt_surface);
    }
  }
  return out;
}

// --- WorldSpec <-> JSON (the "synth" section of a pipeline config) ---

inline WorldSpec world_spec_from_json(const json& obj) {
  WorldSpec spec;
  if (obj.contains("seed")) spec.seed = obj["seed"].get<uint64_t>();
  spec.src_lang = obj.value("src_lang", spec.src_lang);
  spec.tgt_lang = obj.value("tgt_lang", spec.tgt_lang);
  spec.groups.pft = obj.value("pft", spec.groups.pft);
  spec.groups.pt = obj.value("pt", spec.groups.pt);
  spec.groups.ft = obj.value("ft", spec.groups.ft);
  spec.groups.test_only = obj.value("test_only", spec.groups.test_only);
  auto range = [&](const char* key, FreqRange def) {
    if (!obj.contains(key)) return def;
    const auto& r = obj[key];
    return FreqRange{r.at(0).get<size_t>(), r.at(1).get<size_t>()};
  };
  spec.pretrain_freq = range("pretrain_freq", spec.pretrain_freq);
  spec.finetune_freq = range("finetune_freq", spec.finetune_freq);
  spec.test_freq = range("test_freq", spec.test_freq);
  spec.pretrain_docs = obj.value("pretrain_docs", spec.pretrain_docs);
  spec.sentences_per_doc = obj.value("sentences_per_doc", spec.sentences_per_doc);
  spec.train_pairs = obj.value("train_pairs", spec.train_pairs);
  spec.dev_pairs = obj.value("dev_pairs", spec.dev_pairs);
  spec.test_pairs = obj.value("test_pairs", spec.test_pairs);
  spec.filler_words = obj.value("filler_words", spec.filler_words);
  spec.min_sentence_words = obj.value("min_sentence_words", spec.min_sentence_words);
  spec.max_sentence_words = obj.value("max_sentence_words", spec.max_sentence_words);
  spec.multi_token_every = obj.value("multi_token_every", spec.multi_token_every);
  spec.alias_every = obj.value("alias_every", spec.alias_every);
  spec.unsourced_every = obj.value("unsourced_every", spec.unsourced_every);
  return spec;
}

}  // namespace deep
