#include "topicmark/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "topicmark/error.hpp"
#include "topicmark/ngram.hpp"

namespace topicmark {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::vector<fs::path> ExperimentManifest::artifacts() const {
  std::vector<fs::path> out{vocab, embeddings, partition, model, prompts, clean};
  if (resources) out.push_back(*resources);
  if (paraphrases) out.push_back(*paraphrases);
  return out;
}

namespace {

fs::path resolve(const fs::path& base, const json& j, const char* key) {
  if (!j.contains(key)) throw Error(std::string("manifest is missing \"") + key + "\"");
  fs::path p = j.at(key).get<std::string>();
  return p.is_absolute() ? p : base / p;
}

DetectorConfig parse_detector(const json& d) {
  DetectorConfig c;
  c.scheme = parse_scheme(d.at("scheme").get<std::string>());
  c.threshold = d.value("threshold", kDefaultThreshold);
  c.window = d.value("window", kDefaultWindow);
  if (c.window == 0) throw Error("detector window must be positive");
  return c;
}

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// Stable, unique labels for the configured detectors.
std::vector<std::string> detector_labels(const std::vector<DetectorConfig>& detectors) {
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    std::string l = to_string(detectors[i].scheme);
    if (detectors[i].scheme == Scheme::sliding) l += ":w" + std::to_string(detectors[i].window);
    if (seen[l]++ > 0) l += "#" + std::to_string(i);
    labels.push_back(std::move(l));
  }
  return labels;
}

json number_or_string(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

ordered_json summary_json(const Summary& s) {
  return ordered_json{{"mean", number_or_string(s.mean)}, {"sd", number_or_string(s.sd)}, {"count", s.count}};
}

}  // namespace

ExperimentManifest parse_manifest(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw Error("manifest must be a JSON object");
  ExperimentManifest m;
  try {
    m.vocab = resolve(base_dir, j, "vocab");
    m.embeddings = resolve(base_dir, j, "embeddings");
    m.partition = resolve(base_dir, j, "partition");
    m.model = resolve(base_dir, j, "model");
    m.prompts = resolve(base_dir, j, "prompts");
    m.clean = resolve(base_dir, j, "clean");
    if (j.contains("resources")) m.resources = resolve(base_dir, j, "resources");
    if (j.contains("paraphrases")) m.paraphrases = resolve(base_dir, j, "paraphrases");
    if (j.contains("limit")) m.limit = j.at("limit").get<std::size_t>();
    if (j.contains("generation")) {
      const auto& g = j.at("generation");
      m.generation.delta = g.value("delta", m.generation.delta);
      if (g.contains("sampler")) m.generation.sampler = SamplerConfig::parse(g.at("sampler").get<std::string>());
      m.generation.max_tokens = g.value("max_tokens", m.generation.max_tokens);
      m.generation.length_tolerance = g.value("tolerance", m.generation.length_tolerance);
      m.generation.seed = g.value("seed", m.generation.seed);
      m.cache_weight = g.value("cache_weight", m.cache_weight);
      m.cache_window = g.value("cache_window", m.cache_window);
    }
    if (j.contains("attacks")) {
      for (const auto& a : j.at("attacks")) {
        AttackSpec s;
        s.mode = parse_perturb_mode(a.value("mode", "random"));
        s.percent = a.at("percent").get<double>();
        s.seed = a.value("seed", std::uint64_t{0});
        s.name = a.value("name", std::string(to_string(s.mode)) + "-" + format_double(s.percent));
        m.attacks.push_back(std::move(s));
      }
    }
    if (j.contains("detectors")) {
      m.detectors.clear();
      for (const auto& d : j.at("detectors")) m.detectors.push_back(parse_detector(d));
      if (m.detectors.empty()) throw Error("manifest lists no detectors");
    }
    if (j.contains("metrics")) {
      const auto& mt = j.at("metrics");
      if (mt.contains("fpr_levels")) m.fpr_levels = mt.at("fpr_levels").get<std::vector<double>>();
      const std::string conv = mt.value("tpr_convention", "conservative");
      if (conv == "conservative") {
        m.tpr_convention = TprConvention::conservative;
      } else if (conv == "interpolate") {
        m.tpr_convention = TprConvention::interpolate;
      } else {
        throw Error("unknown tpr_convention '" + conv + "'");
      }
    }
    if (j.contains("degradation")) {
      const auto& d = j.at("degradation");
      DegradationSpec s;
      if (d.contains("levels")) s.levels = d.at("levels").get<std::vector<double>>();
      s.trials = d.value("trials", s.trials);
      if (d.contains("modes")) {
        s.modes.clear();
        for (const auto& mode : d.at("modes")) s.modes.push_back(parse_perturb_mode(mode.get<std::string>()));
      }
      s.detector.scheme = parse_scheme(d.value("scheme", "max-z"));
      s.detector.threshold = d.value("threshold", kDefaultThreshold);
      s.detector.window = d.value("window", kDefaultWindow);
      s.samples = d.value("samples", s.samples);
      s.seed = d.value("seed", s.seed);
      m.degradation = std::move(s);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("bad manifest field: ") + e.what());
  }
  if ((!m.attacks.empty() || m.degradation) && !m.resources) {
    throw Error("attacks and degradation sweeps need \"resources\"");
  }
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string raw_record_json(const RawRecord& r) {
  ordered_json j{{"group", r.group},
                 {"detector", r.detector},
                 {"doc", r.doc},
                 {"label", r.label == Label::watermarked ? "watermarked" : "clean"},
                 {"z", r.z},
                 {"verdict", r.verdict},
                 {"topic", r.topic},
                 {"green", r.green},
                 {"scored", r.scored},
                 {"gamma", r.gamma}};
  return j.dump();
}

RawRecord parse_raw_record(const std::string& line) {
  const json j = json::parse(line);
  RawRecord r;
  r.group = j.at("group").get<std::string>();
  r.detector = j.at("detector").get<std::string>();
  r.doc = j.at("doc").get<std::string>();
  r.label = j.at("label").get<std::string>() == "watermarked" ? Label::watermarked : Label::clean;
  r.z = j.at("z").get<double>();
  r.verdict = j.at("verdict").get<bool>();
  r.topic = j.at("topic").get<std::size_t>();
  r.green = j.at("green").get<std::size_t>();
  r.scored = j.at("scored").get<std::size_t>();
  r.gamma = j.at("gamma").get<double>();
  return r;
}

std::vector<MetricsReport> aggregate_raw(const std::vector<RawRecord>& raw,
                                         const std::vector<DetectorConfig>& detectors,
                                         const std::vector<double>& fpr_levels,
                                         TprConvention convention) {
  const auto labels = detector_labels(detectors);
  std::map<std::string, double> threshold_of;
  for (std::size_t i = 0; i < labels.size(); ++i) threshold_of[labels[i]] = detectors[i].threshold;

  std::vector<std::string> order;
  std::map<std::string, ScoredCorpus> corpora;
  for (const auto& r : raw) {
    const std::string key = r.group + "/" + r.detector;
    auto [it, inserted] = corpora.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back({r.doc, r.z, r.label});
  }
  std::vector<MetricsReport> reports;
  for (const auto& key : order) {
    const std::string det = key.substr(key.find('/') + 1);
    auto th = threshold_of.find(det);
    if (th == threshold_of.end()) throw Error("raw log names unknown detector '" + det + "'");
    auto rep = compute_metrics(corpora[key], th->second, fpr_levels, convention);
    rep.group = key;
    reports.push_back(std::move(rep));
  }
  return reports;
}

ExperimentResult run_experiment(const ExperimentManifest& m, const std::optional<fs::path>& out_dir,
                                bool plot) {
  std::vector<std::string> missing;
  for (const auto& p : m.artifacts()) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) {
    std::string msg = "missing experiment artifact(s):";
    for (const auto& p : missing) msg += " " + p;
    throw LoadError(msg);
  }

  const Vocabulary vocab = load_vocabulary_file(m.vocab.string());
  const EmbeddingTable embeddings =
      load_embeddings_file(m.embeddings.string(), guess_embedding_format(m.embeddings.string()));
  const TopicPartition partition = load_partition_file(m.partition.string(), &vocab);
  NGramModel model = load_ngram_file(m.model.string());
  if (model.vocab().fingerprint() != vocab.fingerprint()) {
    throw Error("model vocabulary " + fingerprint_hex(model.vocab().fingerprint()) +
                " does not match " + fingerprint_hex(vocab.fingerprint()));
  }
  auto prompts = read_documents_file(m.prompts.string());
  auto clean = read_documents_file(m.clean.string());
  if (m.limit) {
    prompts.resize(std::min(prompts.size(), *m.limit));
    clean.resize(std::min(clean.size(), *m.limit));
  }
  if (prompts.empty() || clean.empty()) throw Error("experiment needs prompts and clean documents");
  std::optional<LexicalResources> resources;
  if (m.resources) resources = LexicalResources::load_dir(m.resources->string());

  const auto& policy = partition.subwords();
  const StopWords& stop = resources ? resources->stop_words : StopWords::english();

  CacheMixture cached(model, m.cache_weight, m.cache_window, content_token_mask(vocab, stop));
  LogitProvider& provider = m.cache_weight > 0.0 ? static_cast<LogitProvider&>(cached) : model;

  // Watermarked generations, one per prompt.
  std::vector<std::vector<TokenId>> watermarked;
  std::vector<std::size_t> topics;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto choice = choose_topic_for_text(prompts[i].text, embeddings, stop, partition.topics(),
                                              InferenceMethod::automatic, 0);
    GenerationConfig cfg = m.generation;
    cfg.seed = derive_seed(m.generation.seed, i);
    const auto prompt_ids = tokenize(prompts[i].text, vocab, policy).ids;
    watermarked.push_back(generate(provider, partition, choice, cfg, prompt_ids).tokens);
    topics.push_back(choice.topic_index);
  }
  std::map<std::string, std::size_t> topic_by_id;
  for (std::size_t i = 0; i < prompts.size(); ++i) topic_by_id[prompts[i].id] = topics[i];

  std::vector<std::vector<TokenId>> clean_ids;
  std::vector<std::size_t> clean_topics;
  for (const auto& d : clean) {
    clean_ids.push_back(tokenize(d.text, vocab, policy).ids);
    auto it = topic_by_id.find(d.id);
    clean_topics.push_back(it == topic_by_id.end() ? 0 : it->second);
  }

  // Document groups: unattacked, each attack, and external paraphrases.
  struct Group {
    std::string name;
    std::vector<std::string> ids;
    std::vector<std::vector<TokenId>> tokens;
    std::vector<std::size_t> topics;
  };
  std::vector<Group> groups;
  {
    Group g{"none", {}, watermarked, topics};
    for (const auto& p : prompts) g.ids.push_back(p.id);
    groups.push_back(std::move(g));
  }
  for (const auto& a : m.attacks) {
    Group g{a.name, groups.front().ids, {}, topics};
    for (std::size_t i = 0; i < watermarked.size(); ++i) {
      const auto words = split_words(detokenize(watermarked[i], vocab, policy));
      const auto plan = PerturbationPlan::make(a.percent, words.size(), a.mode, derive_seed(a.seed, i));
      g.tokens.push_back(tokenize_words(perturb(words, plan, *resources).words, vocab, policy).ids);
    }
    groups.push_back(std::move(g));
  }
  if (m.paraphrases) {
    std::vector<Document> originals;
    for (std::size_t i = 0; i < watermarked.size(); ++i) {
      originals.push_back({prompts[i].id, detokenize(watermarked[i], vocab, policy)});
    }
    std::vector<Document> rewritten;
    for (auto& d : read_documents_file(m.paraphrases->string())) {
      if (topic_by_id.count(d.id)) rewritten.push_back(std::move(d));
    }
    const auto corpus = ingest_paraphrases(originals, rewritten, vocab, policy);
    Group g{"paraphrase", {}, {}, {}};
    for (const auto& pair : corpus.pairs) {
      g.ids.push_back(pair.id);
      g.tokens.push_back(pair.paraphrased);
      g.topics.push_back(topic_by_id.at(pair.id));
    }
    groups.push_back(std::move(g));
  }

  DetectorContext ctx;
  ctx.partition = &partition;
  ctx.vocab = &vocab;
  ctx.embeddings = &embeddings;
  ctx.stop_words = &stop;

  ExperimentResult result;
  const auto labels = detector_labels(m.detectors);
  for (const auto& g : groups) {
    for (std::size_t d = 0; d < m.detectors.size(); ++d) {
      auto score = [&](const std::string& id, const std::vector<TokenId>& toks, std::size_t topic,
                       Label label) {
        const auto rep = run_detector(toks, ctx, m.detectors[d], topic);
        result.raw.push_back({g.name, labels[d], id, label, rep.z, rep.verdict, rep.topic_index,
                              rep.green, rep.scored, rep.gamma_used});
      };
      for (std::size_t i = 0; i < g.tokens.size(); ++i) score(g.ids[i], g.tokens[i], g.topics[i], Label::watermarked);
      for (std::size_t i = 0; i < clean_ids.size(); ++i) score(clean[i].id, clean_ids[i], clean_topics[i], Label::clean);
    }
  }
  result.reports = aggregate_raw(result.raw, m.detectors, m.fpr_levels, m.tpr_convention);

  if (m.degradation) {
    const auto& spec = *m.degradation;
    const std::size_t n = std::min(spec.samples, watermarked.size());
    const std::vector<std::vector<TokenId>> samples(watermarked.begin(), watermarked.begin() + static_cast<std::ptrdiff_t>(n));
    const std::vector<std::size_t> oracle(topics.begin(), topics.begin() + static_cast<std::ptrdiff_t>(n));
    for (const auto mode : spec.modes) {
      DegradationOptions opt;
      opt.levels = spec.levels;
      opt.trials = spec.trials;
      opt.mode = mode;
      opt.seed = spec.seed;
      result.degradation.emplace_back(to_string(mode),
                                      degradation_curve(samples, ctx, spec.detector, *resources, opt, oracle));
    }
  }

  if (out_dir) {
    fs::create_directories(*out_dir);
    {
      std::ofstream out(*out_dir / "metrics.json");
      out << metrics_json(result) << '\n';
    }
    {
      std::ofstream out(*out_dir / "raw.jsonl");
      for (const auto& r : result.raw) out << raw_record_json(r) << '\n';
    }
    if (plot) {
      std::ofstream roc(*out_dir / "roc.csv");
      roc << "group,threshold,fpr,tpr\n";
      std::map<std::string, ScoredCorpus> corpora;
      for (const auto& r : result.raw) corpora[r.group + "/" + r.detector].push_back({r.doc, r.z, r.label});
      for (const auto& rep : result.reports) {
        const auto& c = corpora[rep.group];
        std::set<double> scores;
        for (const auto& d : c) scores.insert(d.score);
        const auto all = rates_at(c, -std::numeric_limits<double>::infinity());
        roc << rep.group << ",-inf," << format_double(all.fpr) << ',' << format_double(all.tpr) << '\n';
        for (double s : scores) {
          const auto r = rates_at(c, s);
          roc << rep.group << ',' << format_double(s) << ',' << format_double(r.fpr) << ','
              << format_double(r.tpr) << '\n';
        }
      }
      std::ofstream deg(*out_dir / "degradation.csv");
      deg << "mode,percent,mean_z,verdict_rate\n";
      for (const auto& [mode, curve] : result.degradation) {
        for (const auto& l : curve.levels) {
          deg << mode << ',' << format_double(l.percent) << ',' << format_double(l.mean_z) << ','
              << format_double(l.verdict_rate) << '\n';
        }
      }
    }
  }
  return result;
}

std::string metrics_json(const ExperimentResult& result) {
  ordered_json reports = ordered_json::array();
  for (const auto& r : result.reports) {
    ordered_json tpr = ordered_json::object();
    for (const auto& [level, value] : r.tpr_at) tpr[format_double(level)] = value;
    reports.push_back(ordered_json{{"group", r.group},
                                   {"n_watermarked", r.n_watermarked},
                                   {"n_clean", r.n_clean},
                                   {"roc_auc", r.roc_auc},
                                   {"best_f1", r.best_f1},
                                   {"best_f1_threshold", number_or_string(r.best_f1_threshold)},
                                   {"tpr_at_fpr", tpr},
                                   {"threshold", r.threshold},
                                   {"fpr_at_threshold", r.fpr_at_threshold},
                                   {"tpr_at_threshold", r.tpr_at_threshold},
                                   {"z_watermarked", summary_json(r.z_watermarked)},
                                   {"z_clean", summary_json(r.z_clean)}});
  }
  ordered_json out{{"reports", reports}};
  if (!result.degradation.empty()) {
    ordered_json deg = ordered_json::object();
    for (const auto& [mode, curve] : result.degradation) {
      ordered_json levels = ordered_json::array();
      for (const auto& l : curve.levels) {
        levels.push_back(ordered_json{{"percent", l.percent}, {"mean_z", l.mean_z}, {"verdict_rate", l.verdict_rate}});
      }
      deg[mode] = levels;
    }
    out["degradation"] = deg;
  }
  return out.dump(2);
}

}  // namespace topicmark
