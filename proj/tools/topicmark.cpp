// topicmark: command-line front end for partitioning, generation, detection,
// attacks and batch evaluation.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topicmark/attack.hpp"
#include "topicmark/detector.hpp"
#include "topicmark/embedding_store.hpp"
#include "topicmark/eval.hpp"
#include "topicmark/experiment.hpp"
#include "topicmark/generator.hpp"
#include "topicmark/ngram.hpp"
#include "topicmark/synthetic.hpp"
#include "topicmark/topic_inference.hpp"
#include "topicmark/topic_partition.hpp"
#ifdef TOPICMARK_WITH_BRIDGE
#include "topicmark/bridge.hpp"
#endif

using namespace topicmark;

namespace {

SubwordPolicy make_policy(const std::string& marker, const std::string& kind) {
  SubwordPolicy p;
  p.marker = marker;
  if (kind == "continuation") {
    p.kind = SubwordPolicy::Kind::continuation;
  } else if (kind == "word-start") {
    p.kind = SubwordPolicy::Kind::word_start;
  } else {
    throw Error("subword kind must be 'continuation' or 'word-start'");
  }
  return p;
}

EmbeddingTable load_table(const std::string& path, bool lowercase) {
  return load_embeddings_file(path, guess_embedding_format(path),
                              lowercase ? CasefoldPolicy::lowercase : CasefoldPolicy::exact);
}

std::string read_all(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Documents as `id<TAB>text` lines; lines without a tab get their line number as id.
std::vector<Document> read_docs(const std::string& path) {
  std::istringstream in(read_all(path));
  std::vector<Document> docs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      docs.push_back({std::to_string(n), line});
    } else {
      docs.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
  }
  return docs;
}

std::optional<std::size_t> topic_index(const TopicPartition& p, const std::string& name) {
  if (name.empty()) return std::nullopt;
  auto idx = p.topics().find(name);
  if (!idx) throw Error("partition has no topic named '" + name + "'");
  return idx;
}

void print_report(const std::string& id, const DetectionReport& r, const TopicPartition& p, bool json) {
  const std::string& topic = p.topics()[r.topic_index].name;
  if (json) {
    std::cout << "{\"id\":\"" << id << "\",\"scheme\":\"" << to_string(r.scheme) << "\",\"topic\":\""
              << topic << "\",\"z\":" << std::setprecision(17) << r.z << ",\"green\":" << r.green
              << ",\"scored\":" << r.scored << ",\"gamma\":" << r.gamma_used
              << ",\"verdict\":" << (r.verdict ? "true" : "false")
              << ",\"fell_back_to_max_z\":" << (r.fell_back_to_max_z ? "true" : "false") << "}\n";
  } else {
    std::cout << id << '\t' << topic << "\tz=" << std::fixed << std::setprecision(3) << r.z
              << "\tg=" << r.green << "/" << r.scored << '\t'
              << (r.verdict ? "watermarked" : "not-watermarked")
              << (r.fell_back_to_max_z ? "\t(fallback: max-z)" : "") << '\n'
              << std::defaultfloat;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-aligned text watermarking toolkit"};
  app.require_subcommand(1);

  // --- synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic world (vocabulary, embeddings, corpus, resources)");
  std::string synth_out;
  SyntheticOptions synth_opt;
  std::size_t synth_k = 4;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_opt.seed, "World seed");
  synth->add_option("--corpus-bytes", synth_opt.corpus_bytes, "Minimum training corpus size");
  synth->add_option("--heldout", synth_opt.heldout_docs, "Held-out prompt/continuation pairs");
  synth->add_option("--topic-rate", synth_opt.topic_rate, "Share of content slots filled with topic words");
  synth->add_option("--k", synth_k, "Topics written to topics.txt");

  // --- embeddings inspect
  auto* emb = app.add_subcommand("embeddings", "Embedding table utilities");
  auto* inspect = emb->add_subcommand("inspect", "Summarize a table, optionally compare two words");
  std::string emb_path;
  std::vector<std::string> emb_words;
  bool emb_lower = false;
  inspect->add_option("--embeddings", emb_path, "Embedding file (.vec or .tsv)")->required();
  inspect->add_option("--word", emb_words, "Words to look up (two words print their cosine)");
  inspect->add_flag("--lowercase", emb_lower, "Case-fold keys");
  emb->require_subcommand(1);

  // --- partition
  auto* part = app.add_subcommand("partition", "Build topic-aligned green lists");
  std::string p_vocab, p_emb, p_topics, p_out, p_marker = "##", p_kind = "continuation";
  PartitionOptions p_opt;
  bool p_lower = false;
  part->add_option("--vocab", p_vocab, "Vocabulary, one token per line")->required();
  part->add_option("--embeddings", p_emb, "Embedding file")->required();
  part->add_option("--topics", p_topics, "Topic names, one per line")->required();
  part->add_option("--tau", p_opt.tau, "Similarity threshold");
  part->add_option("--out", p_out, "Output partition file")->required();
  part->add_option("--marker", p_marker, "Subword marker ('' for whole-word vocabularies)");
  part->add_option("--subword-kind", p_kind, "continuation | word-start");
  part->add_option("--threads", p_opt.threads, "Worker threads (0 = all cores)");
  part->add_flag("--lowercase", p_lower, "Case-fold embedding keys");

  auto* pinfo = app.add_subcommand("partition-info", "Print list sizes and residual share of a partition");
  std::string pi_path;
  pinfo->add_option("partition", pi_path, "Partition file")->required();

  // --- topics
  auto* topics = app.add_subcommand("topics", "Extract keywords and choose a topic for a text");
  std::string t_emb, t_part, t_text, t_file, t_method = "auto";
  std::size_t t_max = 5;
  topics->add_option("--embeddings", t_emb, "Embedding file")->required();
  topics->add_option("--partition", t_part, "Partition whose topics to choose from")->required();
  topics->add_option("--text", t_text, "Text to analyse");
  topics->add_option("--file", t_file, "File holding the text");
  topics->add_option("--method", t_method, "auto | embedding-average | kmeans");
  topics->add_option("--max-keywords", t_max, "Keywords to extract");

  // --- train
  auto* train = app.add_subcommand("train", "Train an n-gram logit provider");
  std::string tr_vocab, tr_corpus, tr_out;
  std::size_t tr_order = 3;
  double tr_alpha = 0.005;
  train->add_option("--vocab", tr_vocab, "Vocabulary")->required();
  train->add_option("--corpus", tr_corpus, "Training text")->required();
  train->add_option("--order", tr_order, "Model order");
  train->add_option("--alpha", tr_alpha, "Additive smoothing constant");
  train->add_option("--out", tr_out, "Output model file")->required();

  // --- generate
  auto* gen = app.add_subcommand("generate", "Generate (watermarked) text from a prompt");
  std::string g_model, g_part, g_emb, g_prompt, g_topic, g_sampler = "top-k:50", g_trace, g_provider, g_vocab;
  GenerationConfig g_cfg;
  bool g_plain = false;
  double g_cache = 0.0;
  gen->add_option("--model", g_model, "n-gram model file");
  gen->add_option("--provider", g_provider, "Remote provider: stdio:<command> or tcp:host:port");
  gen->add_option("--vocab", g_vocab, "Vocabulary (required with --provider)");
  gen->add_option("--partition", g_part, "Partition file")->required();
  gen->add_option("--embeddings", g_emb, "Embedding file (for prompt topic inference)");
  gen->add_option("--prompt", g_prompt, "Prompt text")->required();
  gen->add_option("--topic", g_topic, "Force the green list by topic name");
  gen->add_option("--delta", g_cfg.delta, "Logit bias");
  gen->add_option("--max-tokens", g_cfg.max_tokens, "Tokens to generate");
  gen->add_option("--sampler", g_sampler, "greedy | top-k:K | temperature:T (comma-joined)");
  gen->add_option("--seed", g_cfg.seed, "Sampling seed");
  gen->add_option("--trace", g_trace, "Write a per-step JSONL trace here");
  gen->add_flag("--unwatermarked", g_plain, "Skip the bias step");
  gen->add_option("--cache-weight", g_cache, "Mix in a cache model over recent content words");

  // --- detect
  auto* det = app.add_subcommand("detect", "Score documents for the watermark");
  std::string d_part, d_vocab, d_emb, d_in, d_scheme = "max-z", d_topic;
  DetectorConfig d_cfg;
  bool d_json = false;
  det->add_option("--partition", d_part, "Partition file")->required();
  det->add_option("--vocab", d_vocab, "Vocabulary")->required();
  det->add_option("--embeddings", d_emb, "Embedding file (needed by topic-aware schemes)");
  det->add_option("--in", d_in, "Documents, one per line (id<TAB>text allowed); '-' for stdin")->required();
  det->add_option("--scheme", d_scheme, "strict-embed | strict-kmeans | sliding | max-z | oracle");
  det->add_option("--threshold", d_cfg.threshold, "z threshold");
  det->add_option("--window", d_cfg.window, "Sliding window length");
  det->add_option("--topic", d_topic, "Topic name for the oracle scheme");
  det->add_flag("--json", d_json, "JSON lines output");

  // --- attack
  auto* atk = app.add_subcommand("attack", "Apply insertion/deletion/substitution edits");
  std::string a_res, a_in, a_mode = "random";
  double a_percent = 10;
  std::uint64_t a_seed = 0;
  atk->add_option("--resources", a_res, "Lexical resources directory")->required();
  atk->add_option("--in", a_in, "Documents (id<TAB>text); '-' for stdin")->required();
  atk->add_option("--mode", a_mode, "random | targeted");
  atk->add_option("--percent", a_percent, "Edit budget as a percentage of words");
  atk->add_option("--seed", a_seed, "Seed");

  // --- eval
  auto* ev = app.add_subcommand("eval", "Run an experiment manifest");
  std::string e_manifest, e_out;
  bool e_plot = false;
  ev->add_option("--manifest", e_manifest, "Experiment manifest (JSON)")->required();
  ev->add_option("--out", e_out, "Output directory")->required();
  ev->add_flag("--plot", e_plot, "Also write roc.csv and degradation.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto world = make_synthetic_world(synth_opt);
      world.save(synth_out, synth_k);
      std::cout << "wrote " << synth_out << ": " << world.vocab.size() << " tokens, "
                << world.corpus.size() << " corpus bytes, " << world.prompts.size()
                << " held-out documents\n";
    } else if (*inspect) {
      const auto table = load_table(emb_path, emb_lower);
      std::cout << "rows " << table.size() << "\ndim " << table.dim() << "\nduplicates "
                << table.duplicates() << '\n';
      for (const auto& w : emb_words) std::cout << w << '\t' << (table.contains(w) ? "present" : "absent") << '\n';
      if (emb_words.size() == 2 && table.contains(emb_words[0]) && table.contains(emb_words[1])) {
        std::cout << "cosine " << std::setprecision(17)
                  << cosine(*table.find(emb_words[0]), *table.find(emb_words[1])) << '\n';
      }
    } else if (*part) {
      const auto vocab = load_vocabulary_file(p_vocab);
      const auto table = load_table(p_emb, p_lower);
      const auto set = make_topic_set(load_topic_names_file(p_topics), table);
      p_opt.subwords = make_policy(p_marker, p_kind);
      std::vector<std::string> warnings;
      const auto partition = build_partition(vocab, table, set, p_opt, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      save_partition_file(partition, p_out);
      const auto stats = partition_stats(partition);
      for (std::size_t i = 0; i < stats.sizes.size(); ++i) {
        std::cout << set[i].name << '\t' << stats.sizes[i] << "\tgamma=" << stats.gamma[i] << '\n';
      }
      std::cout << "residual\t" << stats.residual_count << '\t' << stats.residual_fraction << '\n';
    } else if (*pinfo) {
      const auto p = load_partition_file(pi_path);
      const auto stats = partition_stats(p);
      std::cout << "tau " << p.tau() << "\nvocab " << p.vocab_size() << "\nfingerprint "
                << fingerprint_hex(p.vocab_fingerprint()) << '\n';
      for (std::size_t i = 0; i < stats.sizes.size(); ++i) {
        std::cout << p.topics()[i].name << '\t' << stats.sizes[i] << "\tgamma=" << stats.gamma[i] << '\n';
      }
      std::cout << "residual\t" << stats.residual_count << '\t' << stats.residual_fraction << '\n';
    } else if (*topics) {
      if (t_text.empty() == t_file.empty()) throw Error("give exactly one of --text or --file");
      const std::string text = t_file.empty() ? t_text : read_all(t_file);
      const auto table = load_table(t_emb, false);
      const auto p = load_partition_file(t_part);
      const auto detected = extract_keywords(text, table, StopWords::english(), t_max);
      for (const auto& k : detected.keywords) std::cout << k.term << '\t' << k.relevance << '\n';
      const auto choice = choose_topic(detected, p.topics(), parse_inference_method(t_method));
      std::cout << "topic\t" << p.topics()[choice.topic_index].name << "\nmethod\t"
                << to_string(choice.method) << "\nscore\t" << choice.score << '\n';
    } else if (*train) {
      std::ifstream corpus(tr_corpus);
      if (!corpus) throw LoadError("cannot open corpus " + tr_corpus);
      const auto model = train_ngram(corpus, tr_order, tr_alpha, load_vocabulary_file(tr_vocab));
      save_ngram_file(model, tr_out);
      std::cout << "trained order-" << tr_order << " model on " << model.training_tokens() << " tokens\n";
    } else if (*gen) {
      g_cfg.sampler = SamplerConfig::parse(g_sampler);
      const auto partition = load_partition_file(g_part);
      std::unique_ptr<LogitProvider> provider;
      Vocabulary vocab;
      if (!g_provider.empty()) {
#ifdef TOPICMARK_WITH_BRIDGE
        if (g_vocab.empty()) throw Error("--provider needs --vocab");
        vocab = load_vocabulary_file(g_vocab);
        provider = std::make_unique<bridge::RemoteLogitProvider>(bridge::open_transport(g_provider),
                                                                 partition.vocab_size());
#else
        throw Error("this build has no bridge support");
#endif
      } else {
        if (g_model.empty()) throw Error("give --model or --provider");
        auto model = std::make_unique<NGramModel>(load_ngram_file(g_model));
        vocab = model->vocab();
        provider = std::move(model);
      }
      if (vocab.fingerprint() != partition.vocab_fingerprint()) {
        throw Error("partition was built for a different vocabulary");
      }
      std::unique_ptr<LogitProvider> cache;
      if (g_cache > 0.0) {
        cache = std::make_unique<CacheMixture>(*provider, g_cache, 200,
                                               content_token_mask(vocab, StopWords::english()));
      }
      LogitProvider& source = cache ? *cache : *provider;
      const auto prompt = tokenize(g_prompt, vocab, partition.subwords()).ids;
      GenerationResult result;
      if (g_plain) {
        result = generate_unwatermarked(source, g_cfg, prompt);
      } else {
        TopicChoice choice;
        if (auto forced = topic_index(partition, g_topic)) {
          choice.topic_index = *forced;
          choice.method = ChoiceMethod::direct_match;
        } else {
          if (g_emb.empty()) throw Error("prompt topic inference needs --embeddings (or pass --topic)");
          const auto table = load_table(g_emb, false);
          choice = choose_topic_for_text(g_prompt, table, StopWords::english(), partition.topics(),
                                         InferenceMethod::automatic, 0);
        }
        std::cerr << "green list: " << partition.topics()[choice.topic_index].name << " ("
                  << to_string(choice.method) << ")\n";
        result = generate(source, partition, choice, g_cfg, prompt);
      }
      std::cout << detokenize(result.tokens, vocab, partition.subwords()) << '\n';
      if (!g_trace.empty()) {
        std::ofstream trace(g_trace);
        result.trace.write_jsonl(trace);
      }
      if (result.trace.short_output) std::cerr << "warning: output shorter than requested\n";
    } else if (*det) {
      const auto vocab = load_vocabulary_file(d_vocab);
      const auto partition = load_partition_file(d_part, &vocab);
      std::optional<EmbeddingTable> table;
      if (!d_emb.empty()) table = load_table(d_emb, false);
      d_cfg.scheme = parse_scheme(d_scheme);
      const bool needs_table = d_cfg.scheme == Scheme::strict_embed ||
                               d_cfg.scheme == Scheme::strict_kmeans || d_cfg.scheme == Scheme::sliding;
      if (needs_table && !table) throw Error(std::string(to_string(d_cfg.scheme)) + " needs --embeddings");
      const auto oracle = topic_index(partition, d_topic);
      if (d_cfg.scheme == Scheme::oracle && !oracle) throw Error("the oracle scheme needs --topic");
      DetectorContext ctx;
      ctx.partition = &partition;
      ctx.vocab = &vocab;
      ctx.embeddings = table ? &*table : nullptr;
      for (const auto& d : read_docs(d_in)) {
        const auto ids = tokenize(d.text, vocab, partition.subwords()).ids;
        try {
          print_report(d.id, run_detector(ids, ctx, d_cfg, oracle), partition, d_json);
        } catch (const Error& e) {
          std::cerr << d.id << ": " << e.what() << '\n';
        }
      }
    } else if (*atk) {
      const auto res = LexicalResources::load_dir(a_res);
      const auto mode = parse_perturb_mode(a_mode);
      std::size_t i = 0;
      for (const auto& d : read_docs(a_in)) {
        const auto words = split_words(d.text);
        const auto plan = PerturbationPlan::make(a_percent, words.size(), mode, derive_seed(a_seed, i++));
        const auto out = perturb(words, plan, res);
        std::cout << d.id << '\t' << join_words(out.words) << '\n';
        if (out.fell_back_to_random) std::cerr << d.id << ": no targetable words, used random edits\n";
        if (out.edits_skipped) std::cerr << d.id << ": skipped " << out.edits_skipped << " edits\n";
      }
    } else if (*ev) {
      const auto manifest = load_manifest(e_manifest);
      const auto result = run_experiment(manifest, std::filesystem::path(e_out), e_plot);
      for (const auto& r : result.reports) {
        std::cout << r.group << "\tauc=" << r.roc_auc << "\tf1=" << r.best_f1
                  << "\ttpr@thr=" << r.tpr_at_threshold << "\tfpr@thr=" << r.fpr_at_threshold << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
