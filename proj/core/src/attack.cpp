#include "topicmark/attack.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "topicmark/error.hpp"
#include "topicmark/rng.hpp"

namespace topicmark {

const char* to_string(PerturbMode m) { return m == PerturbMode::random ? "random" : "targeted"; }

PerturbMode parse_perturb_mode(std::string_view s) {
  if (s == "random") return PerturbMode::random;
  if (s == "targeted") return PerturbMode::targeted;
  throw Error("unknown perturbation mode '" + std::string(s) + "'");
}

PerturbationPlan PerturbationPlan::make(double percent, std::size_t text_length, PerturbMode mode,
                                        std::uint64_t seed) {
  if (!(percent >= 0.0 && percent <= 100.0)) throw DomainError("percent must lie in [0, 100]");
  PerturbationPlan p;
  p.percent = percent;
  p.mode = mode;
  p.seed = seed;
  // The epsilon keeps values like 15 * 20 / 100 from flooring to 2.
  p.total_edits = static_cast<std::size_t>(
      std::floor(percent * static_cast<double>(text_length) / 100.0 + 1e-9));
  p.insertions = p.total_edits / 3;
  p.deletions = p.total_edits / 3;
  p.substitutions = p.total_edits - p.insertions - p.deletions;
  return p;
}

PosTag parse_pos_tag(std::string_view tag) {
  if (tag.empty()) return PosTag::other;
  switch (tag.front()) {
    case 'N': case 'n': return PosTag::noun;
    case 'V': case 'v': return PosTag::verb;
    case 'J': case 'j': return PosTag::adjective;
    case 'R': case 'r': return PosTag::adverb;
    default: return PosTag::other;
  }
}

namespace {
const char* tag_letter(PosTag t) {
  switch (t) {
    case PosTag::noun: return "N";
    case PosTag::verb: return "V";
    case PosTag::adjective: return "J";
    case PosTag::adverb: return "R";
    case PosTag::other: return "O";
  }
  return "O";
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}
}  // namespace

PosTag LexicalResources::tag(std::string_view word) const {
  auto it = pos.find(std::string(word));
  return it == pos.end() ? PosTag::other : it->second;
}

bool LexicalResources::targetable(std::string_view word) const {
  return tag(word) != PosTag::other && !stop_words.contains(word);
}

LexicalResources LexicalResources::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LexicalResources r;
  auto open = [&](const char* name) {
    std::ifstream in(fs::path(dir) / name);
    if (!in) throw LoadError("cannot open resource file " + (fs::path(dir) / name).string());
    return in;
  };
  std::string line;
  {
    auto in = open("high_freq.txt");
    while (std::getline(in, line)) {
      if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
      auto w = trim(line);
      if (!w.empty()) r.high_freq_words.push_back(ascii_lower(w));
    }
  }
  {
    auto in = open("synonyms.tsv");
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw LoadError("synonyms.tsv: missing tab in '" + line + "'");
      auto& syns = r.synonyms[ascii_lower(trim(line.substr(0, tab)))];
      std::string_view rest(line);
      rest.remove_prefix(tab + 1);
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        auto s = trim(rest.substr(0, comma));
        if (!s.empty()) syns.push_back(ascii_lower(s));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    }
  }
  {
    auto in = open("pos.tsv");
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw LoadError("pos.tsv: missing tab in '" + line + "'");
      r.pos[ascii_lower(trim(line.substr(0, tab)))] = parse_pos_tag(trim(line.substr(tab + 1)));
    }
  }
  if (fs::exists(fs::path(dir) / "stopwords.txt")) {
    r.stop_words = load_stop_words_file((fs::path(dir) / "stopwords.txt").string());
  } else {
    r.stop_words = StopWords::english();
  }
  return r;
}

void LexicalResources::save_dir(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "high_freq.txt");
    for (const auto& w : high_freq_words) out << w << '\n';
  }
  {
    std::vector<std::string> keys;
    for (const auto& [k, v] : synonyms) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::ofstream out(fs::path(dir) / "synonyms.tsv");
    for (const auto& k : keys) {
      out << k << '\t';
      const auto& v = synonyms.at(k);
      for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
      out << '\n';
    }
  }
  {
    std::vector<std::string> keys;
    for (const auto& [k, v] : pos) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::ofstream out(fs::path(dir) / "pos.tsv");
    for (const auto& k : keys) out << k << '\t' << tag_letter(pos.at(k)) << '\n';
  }
  {
    std::vector<std::string> words(stop_words.words().begin(), stop_words.words().end());
    std::sort(words.begin(), words.end());
    std::ofstream out(fs::path(dir) / "stopwords.txt");
    for (const auto& w : words) out << w << '\n';
  }
}

namespace {

// Draws up to `count` distinct entries from pool (partial Fisher-Yates),
// removing them from the pool.
std::vector<std::size_t> draw(std::vector<std::size_t>& pool, std::size_t count, CounterRng& rng) {
  std::vector<std::size_t> out;
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

const std::string& pick_other(const std::vector<std::string>& pool, const std::string& avoid,
                              CounterRng& rng) {
  std::size_t i = rng.below(pool.size());
  for (std::size_t tries = 0; tries < pool.size() && pool[i] == avoid; ++tries) {
    i = (i + 1) % pool.size();
  }
  return pool[i];
}

}  // namespace

PerturbResult perturb(std::span<const std::string> text, const PerturbationPlan& plan,
                      const LexicalResources& res) {
  const std::size_t n = text.size();
  if (n == 0) throw Error("cannot perturb an empty text");
  if (plan.insertions + plan.deletions + plan.substitutions != plan.total_edits) {
    throw Error("inconsistent perturbation plan");
  }
  if (plan.deletions > n) {
    throw Error("plan deletes " + std::to_string(plan.deletions) + " words from a " +
                std::to_string(n) + "-word text");
  }
  if (plan.deletions + plan.substitutions > n) throw Error("plan edits more positions than exist");
  if ((plan.insertions > 0 || plan.substitutions > 0) && res.high_freq_words.empty()) {
    throw Error("high-frequency word pool is empty");
  }

  PerturbResult out;
  CounterRng rng(plan.seed);
  PerturbMode mode = plan.mode;
  std::vector<std::size_t> primary, secondary;
  if (mode == PerturbMode::targeted) {
    for (std::size_t i = 0; i < n; ++i) {
      if (res.targetable(text[i])) {
        primary.push_back(i);
      } else if (!res.stop_words.contains(text[i])) {
        secondary.push_back(i);
      }
    }
    if (primary.empty()) {
      mode = PerturbMode::random;
      out.fell_back_to_random = true;
    }
  }
  if (mode == PerturbMode::random) {
    primary.resize(n);
    for (std::size_t i = 0; i < n; ++i) primary[i] = i;
    secondary.clear();
  }
  const std::vector<std::size_t> anchors = primary;  // targeted insertion sites

  auto take = [&](std::size_t count) {
    auto picked = draw(primary, count, rng);
    if (picked.size() < count) {
      auto more = draw(secondary, count - picked.size(), rng);
      picked.insert(picked.end(), more.begin(), more.end());
    }
    out.edits_skipped += count - picked.size();
    return picked;
  };

  std::vector<std::string> replaced(text.begin(), text.end());
  for (std::size_t pos : take(plan.substitutions)) {
    const std::string& orig = text[pos];
    if (mode == PerturbMode::targeted) {
      auto it = res.synonyms.find(orig);
      if (it != res.synonyms.end()) {
        std::vector<const std::string*> options;
        for (const auto& s : it->second) {
          if (s != orig) options.push_back(&s);
        }
        if (!options.empty()) {
          replaced[pos] = *options[rng.below(options.size())];
          ++out.synonym_substitutions;
          continue;
        }
      }
    }
    replaced[pos] = pick_other(res.high_freq_words, orig, rng);
  }
  std::vector<bool> deleted(n, false);
  for (std::size_t pos : take(plan.deletions)) deleted[pos] = true;

  std::vector<std::vector<std::string>> inserts(n + 1);
  for (std::size_t k = 0; k < plan.insertions; ++k) {
    const std::size_t gap = mode == PerturbMode::targeted ? anchors[rng.below(anchors.size())]
                                                          : rng.below(n + 1);
    inserts[gap].push_back(res.high_freq_words[rng.below(res.high_freq_words.size())]);
  }

  out.words.reserve(n + plan.insertions);
  for (std::size_t i = 0; i <= n; ++i) {
    for (auto& w : inserts[i]) out.words.push_back(std::move(w));
    if (i < n && !deleted[i]) out.words.push_back(std::move(replaced[i]));
  }
  return out;
}

DegradationCurve degradation_curve(const std::vector<std::vector<TokenId>>& samples,
                                   const DetectorContext& ctx, const DetectorConfig& detector,
                                   const LexicalResources& res, const DegradationOptions& options,
                                   const std::vector<std::size_t>& oracle_topics) {
  if (samples.empty()) throw Error("degradation curve needs at least one sample");
  if (options.trials == 0) throw Error("degradation curve needs at least one trial");
  if (!std::is_sorted(options.levels.begin(), options.levels.end())) {
    throw Error("degradation levels must be sorted ascending");
  }
  if (!ctx.partition || !ctx.vocab) throw Error("degradation curve needs partition and vocabulary");
  if (detector.scheme == Scheme::oracle && oracle_topics.size() != samples.size()) {
    throw Error("oracle detection needs one topic per sample");
  }
  const auto& policy = ctx.partition->subwords();

  std::vector<std::vector<std::string>> words;
  words.reserve(samples.size());
  for (const auto& s : samples) words.push_back(split_words(detokenize(s, *ctx.vocab, policy)));

  DegradationCurve curve;
  for (std::size_t l = 0; l < options.levels.size(); ++l) {
    DegradationLevel level;
    level.percent = options.levels[l];
    std::size_t hits = 0, count = 0;
    double zsum = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      for (std::size_t t = 0; t < options.trials; ++t) {
        const std::uint64_t seed =
            derive_seed(derive_seed(derive_seed(options.seed, l), s), t);
        const auto plan = PerturbationPlan::make(level.percent, words[s].size(), options.mode, seed);
        const auto edited = perturb(words[s], plan, res);
        const auto tokens = tokenize_words(edited.words, *ctx.vocab, policy);
        std::optional<std::size_t> oracle;
        if (!oracle_topics.empty()) oracle = oracle_topics[s];
        const auto report = run_detector(tokens.ids, ctx, detector, oracle);
        curve.trials.push_back({l, s, t, report.z, report.verdict});
        zsum += report.z;
        hits += report.verdict ? 1 : 0;
        ++count;
      }
    }
    level.verdict_rate = static_cast<double>(hits) / static_cast<double>(count);
    level.mean_z = zsum / static_cast<double>(count);
    curve.levels.push_back(level);
  }
  return curve;
}

std::vector<Document> read_documents(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw LoadError("document line " + std::to_string(lineno) + ": expected id<TAB>text");
    }
    docs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return docs;
}

std::vector<Document> read_documents_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open documents file: " + path);
  return read_documents(in);
}

AttackCorpus ingest_paraphrases(const std::vector<Document>& originals,
                                const std::vector<Document>& paraphrased, const Vocabulary& vocab,
                                const SubwordPolicy& policy, std::optional<TokenId> unk) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : paraphrased) {
    if (!by_id.emplace(d.id, &d).second) throw Error("paraphrase id '" + d.id + "' appears twice");
  }
  std::unordered_set<std::string> seen;
  AttackCorpus corpus;
  for (const auto& o : originals) {
    if (!seen.insert(o.id).second) throw Error("original id '" + o.id + "' appears twice");
    auto it = by_id.find(o.id);
    if (it == by_id.end()) throw Error("original '" + o.id + "' has no paraphrase");
    ParaphrasePair pair;
    pair.id = o.id;
    pair.original = tokenize(o.text, vocab, policy, unk).ids;
    auto para = tokenize(it->second->text, vocab, policy, unk);
    pair.paraphrased = std::move(para.ids);
    pair.paraphrase_oov = para.oov_words;
    corpus.total_oov += para.oov_words;
    corpus.pairs.push_back(std::move(pair));
  }
  for (const auto& d : paraphrased) {
    if (!seen.count(d.id)) throw Error("paraphrase '" + d.id + "' has no original");
  }
  return corpus;
}

}  // namespace topicmark
