#include "topicmark/topic_partition.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "binary_io.hpp"
#include "topicmark/error.hpp"

namespace topicmark {

TopicSet::TopicSet(std::vector<Topic> topics) : topics_(std::move(topics)) {
  if (topics_.size() < 2) throw Error("a topic set needs at least two topics");
  if (topics_.size() > std::numeric_limits<TopicPartition::TopicIndex>::max()) {
    throw Error("too many topics");
  }
  std::unordered_set<std::string> names;
  const std::size_t d = topics_.front().embedding.size();
  for (const auto& t : topics_) {
    if (!names.insert(ascii_lower(t.name)).second) {
      throw Error("duplicate topic name '" + t.name + "'");
    }
    if (t.embedding.size() != d || d == 0) {
      throw Error("topic '" + t.name + "' has inconsistent embedding dimension");
    }
    if (l2_norm(t.embedding) == 0.0) throw Error("topic '" + t.name + "' has a zero embedding");
  }
}

std::optional<std::size_t> TopicSet::find(std::string_view name) const {
  const std::string key = ascii_lower(name);
  for (std::size_t i = 0; i < topics_.size(); ++i) {
    if (ascii_lower(topics_[i].name) == key) return i;
  }
  return std::nullopt;
}

TopicSet make_topic_set(const std::vector<std::string>& names, const EmbeddingTable& table) {
  std::vector<Topic> topics;
  topics.reserve(names.size());
  for (const auto& n : names) {
    const Vector* v = table.find(n);
    if (!v) throw LoadError("topic '" + n + "' has no embedding");
    topics.push_back({n, *v});
  }
  return TopicSet(std::move(topics));
}

std::vector<std::string> load_topic_names(std::istream& in) {
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::size_t b = 0, e = line.size();
    while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    if (e > b) names.push_back(line.substr(b, e - b));
  }
  return names;
}

std::vector<std::string> load_topic_names_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open topics file: " + path);
  return load_topic_names(in);
}

TopicPartition::TopicPartition(TopicSet topics, double tau, std::uint64_t vocab_fingerprint,
                               SubwordPolicy subwords, std::vector<TopicIndex> assignment,
                               std::vector<Provenance> provenance)
    : topics_(std::move(topics)),
      tau_(tau),
      fingerprint_(vocab_fingerprint),
      subwords_(std::move(subwords)),
      assignment_(std::move(assignment)),
      provenance_(std::move(provenance)) {
  if (assignment_.empty()) throw Error("partition over an empty vocabulary");
  if (assignment_.size() != provenance_.size()) {
    throw Error("partition assignment and provenance lengths differ");
  }
  lists_.resize(topics_.size());
  for (std::size_t t = 0; t < assignment_.size(); ++t) {
    if (assignment_[t] >= topics_.size()) {
      throw Error("token " + std::to_string(t) + " assigned to nonexistent list");
    }
    lists_[assignment_[t]].push_back(static_cast<TokenId>(t));
  }
}

TopicPartition build_partition(const Vocabulary& vocab, const EmbeddingTable& table,
                               const TopicSet& topics, const PartitionOptions& options,
                               std::vector<std::string>* warnings) {
  if (vocab.empty()) throw Error("cannot partition an empty vocabulary");
  if (!(options.tau > 0.0 && options.tau <= 1.0)) throw DomainError("tau must lie in (0, 1]");
  if (topics.dim() != table.dim()) {
    throw Error("topic embedding dimension differs from the embedding table");
  }
  const std::size_t K = topics.size();
  if (warnings) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = i + 1; j < K; ++j) {
        if (topics[i].embedding == topics[j].embedding) {
          warnings->push_back("topics '" + topics[i].name + "' and '" + topics[j].name +
                              "' have identical embeddings");
        }
      }
    }
  }

  const std::size_t V = vocab.size();
  constexpr auto kResidual = std::numeric_limits<TopicPartition::TopicIndex>::max();
  std::vector<TopicPartition::TopicIndex> best(V, kResidual);

  auto similarity_pass = [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      const Vector* e = table.find(options.subwords.strip(vocab.token(static_cast<TokenId>(v))));
      if (!e) continue;
      double max_sim = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t i = 0; i < K; ++i) {
        const double s = cosine(*e, topics[i].embedding);
        if (s > max_sim) {
          max_sim = s;
          arg = i;
        }
      }
      if (max_sim >= options.tau) best[v] = static_cast<TopicPartition::TopicIndex>(arg);
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(V / 1024 + 1)));
  if (threads == 1) {
    similarity_pass(0, V);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (V + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t b = w * chunk, e = std::min(V, b + chunk);
      if (b < e) pool.emplace_back(similarity_pass, b, e);
    }
    for (auto& t : pool) t.join();
  }

  std::vector<TopicPartition::TopicIndex> assignment(V);
  std::vector<Provenance> provenance(V, Provenance::similarity);
  std::size_t residual = 0;
  for (std::size_t v = 0; v < V; ++v) {
    if (best[v] == kResidual) {
      assignment[v] = static_cast<TopicPartition::TopicIndex>(residual % K);
      provenance[v] = Provenance::round_robin;
      ++residual;
    } else {
      assignment[v] = best[v];
    }
  }
  return TopicPartition(topics, options.tau, vocab.fingerprint(), options.subwords,
                        std::move(assignment), std::move(provenance));
}

PartitionStats partition_stats(const TopicPartition& p) {
  PartitionStats s;
  for (std::size_t i = 0; i < p.topic_count(); ++i) {
    s.sizes.push_back(p.list(i).size());
    s.gamma.push_back(p.gamma(i));
  }
  s.residual_count = static_cast<std::size_t>(
      std::count(p.provenance().begin(), p.provenance().end(), Provenance::round_robin));
  s.residual_fraction =
      static_cast<double>(s.residual_count) / static_cast<double>(p.vocab_size());
  return s;
}

namespace {
constexpr std::string_view kMagic{"TMKPART\0", 8};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_partition(const TopicPartition& p, std::ostream& out) {
  detail::ByteWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  w.f64(p.tau());
  w.u64(p.vocab_size());
  w.u64(p.vocab_fingerprint());
  w.u8(static_cast<std::uint8_t>(p.subwords().kind));
  w.str(p.subwords().marker);
  w.u32(static_cast<std::uint32_t>(p.topic_count()));
  w.u32(static_cast<std::uint32_t>(p.topics().dim()));
  for (const auto& t : p.topics().topics()) {
    w.str(t.name);
    for (double x : t.embedding) w.f64(x);
  }
  for (std::size_t i = 0; i < p.topic_count(); ++i) {
    w.u64(p.list(i).size());
    for (TokenId id : p.list(i)) w.u32(id);
  }
  std::vector<std::uint8_t> bits((p.vocab_size() + 7) / 8, 0);
  for (std::size_t t = 0; t < p.vocab_size(); ++t) {
    if (p.provenance()[t] == Provenance::round_robin) bits[t / 8] |= std::uint8_t(1u << (t % 8));
  }
  w.bytes(bits.data(), bits.size());
  w.checksum();
  out.write(reinterpret_cast<const char*>(w.data().data()),
            static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("failed writing partition");
}

void save_partition_file(const TopicPartition& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  save_partition(p, out);
}

TopicPartition load_partition(std::istream& in, const Vocabulary* vocab) {
  auto r = detail::ByteReader::from_stream(in, "partition");
  r.expect(kMagic);
  const std::size_t version_at = r.offset();
  if (r.u32() != kVersion) throw ParseError("unsupported partition version", version_at);
  const double tau = r.f64();
  const std::uint64_t V = r.u64();
  const std::uint64_t fp = r.u64();
  SubwordPolicy subwords;
  const std::uint8_t kind = r.u8();
  if (kind > 1) r.fail("bad subword kind");
  subwords.kind = static_cast<SubwordPolicy::Kind>(kind);
  subwords.marker = r.str();
  const std::uint32_t K = r.u32();
  const std::uint32_t dim = r.u32();
  if (K < 2 || dim == 0) r.fail("bad topic header");
  std::vector<Topic> topics;
  for (std::uint32_t i = 0; i < K; ++i) {
    Topic t;
    t.name = r.str();
    t.embedding.resize(dim);
    for (auto& x : t.embedding) x = r.f64();
    topics.push_back(std::move(t));
  }
  // Each list costs at least 8 bytes, each token 4.
  if (V == 0 || V > r.remaining() / 4 + 1) r.fail("implausible vocabulary size");
  constexpr auto kUnset = std::numeric_limits<TopicPartition::TopicIndex>::max();
  std::vector<TopicPartition::TopicIndex> assignment(V, kUnset);
  for (std::uint32_t i = 0; i < K; ++i) {
    const std::uint64_t n = r.u64();
    if (n > V) r.fail("list larger than vocabulary");
    r.need(n * 4);
    for (std::uint64_t j = 0; j < n; ++j) {
      const std::size_t at = r.offset();
      const std::uint32_t id = r.u32();
      if (id >= V) throw ParseError("partition: token index out of range", at);
      if (assignment[id] != kUnset) throw ParseError("partition: token listed twice", at);
      assignment[id] = static_cast<TopicPartition::TopicIndex>(i);
    }
  }
  if (std::find(assignment.begin(), assignment.end(), kUnset) != assignment.end()) {
    r.fail("lists do not cover the vocabulary");
  }
  std::vector<Provenance> provenance(V);
  const std::size_t nbytes = (V + 7) / 8;
  r.need(nbytes);
  const std::uint8_t* bits = r.cursor();
  for (std::size_t t = 0; t < V; ++t) {
    provenance[t] = (bits[t / 8] >> (t % 8)) & 1u ? Provenance::round_robin : Provenance::similarity;
  }
  r.skip(nbytes);
  r.verify_checksum();

  if (vocab && (vocab->fingerprint() != fp || vocab->size() != V)) {
    throw Error("partition vocabulary fingerprint " + fingerprint_hex(fp) + " (" +
                std::to_string(V) + " tokens) does not match supplied vocabulary " +
                fingerprint_hex(vocab->fingerprint()) + " (" + std::to_string(vocab->size()) +
                " tokens)");
  }
  return TopicPartition(TopicSet(std::move(topics)), tau, fp, std::move(subwords),
                        std::move(assignment), std::move(provenance));
}

TopicPartition load_partition_file(const std::string& path, const Vocabulary* vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open partition file: " + path);
  return load_partition(in, vocab);
}

}  // namespace topicmark
