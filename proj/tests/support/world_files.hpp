#pragma once

// Materializes a synthetic world on disk the way the CLI does (synth,
// partition, train) so experiments can run against real files.

#include <filesystem>
#include <fstream>
#include <string>

#include "topicmark/ngram.hpp"
#include "topicmark/synthetic.hpp"
#include "topicmark/topic_partition.hpp"

namespace topicmark::testing {

struct WorldFiles {
  std::filesystem::path dir;
  SyntheticWorld world;
};

inline WorldFiles write_world(const std::filesystem::path& dir, const SyntheticOptions& opt,
                              std::size_t k = 4, double tau = 0.7, std::size_t order = 3,
                              double alpha = 0.005) {
  namespace fs = std::filesystem;
  fs::remove_all(dir);
  fs::create_directories(dir);
  WorldFiles w{dir, make_synthetic_world(opt)};
  w.world.save(dir.string(), k);
  const SubwordPolicy whole_words{"", SubwordPolicy::Kind::continuation};
  PartitionOptions po{tau, whole_words};
  const auto topics = make_topic_set(topic_inventory(k), w.world.embeddings);
  save_partition_file(build_partition(w.world.vocab, w.world.embeddings, topics, po),
                      (dir / "partition.tmk").string());
  std::ifstream corpus(dir / "corpus.txt");
  save_ngram_file(train_ngram(corpus, order, alpha, w.world.vocab, whole_words),
                  (dir / "model.ngram").string());
  return w;
}

inline std::string basic_manifest(std::size_t limit) {
  return R"({"vocab": "vocab.txt", "embeddings": "embeddings.vec", "partition": "partition.tmk",
            "model": "model.ngram", "prompts": "prompts.tsv", "clean": "clean.tsv",
            "resources": "resources", "limit": )" +
         std::to_string(limit) + "}";
}

}  // namespace topicmark::testing
