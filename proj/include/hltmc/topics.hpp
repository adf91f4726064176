#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hltmc/corpus.hpp"
#include "hltmc/model.hpp"
#include "hltmc/structure.hpp"

namespace hltmc {

inline constexpr std::size_t kDefaultTopicWords = 4;

struct TopicWord {
  int word = -1;
  std::string text;
  double mu_topic = 0.0;       // mean given state 1
  double mu_background = 0.0;  // mean given state 0
  double difference = 0.0;     // |mu_topic - mu_background|

  bool operator==(const TopicWord&) const = default;
};

struct Topic {
  int node = -1;
  std::string id;
  int level = 0;
  double size = 0.0;  // prior P(z = 1)
  std::vector<TopicWord> words;

  bool operator==(const Topic&) const = default;
};

/// Topics ordered by level (highest first), then by pre-order position in the
/// tree. parent[t] indexes into topics, -1 for the root topic.
struct TopicTree {
  std::vector<Topic> topics;
  std::vector<int> parent;
};

/// Ranks the words below a latent by descending |mu_1 - mu_0|, ties by word
/// index, keeping min(M, subtree size). The model is expected to be relabeled
/// so that state 1 is the topic state.
Topic extract_topic(const HltmcModel& model, int node, std::size_t max_words = kDefaultTopicWords);
/// Throws std::invalid_argument for an id that is not a latent node.
Topic extract_topic(const HltmcModel& model, std::string_view latent_id, std::size_t max_words = kDefaultTopicWords);

TopicTree extract_hierarchy(const HltmcModel& model, std::size_t max_words = kDefaultTopicWords);

/// Indented listing, one topic per line: "[size] word word ...".
std::string format_topic_tree(const TopicTree& tree);
std::string topic_tree_json(const TopicTree& tree);

struct CoherenceResult {
  double score = 0.0;
  std::size_t skipped = 0;  // pair terms dropped because D(w_j) = 0
};

/// sum_{i>=2} sum_{j<i} log((D(w_i, w_j) + 1) / D(w_j)) over document sets.
/// Throws std::invalid_argument for an index outside the columns.
CoherenceResult coherence(std::span<const int> words, const IndicatorColumns& documents);
/// Throws DataError for a word missing from the corpus vocabulary.
CoherenceResult coherence(std::span<const std::string> words, const CountCorpus& corpus);

class Embeddings {
 public:
  Embeddings() = default;
  void add(std::string word, std::vector<double> vector);
  const std::vector<double>* find(std::string_view word) const;
  std::size_t size() const { return vectors_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Reads word2vec output in the text form ("word v_1 ... v_dim" per line, with
/// or without a "count dim" header) or the binary form (header, then each word
/// followed by dim little-endian float32 values). The form is detected.
Embeddings load_embeddings(const std::filesystem::path& path);

/// Mean pairwise cosine similarity of the words found in the table (zero
/// vectors count as missing). Empty when fewer than two words remain.
std::optional<double> compactness(std::span<const std::string> words, const Embeddings& embeddings);

struct TopicScore {
  std::string id;
  int level = 0;
  double coherence = 0.0;
  std::size_t coherence_skipped = 0;
  std::optional<double> compactness;
};

struct LevelScore {
  std::size_t topics = 0;
  double mean_coherence = 0.0;
  std::optional<double> mean_compactness;
  std::size_t undefined_compactness = 0;
};

struct ScoreReport {
  std::vector<TopicScore> topics;
  double mean_coherence = 0.0;
  std::optional<double> mean_compactness;  // empty without embeddings or defined scores
  std::size_t undefined_compactness = 0;
  std::map<int, LevelScore> per_level;
};

/// Scores the first min(M, listed) words of every topic. Means are unweighted;
/// undefined compactness scores are excluded and counted.
ScoreReport score_report(const TopicTree& tree, const CountCorpus& corpus, const Embeddings* embeddings,
                         std::size_t max_words = kDefaultTopicWords);

std::string format_score_report(const ScoreReport& report);
std::string score_report_json(const ScoreReport& report);

}  // namespace hltmc
