#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hltmc {

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws DataError on duplicate words.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(int index) const { return words_[index]; }
  std::span<const std::string> words() const { return words_; }
  /// -1 when absent.
  int find(std::string_view word) const;
  /// Returns the index of the word, appending it when new.
  int add(std::string word);

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct WordCount {
  int word = 0;
  int count = 0;

  bool operator==(const WordCount&) const = default;
};

/// Sparse count vector; entries sorted by word with count >= 1.
struct CountDoc {
  std::string id;
  std::vector<WordCount> entries;

  std::int64_t length() const;
  bool operator==(const CountDoc&) const = default;
};

struct CountCorpus {
  Vocabulary vocab;
  std::vector<CountDoc> docs;

  std::size_t num_docs() const { return docs.size(); }
  bool operator==(const CountCorpus&) const = default;
};

std::vector<int> to_dense(const CountDoc& doc, std::size_t vocab_size);
CountDoc from_dense(std::span<const int> counts, std::string id = {});

/// Reads the UCI bag-of-words pair: docword file (D, W, NNZ header lines, then
/// 1-based "docId wordId count" triples) and a vocabulary file with one word
/// per line. Documents with no triples are kept with length 0.
CountCorpus load_uci_bow(const std::filesystem::path& docword, const std::filesystem::path& vocab);
CountCorpus load_uci_bow(const std::filesystem::path& docword, Vocabulary vocab);
void save_uci_bow(const CountCorpus& corpus, const std::filesystem::path& docword,
                  const std::filesystem::path& vocab);

std::vector<std::string> load_vocab_file(const std::filesystem::path& path);

enum class TfidfAverage {
  all_documents,        // mean over every document, absent counts as 0
  containing_documents  // mean over documents that contain the word
};

/// Average tf-idf score per word: tf = count / N, idf = ln(D / D(w)).
/// Words that never occur score -inf.
std::vector<double> tfidf_scores(const CountCorpus& corpus, TfidfAverage average = TfidfAverage::all_documents);

/// Keeps the top `target_size` words by average tf-idf (ties by word string),
/// preserving their original relative order, and reprojects every document.
/// Documents that lose all their words stay in the corpus with length 0.
CountCorpus select_vocab_tfidf(const CountCorpus& corpus, std::size_t target_size,
                               TfidfAverage average = TfidfAverage::all_documents);

/// Maps every document onto `target` by word string. Counts of words missing
/// from `target` are dropped and added to *dropped_tokens when given.
CountCorpus reproject(const CountCorpus& corpus, const Vocabulary& target, std::int64_t* dropped_tokens = nullptr);

struct CorpusSplit {
  CountCorpus train;
  CountCorpus test;
};

/// Seeded shuffle of document order; the first ceil(fraction * D) go to train.
CorpusSplit split_corpus(const CountCorpus& corpus, double train_fraction, std::uint64_t seed);

}  // namespace hltmc
