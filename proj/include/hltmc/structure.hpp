#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hltmc/corpus.hpp"
#include "hltmc/model.hpp"

namespace hltmc {

/// Word presence per document: sorted vocabulary indices with count >= 1.
struct BinaryCorpus {
  std::size_t num_words = 0;
  std::vector<std::vector<int>> docs;

  bool operator==(const BinaryCorpus&) const = default;
};

BinaryCorpus binarize(const CountCorpus& corpus);

/// Binary columns over documents, packed 64 per word.
class IndicatorColumns {
 public:
  IndicatorColumns() = default;
  /// One column per vocabulary word.
  explicit IndicatorColumns(const BinaryCorpus& corpus);

  std::size_t num_docs() const { return num_docs_; }
  std::size_t size() const { return bits_.size(); }
  std::size_t ones(std::size_t column) const { return ones_[column]; }
  std::size_t both(std::size_t a, std::size_t b) const;

  /// Appends the OR of the given columns and returns its index.
  std::size_t add_union(std::span<const std::size_t> columns);

 private:
  std::size_t num_docs_ = 0;
  std::vector<std::vector<std::uint64_t>> bits_;
  std::vector<std::size_t> ones_;
};

/// Mutual information in nats of two binary indicators given their counts,
/// with 0.5 added to each joint cell. For a column with itself only the two
/// diagonal cells are possible, so only those are smoothed and the result is
/// the entropy of the smoothed marginal.
double binary_mi(std::size_t ones_a, std::size_t ones_b, std::size_t ones_both, std::size_t num_docs, bool same_column);

double pairwise_mi(const BinaryCorpus& corpus, int i, int j);

/// Symmetric MI matrix between the listed columns (row-major, size n*n).
/// Parallel over rows; every entry is computed independently.
std::vector<double> mi_matrix(const IndicatorColumns& columns, std::span<const std::size_t> which);
std::vector<double> mi_matrix_serial(const IndicatorColumns& columns, std::span<const std::size_t> which);

struct StructureOptions {
  std::size_t group_size = 7;
};

/// Greedy MI agglomeration. Level 1: repeatedly seed a group with the
/// unassigned pair of highest MI and grow it by the word with the highest
/// average MI to the group, up to group_size words, under a new latent.
/// Higher levels represent each latent by the OR of its children's columns
/// and regroup until at most group_size nodes remain, which then hang from a
/// single root. Ties go to the smallest index. Throws std::invalid_argument
/// for fewer than two words or group_size < 2.
TreeStructure build_structure(const BinaryCorpus& corpus, const Vocabulary& vocab, const StructureOptions& options = {});

/// Line format, one node per line, '#' starts a comment:
///   id  parent_id|-  latent|leaf  [word]
/// With a vocabulary, leaf words map to its indices and every vocabulary word
/// must appear; without one, words are indexed in file order.
/// Throws ParseError (with line) or DataError (structural violations).
TreeStructure parse_structure(std::istream& in, const std::string& where, const Vocabulary* vocab = nullptr);
TreeStructure load_structure(const std::filesystem::path& path, const Vocabulary* vocab = nullptr);
void write_structure(const TreeStructure& structure, std::ostream& out);
void save_structure(const TreeStructure& structure, const std::filesystem::path& path);

}  // namespace hltmc
