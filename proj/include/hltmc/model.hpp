#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hltmc {

inline constexpr double kDefaultSigmaFloor = 1e-4;

enum class NodeKind : std::uint8_t { latent, leaf };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::latent;
  int parent = -1;  // index into TreeStructure::nodes, -1 for the root
  int level = 0;    // leaves 0, latent = 1 + max child level
  int word = -1;    // vocabulary index, leaves only

  bool operator==(const Node&) const = default;
};

/// Rooted tree of binary latent variables with one leaf per vocabulary word.
/// Plain data: it may be invalid until checked with validate_structure().
struct TreeStructure {
  std::vector<Node> nodes;
  std::vector<std::string> words;  // words[v] is the string of vocabulary index v

  std::size_t num_words() const { return words.size(); }
  int find(std::string_view id) const;

  bool operator==(const TreeStructure&) const = default;
};

/// Recomputes Node::level for every node. Requires parent links forming a tree.
void assign_levels(TreeStructure& structure);

/// cpt[parent_state][child_state] = P(child = child_state | parent = parent_state)
using Cpt = std::array<std::array<double, 2>, 2>;

inline constexpr Cpt kUniformCpt{{{0.5, 0.5}, {0.5, 0.5}}};

struct LeafParams {
  std::array<double, 2> mu{};     // mean given parent state 0 / 1
  std::array<double, 2> sigma{};  // std-dev given parent state 0 / 1

  bool operator==(const LeafParams&) const = default;
};

/// Parameters shared by the generative (truncated leaves) and auxiliary
/// (untruncated leaves) readings of the model.
struct ParamSet {
  double root_prior = 0.5;        // P(root = 1)
  std::vector<Cpt> cpts;          // indexed by node; only non-root latents are meaningful
  std::vector<LeafParams> leaves; // indexed by vocabulary index

  bool operator==(const ParamSet&) const = default;
};

struct Violation {
  std::string node;  // node id, or word/leaf label, or empty for global rules
  std::string rule;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool mentions(std::string_view rule_fragment) const;
  std::string to_string() const;
};

ValidationReport validate_structure(const TreeStructure& structure);
ValidationReport validate_model(const TreeStructure& structure, const ParamSet& params,
                                double sigma_floor = kDefaultSigmaFloor);

/// Index over a valid TreeStructure: traversal orders and child lists.
class Topology {
 public:
  explicit Topology(const TreeStructure& structure);

  int root() const { return root_; }
  std::size_t num_nodes() const { return parent_.size(); }
  std::size_t num_words() const { return word_node_.size(); }

  int parent(int node) const { return parent_[node]; }
  bool is_latent(int node) const { return is_latent_[node] != 0; }

  /// Latent nodes, parents before children.
  std::span<const int> latents() const { return latents_; }
  /// Latent nodes with at least one leaf child, in latents() order.
  std::span<const int> level1() const { return level1_; }
  std::span<const int> latent_children(int node) const { return latent_children_[node]; }
  /// Vocabulary indices of the leaf children of a latent.
  std::span<const int> leaf_words(int node) const { return leaf_words_[node]; }
  /// Vocabulary indices of every leaf below a latent, ascending.
  std::span<const int> subtree_words(int node) const { return subtree_words_[node]; }

  int word_node(int word) const { return word_node_[word]; }
  int word_parent(int word) const { return parent_[word_node_[word]]; }
  /// Position of a latent inside level1(), or -1.
  int level1_slot(int node) const { return level1_slot_[node]; }

 private:
  int root_ = -1;
  std::vector<int> parent_;
  std::vector<std::uint8_t> is_latent_;
  std::vector<int> latents_;
  std::vector<int> level1_;
  std::vector<int> level1_slot_;
  std::vector<std::vector<int>> latent_children_;
  std::vector<std::vector<int>> leaf_words_;
  std::vector<std::vector<int>> subtree_words_;
  std::vector<int> word_node_;
};

/// Log-domain tables derived from a ParamSet, cached for inference.
struct LogTables {
  double log_root[2]{};
  std::vector<Cpt> log_cpts;                    // by node
  std::vector<std::array<double, 2>> log_sigma; // by word
  std::vector<std::array<double, 2>> zero_base; // by node: sum of leaf log-densities at r = 0
};

/// Validated (structure, params) pair. Immutable after construction.
class HltmcModel {
 public:
  /// Throws DataError listing every violation when the pair is invalid.
  HltmcModel(TreeStructure structure, ParamSet params, double sigma_floor = kDefaultSigmaFloor);

  const TreeStructure& structure() const { return structure_; }
  const ParamSet& params() const { return params_; }
  const Topology& topology() const { return topology_; }
  const LogTables& log_tables() const { return log_tables_; }
  double sigma_floor() const { return sigma_floor_; }
  std::size_t num_words() const { return structure_.num_words(); }

  bool operator==(const HltmcModel& other) const {
    return structure_ == other.structure_ && params_ == other.params_ &&
           sigma_floor_ == other.sigma_floor_;
  }

 private:
  TreeStructure structure_;
  ParamSet params_;
  double sigma_floor_;
  Topology topology_;
  LogTables log_tables_;
};

/// 1 (root prior) + 2 per non-root latent + 4 per leaf.
std::size_t count_parameters(const HltmcModel& model);

/// Prior marginals P(z = 1) for every latent node (indexed by node; leaves 0).
std::vector<double> prior_marginals(const HltmcModel& model);

}  // namespace hltmc
