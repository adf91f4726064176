#include "hltmc/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <unordered_set>

#include "hltmc/error.hpp"
#include "hltmc/normal.hpp"

namespace hltmc {
namespace {

constexpr double kRowTolerance = 1e-12;

std::string leaf_label(const TreeStructure& s, int word) {
  std::string label = "leaf " + std::to_string(word);
  if (word >= 0 && static_cast<std::size_t>(word) < s.words.size()) label += " (" + s.words[word] + ")";
  return label;
}

bool parents_in_range(const TreeStructure& s) {
  for (const Node& n : s.nodes) {
    if (n.parent < -1 || n.parent >= static_cast<int>(s.nodes.size())) return false;
  }
  return true;
}

// True when following parent links from every node reaches a root without
// revisiting a node.
bool acyclic(const TreeStructure& s) {
  const std::size_t n = s.nodes.size();
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on path, 2 done
  for (std::size_t start = 0; start < n; ++start) {
    std::vector<int> path;
    int cur = static_cast<int>(start);
    while (cur >= 0 && state[cur] == 0) {
      state[cur] = 1;
      path.push_back(cur);
      cur = s.nodes[cur].parent;
    }
    if (cur >= 0 && state[cur] == 1) return false;
    for (int p : path) state[p] = 2;
  }
  return true;
}

const TreeStructure& checked(const TreeStructure& s, const ParamSet& p, double sigma_floor) {
  const auto report = validate_model(s, p, sigma_floor);
  if (!report.ok()) throw DataError("invalid model:\n" + report.to_string());
  return s;
}

}  // namespace

int TreeStructure::find(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void assign_levels(TreeStructure& structure) {
  auto& nodes = structure.nodes;
  if (!parents_in_range(structure) || !acyclic(structure)) {
    throw DataError("cannot assign levels: parent links do not form a forest");
  }
  for (Node& n : nodes) n.level = 0;
  // Propagate each leaf's height upward; a latent with no children keeps 1.
  for (Node& n : nodes) {
    if (n.kind == NodeKind::latent) n.level = 1;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    int child = static_cast<int>(i);
    int p = nodes[i].parent;
    while (p >= 0 && nodes[p].level < nodes[child].level + 1) {
      nodes[p].level = nodes[child].level + 1;
      child = p;
      p = nodes[p].parent;
    }
  }
}

bool ValidationReport::mentions(std::string_view rule_fragment) const {
  for (const auto& v : violations) {
    if (v.rule.find(rule_fragment) != std::string::npos) return true;
  }
  return false;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok";
  std::ostringstream out;
  for (const auto& v : violations) {
    out << (v.node.empty() ? std::string("model") : v.node) << ": " << v.rule << '\n';
  }
  return out.str();
}

ValidationReport validate_structure(const TreeStructure& s) {
  ValidationReport report;
  auto fail = [&](std::string node, std::string rule) {
    report.violations.push_back({std::move(node), std::move(rule)});
  };
  const int n = static_cast<int>(s.nodes.size());
  if (n == 0) {
    fail("", "structure has no nodes");
    return report;
  }

  std::unordered_set<std::string> ids;
  for (const Node& node : s.nodes) {
    if (!ids.insert(node.id).second) fail(node.id, "duplicate node id");
  }
  if (!parents_in_range(s)) {
    fail("", "parent index out of range");
    return report;
  }

  int roots = 0;
  std::vector<int> child_count(n, 0);
  for (const Node& node : s.nodes) {
    if (node.parent < 0) {
      ++roots;
      if (node.kind == NodeKind::leaf) fail(node.id, "root must be a latent node");
      continue;
    }
    ++child_count[node.parent];
    if (node.kind == NodeKind::leaf && s.nodes[node.parent].kind != NodeKind::latent) {
      fail(node.id, "leaf parent must be a latent node");
    }
  }
  if (roots != 1) fail("", "expected exactly one root, found " + std::to_string(roots));
  for (int i = 0; i < n; ++i) {
    if (s.nodes[i].kind == NodeKind::latent && child_count[i] == 0) {
      fail(s.nodes[i].id, "latent node has no children");
    }
  }

  const bool tree = acyclic(s);
  if (!tree) fail("", "parent links contain a cycle");

  // Leaf vocabulary indices must be a bijection onto 0..V-1.
  const int vocab = static_cast<int>(s.words.size());
  std::vector<int> seen(vocab, 0);
  bool bijection = true;
  int leaves = 0;
  for (const Node& node : s.nodes) {
    if (node.kind != NodeKind::leaf) continue;
    ++leaves;
    if (node.word < 0 || node.word >= vocab) {
      bijection = false;
      fail(node.id, "leaf vocabulary index out of range");
    } else if (seen[node.word]++) {
      bijection = false;
    }
  }
  if (leaves != vocab) bijection = false;
  if (!bijection) fail("", "vocabulary index bijection broken");

  if (tree) {
    TreeStructure copy = s;
    assign_levels(copy);
    for (int i = 0; i < n; ++i) {
      if (copy.nodes[i].level != s.nodes[i].level) {
        fail(s.nodes[i].id, "level should be " + std::to_string(copy.nodes[i].level) + ", found " +
                                std::to_string(s.nodes[i].level));
      }
    }
  }
  return report;
}

ValidationReport validate_model(const TreeStructure& s, const ParamSet& p, double sigma_floor) {
  ValidationReport report = validate_structure(s);
  auto fail = [&](std::string node, std::string rule) {
    report.violations.push_back({std::move(node), std::move(rule)});
  };

  if (!(p.root_prior >= 0.0 && p.root_prior <= 1.0)) fail("", "root prior outside [0,1]");

  // 1 + 2(L - 1) + 4V <= 6V exactly when L <= V; chains of single-child
  // latents can break it.
  std::size_t latents = 0;
  for (const Node& node : s.nodes) latents += node.kind == NodeKind::latent;
  if (latents > 0) {
    const std::size_t count = 1 + 2 * (latents - 1) + 4 * s.words.size();
    if (count > 6 * s.words.size()) {
      fail("", "parameter count " + std::to_string(count) + " exceeds 6V = " + std::to_string(6 * s.words.size()));
    }
  }

  if (p.cpts.size() != s.nodes.size()) {
    fail("", "cpt table count does not match node count");
  } else {
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      const Node& node = s.nodes[i];
      if (node.kind != NodeKind::latent || node.parent < 0) continue;
      for (int row = 0; row < 2; ++row) {
        const auto& r = p.cpts[i][row];
        if (!(r[0] >= 0.0 && r[0] <= 1.0 && r[1] >= 0.0 && r[1] <= 1.0)) {
          fail(node.id, "cpt entry outside [0,1] in row " + std::to_string(row));
        } else if (std::abs(r[0] + r[1] - 1.0) > kRowTolerance) {
          fail(node.id, "cpt row " + std::to_string(row) + " does not sum to 1");
        }
      }
    }
  }

  if (p.leaves.size() != s.words.size()) {
    fail("", "leaf parameter count does not match vocabulary size");
  } else {
    for (std::size_t w = 0; w < p.leaves.size(); ++w) {
      const auto& leaf = p.leaves[w];
      const int word = static_cast<int>(w);
      for (int z = 0; z < 2; ++z) {
        if (!std::isfinite(leaf.mu[z])) fail(leaf_label(s, word), "non-finite mean at leaf " + std::to_string(w));
        if (!(leaf.sigma[z] >= sigma_floor) || !std::isfinite(leaf.sigma[z])) {
          fail(leaf_label(s, word), "sigma below floor at leaf " + std::to_string(w));
        }
      }
    }
  }
  return report;
}

Topology::Topology(const TreeStructure& s) {
  const std::size_t n = s.nodes.size();
  parent_.resize(n);
  is_latent_.resize(n);
  latent_children_.resize(n);
  leaf_words_.resize(n);
  subtree_words_.resize(n);
  level1_slot_.assign(n, -1);
  word_node_.assign(s.words.size(), -1);

  std::vector<std::vector<int>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = s.nodes[i];
    parent_[i] = node.parent;
    is_latent_[i] = node.kind == NodeKind::latent;
    if (node.parent < 0) {
      root_ = static_cast<int>(i);
    } else {
      children[node.parent].push_back(static_cast<int>(i));
    }
    if (node.kind == NodeKind::leaf) word_node_[node.word] = static_cast<int>(i);
  }

  // Breadth-first from the root: parents precede children.
  std::deque<int> queue{root_};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    latents_.push_back(u);
    for (int c : children[u]) {
      if (is_latent_[c]) {
        latent_children_[u].push_back(c);
        queue.push_back(c);
      } else {
        leaf_words_[u].push_back(s.nodes[c].word);
      }
    }
    if (!leaf_words_[u].empty()) {
      level1_slot_[u] = static_cast<int>(level1_.size());
      level1_.push_back(u);
    }
  }

  for (auto it = latents_.rbegin(); it != latents_.rend(); ++it) {
    auto& words = subtree_words_[*it];
    words.assign(leaf_words_[*it].begin(), leaf_words_[*it].end());
    for (int c : latent_children_[*it]) {
      words.insert(words.end(), subtree_words_[c].begin(), subtree_words_[c].end());
    }
    std::sort(words.begin(), words.end());
  }
}

HltmcModel::HltmcModel(TreeStructure structure, ParamSet params, double sigma_floor)
    : structure_(std::move(structure)),
      params_(std::move(params)),
      sigma_floor_(sigma_floor),
      topology_(checked(structure_, params_, sigma_floor_)) {
  const std::size_t n = structure_.nodes.size();
  log_tables_.log_root[0] = std::log1p(-params_.root_prior);
  log_tables_.log_root[1] = std::log(params_.root_prior);
  log_tables_.log_cpts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) log_tables_.log_cpts[i][a][b] = std::log(params_.cpts[i][a][b]);
    }
  }
  log_tables_.log_sigma.resize(num_words());
  for (std::size_t w = 0; w < num_words(); ++w) {
    for (int z = 0; z < 2; ++z) log_tables_.log_sigma[w][z] = std::log(params_.leaves[w].sigma[z]);
  }
  log_tables_.zero_base.assign(n, {0.0, 0.0});
  for (int u : topology_.latents()) {
    for (int w : topology_.leaf_words(u)) {
      const auto& leaf = params_.leaves[w];
      for (int z = 0; z < 2; ++z) log_tables_.zero_base[u][z] += normal_log_pdf(0.0, leaf.mu[z], leaf.sigma[z]);
    }
  }
}

std::size_t count_parameters(const HltmcModel& model) {
  const std::size_t latents = model.topology().latents().size();
  return 1 + 2 * (latents - 1) + 4 * model.num_words();
}

std::vector<double> prior_marginals(const HltmcModel& model) {
  const auto& topo = model.topology();
  const auto& p = model.params();
  std::vector<double> p1(topo.num_nodes(), 0.0);
  p1[topo.root()] = p.root_prior;
  for (int u : topo.latents()) {
    for (int c : topo.latent_children(u)) {
      p1[c] = (1.0 - p1[u]) * p.cpts[c][0][1] + p1[u] * p.cpts[c][1][1];
    }
  }
  return p1;
}

}  // namespace hltmc
