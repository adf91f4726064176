#include "hltmc/structure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "hltmc/error.hpp"

namespace hltmc {
namespace {

constexpr double kSmoothing = 0.5;

double xlogx_ratio(double pxy, double px, double py) { return pxy > 0.0 ? pxy * std::log(pxy / (px * py)) : 0.0; }

// Greedy grouping of n items given their MI matrix. Returns groups in
// creation order; members in insertion order.
std::vector<std::vector<std::size_t>> greedy_groups(const std::vector<double>& mi, std::size_t n, std::size_t g) {
  std::vector<char> taken(n, 0);
  std::size_t remaining = n;
  std::vector<std::vector<std::size_t>> groups;
  while (remaining > 0) {
    std::vector<std::size_t> group;
    if (remaining == 1) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i]) group.push_back(i);
      }
    } else {
      double best = -1.0;
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
          if (!taken[j] && mi[i * n + j] > best) {
            best = mi[i * n + j];
            bi = i;
            bj = j;
          }
        }
      }
      group = {bi, bj};
      taken[bi] = taken[bj] = 1;
      while (group.size() < g && group.size() < remaining) {
        double best_avg = -1.0;
        std::size_t pick = n;
        for (std::size_t k = 0; k < n; ++k) {
          if (taken[k]) continue;
          double sum = 0.0;
          for (std::size_t m : group) sum += mi[k * n + m];
          const double avg = sum / static_cast<double>(group.size());
          if (avg > best_avg) {
            best_avg = avg;
            pick = k;
          }
        }
        group.push_back(pick);
        taken[pick] = 1;
      }
    }
    for (std::size_t m : group) taken[m] = 1;
    remaining -= group.size();
    groups.push_back(std::move(group));
  }
  return groups;
}

int add_latent(TreeStructure& s, std::string id) {
  Node node;
  node.id = std::move(id);
  node.kind = NodeKind::latent;
  s.nodes.push_back(std::move(node));
  return static_cast<int>(s.nodes.size() - 1);
}

}  // namespace

BinaryCorpus binarize(const CountCorpus& corpus) {
  BinaryCorpus out;
  out.num_words = corpus.vocab.size();
  out.docs.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    std::vector<int> present;
    for (const auto& e : doc.entries) {
      if (e.count >= 1) present.push_back(e.word);
    }
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    out.docs.push_back(std::move(present));
  }
  return out;
}

IndicatorColumns::IndicatorColumns(const BinaryCorpus& corpus) : num_docs_(corpus.docs.size()) {
  const std::size_t words = (num_docs_ + 63) / 64;
  bits_.assign(corpus.num_words, std::vector<std::uint64_t>(words, 0));
  ones_.assign(corpus.num_words, 0);
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (int w : corpus.docs[d]) {
      if (w < 0 || static_cast<std::size_t>(w) >= corpus.num_words) throw DataError("binary corpus index out of range");
      bits_[w][d / 64] |= std::uint64_t{1} << (d % 64);
    }
  }
  for (std::size_t c = 0; c < bits_.size(); ++c) {
    for (auto b : bits_[c]) ones_[c] += static_cast<std::size_t>(std::popcount(b));
  }
}

std::size_t IndicatorColumns::both(std::size_t a, std::size_t b) const {
  std::size_t n = 0;
  const auto& x = bits_[a];
  const auto& y = bits_[b];
  for (std::size_t k = 0; k < x.size(); ++k) n += static_cast<std::size_t>(std::popcount(x[k] & y[k]));
  return n;
}

std::size_t IndicatorColumns::add_union(std::span<const std::size_t> columns) {
  std::vector<std::uint64_t> merged((num_docs_ + 63) / 64, 0);
  for (std::size_t c : columns) {
    for (std::size_t k = 0; k < merged.size(); ++k) merged[k] |= bits_[c][k];
  }
  std::size_t count = 0;
  for (auto b : merged) count += static_cast<std::size_t>(std::popcount(b));
  bits_.push_back(std::move(merged));
  ones_.push_back(count);
  return bits_.size() - 1;
}

double binary_mi(std::size_t ones_a, std::size_t ones_b, std::size_t ones_both, std::size_t num_docs, bool same_column) {
  const double n = static_cast<double>(num_docs);
  if (same_column) {
    const double total = n + 2 * kSmoothing;
    const double p1 = (static_cast<double>(ones_a) + kSmoothing) / total;
    const double p0 = 1.0 - p1;
    return -(p1 * std::log(p1) + p0 * std::log(p0));
  }
  const double n11 = static_cast<double>(ones_both) + kSmoothing;
  const double n10 = static_cast<double>(ones_a - ones_both) + kSmoothing;
  const double n01 = static_cast<double>(ones_b - ones_both) + kSmoothing;
  const double n00 = n - static_cast<double>(ones_a + ones_b - ones_both) + kSmoothing;
  const double total = n + 4 * kSmoothing;
  const double p11 = n11 / total, p10 = n10 / total, p01 = n01 / total, p00 = n00 / total;
  const double pa = p11 + p10, pb = p11 + p01;
  const double mi = xlogx_ratio(p11, pa, pb) + xlogx_ratio(p10, pa, 1.0 - pb) + xlogx_ratio(p01, 1.0 - pa, pb) +
                    xlogx_ratio(p00, 1.0 - pa, 1.0 - pb);
  return std::max(mi, 0.0);
}

double pairwise_mi(const BinaryCorpus& corpus, int i, int j) {
  if (corpus.docs.empty()) throw std::invalid_argument("mutual information needs a nonempty corpus");
  std::size_t a = 0, b = 0, ab = 0;
  for (const auto& doc : corpus.docs) {
    const bool hi = std::binary_search(doc.begin(), doc.end(), i);
    const bool hj = std::binary_search(doc.begin(), doc.end(), j);
    a += hi;
    b += hj;
    ab += hi && hj;
  }
  return binary_mi(a, b, ab, corpus.docs.size(), i == j);
}

std::vector<double> mi_matrix_serial(const IndicatorColumns& columns, std::span<const std::size_t> which) {
  const std::size_t n = which.size();
  std::vector<double> mi(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = binary_mi(columns.ones(which[i]), columns.ones(which[j]), columns.both(which[i], which[j]),
                                 columns.num_docs(), i == j);
      mi[i * n + j] = mi[j * n + i] = v;
    }
  }
  return mi;
}

std::vector<double> mi_matrix(const IndicatorColumns& columns, std::span<const std::size_t> which) {
  const std::size_t n = which.size();
  std::vector<double> mi(n * n, 0.0);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i; j < n; ++j) {
      const double v = binary_mi(columns.ones(which[i]), columns.ones(which[j]), columns.both(which[i], which[j]),
                                 columns.num_docs(), i == j);
      mi[i * n + j] = mi[j * n + i] = v;
    }
  }
  return mi;
}

TreeStructure build_structure(const BinaryCorpus& corpus, const Vocabulary& vocab, const StructureOptions& options) {
  const std::size_t vocab_size = vocab.size();
  if (vocab_size < 2) throw std::invalid_argument("structure building needs at least two words");
  if (options.group_size < 2) throw std::invalid_argument("group size must be at least 2");
  if (corpus.num_words != vocab_size) throw std::invalid_argument("binary corpus and vocabulary sizes differ");

  TreeStructure s;
  s.words.assign(vocab.words().begin(), vocab.words().end());
  for (std::size_t w = 0; w < vocab_size; ++w) {
    Node leaf;
    leaf.id = "w" + std::to_string(w);
    leaf.kind = NodeKind::leaf;
    leaf.word = static_cast<int>(w);
    s.nodes.push_back(std::move(leaf));
  }

  IndicatorColumns columns(corpus);
  std::vector<int> layer_nodes(vocab_size);
  std::vector<std::size_t> layer_columns(vocab_size);
  for (std::size_t w = 0; w < vocab_size; ++w) {
    layer_nodes[w] = static_cast<int>(w);
    layer_columns[w] = w;
  }

  for (int level = 1;; ++level) {
    const bool leaves = level == 1;
    if (layer_nodes.size() <= options.group_size) {
      if (layer_nodes.size() == 1 && !leaves) break;  // already a single latent root
      const int root = add_latent(s, "Z" + std::to_string(level) + "_0");
      for (int child : layer_nodes) s.nodes[child].parent = root;
      break;
    }
    const auto mi = mi_matrix(columns, layer_columns);
    const auto groups = greedy_groups(mi, layer_nodes.size(), options.group_size);

    std::vector<int> next_nodes;
    std::vector<std::size_t> next_columns;
    int created = 0;
    for (const auto& group : groups) {
      if (group.size() == 1 && !leaves) {
        next_nodes.push_back(layer_nodes[group[0]]);
        next_columns.push_back(layer_columns[group[0]]);
        continue;
      }
      const int latent = add_latent(s, "Z" + std::to_string(level) + "_" + std::to_string(created++));
      std::vector<std::size_t> member_columns;
      for (std::size_t m : group) {
        s.nodes[layer_nodes[m]].parent = latent;
        member_columns.push_back(layer_columns[m]);
      }
      next_nodes.push_back(latent);
      next_columns.push_back(columns.add_union(member_columns));
    }
    layer_nodes = std::move(next_nodes);
    layer_columns = std::move(next_columns);
  }
  assign_levels(s);
  return s;
}

TreeStructure parse_structure(std::istream& in, const std::string& where, const Vocabulary* vocab) {
  struct Pending {
    std::string parent;
    long line;
  };
  TreeStructure s;
  std::vector<Pending> pending;
  std::unordered_map<std::string, int> index;
  std::unordered_map<std::string, int> file_words;
  if (vocab) s.words.assign(vocab->words().begin(), vocab->words().end());

  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 3 || tok.size() > 4) throw ParseError(where, lineno, "expected 'id parent|- latent|leaf [word]'");

    Node node;
    node.id = tok[0];
    if (tok[2] == "latent") {
      if (tok.size() != 3) throw ParseError(where, lineno, "latent node " + node.id + " cannot carry a word");
      node.kind = NodeKind::latent;
    } else if (tok[2] == "leaf") {
      if (tok.size() != 4) throw ParseError(where, lineno, "leaf node " + node.id + " needs a word");
      node.kind = NodeKind::leaf;
      const std::string& word = tok[3];
      if (vocab) {
        node.word = vocab->find(word);
        if (node.word < 0) throw ParseError(where, lineno, "unknown word '" + word + "'");
      } else {
        auto [it, fresh] = file_words.emplace(word, static_cast<int>(s.words.size()));
        if (fresh) s.words.push_back(word);
        node.word = it->second;
      }
    } else {
      throw ParseError(where, lineno, "node kind must be 'latent' or 'leaf', got '" + tok[2] + "'");
    }
    if (!index.emplace(node.id, static_cast<int>(s.nodes.size())).second) {
      throw ParseError(where, lineno, "duplicate node id '" + node.id + "'");
    }
    pending.push_back({tok[1], lineno});
    s.nodes.push_back(std::move(node));
  }

  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    if (pending[i].parent == "-") continue;
    const auto it = index.find(pending[i].parent);
    if (it == index.end()) throw ParseError(where, pending[i].line, "unknown parent '" + pending[i].parent + "'");
    s.nodes[i].parent = it->second;
  }

  auto report = validate_structure(s);
  if (report.ok()) return s;
  // Levels are derived, not stored in the file.
  if (report.violations.size() > 0) {
    try {
      assign_levels(s);
    } catch (const DataError&) {
      // cycles are reported below
    }
    report = validate_structure(s);
  }
  if (!report.ok()) throw DataError(where + ": invalid structure:\n" + report.to_string());
  return s;
}

TreeStructure load_structure(const std::filesystem::path& path, const Vocabulary* vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_structure(in, path.string(), vocab);
}

void write_structure(const TreeStructure& s, std::ostream& out) {
  out << "# id parent kind [word]\n";
  for (const Node& n : s.nodes) {
    out << n.id << ' ' << (n.parent < 0 ? std::string("-") : s.nodes[n.parent].id) << ' '
        << (n.kind == NodeKind::latent ? "latent" : "leaf");
    if (n.kind == NodeKind::leaf) out << ' ' << s.words[n.word];
    out << '\n';
  }
}

void save_structure(const TreeStructure& structure, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_structure(structure, out);
}

}  // namespace hltmc
