#include "hltmc/topics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hltmc/error.hpp"

namespace hltmc {
namespace {

using nlohmann::json;

bool parse_double(const std::string& token, double& out) {
  const char* begin = token.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

bool parse_count(const std::string& token, std::size_t& out) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return false;
  }
  out = std::stoull(token);
  return true;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

Embeddings parse_text_embeddings(const std::string& data, std::size_t start, const std::string& where) {
  Embeddings table;
  std::istringstream in(data.substr(start));
  std::string line;
  long lineno = start == 0 ? 0 : 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 2) throw ParseError(where, lineno, "embedding line needs a word and values");
    std::vector<double> v(tok.size() - 1);
    for (std::size_t k = 1; k < tok.size(); ++k) {
      if (!parse_double(tok[k], v[k - 1])) throw ParseError(where, lineno, "bad embedding value '" + tok[k] + "'");
    }
    if (table.size() > 0 && v.size() != table.dim()) throw ParseError(where, lineno, "embedding dimension mismatch");
    table.add(tok[0], std::move(v));
  }
  return table;
}

Embeddings parse_binary_embeddings(const std::string& data, std::size_t pos, std::size_t count, std::size_t dim,
                                   const std::string& where) {
  static_assert(sizeof(float) == 4);
  Embeddings table;
  for (std::size_t n = 0; n < count; ++n) {
    while (pos < data.size() && (data[pos] == '\n' || data[pos] == ' ' || data[pos] == '\r')) ++pos;
    const std::size_t space = data.find(' ', pos);
    if (space == std::string::npos) throw DataError(where + ": truncated binary embeddings at entry " + std::to_string(n));
    std::string word = data.substr(pos, space - pos);
    pos = space + 1;
    if (pos + 4 * dim > data.size()) throw DataError(where + ": truncated vector for '" + word + "'");
    std::vector<double> v(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      float f;
      std::memcpy(&f, data.data() + pos + 4 * k, 4);
      v[k] = f;
    }
    pos += 4 * dim;
    table.add(std::move(word), std::move(v));
  }
  return table;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

json topic_json(const Topic& t) {
  json words = json::array();
  for (const auto& w : t.words) {
    words.push_back({{"word", w.text}, {"mu_topic", w.mu_topic}, {"mu_background", w.mu_background},
                     {"difference", w.difference}});
  }
  return {{"id", t.id}, {"level", t.level}, {"size", t.size}, {"words", words}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Topic extract_topic(const HltmcModel& model, int node, std::size_t max_words) {
  const auto& s = model.structure();
  if (node < 0 || static_cast<std::size_t>(node) >= s.nodes.size() || s.nodes[node].kind != NodeKind::latent) {
    throw std::invalid_argument("not a latent node index: " + std::to_string(node));
  }
  const auto& leaves = model.params().leaves;
  Topic topic;
  topic.node = node;
  topic.id = s.nodes[node].id;
  topic.level = s.nodes[node].level;
  topic.size = prior_marginals(model)[node];
  for (int w : model.topology().subtree_words(node)) {
    const auto& lp = leaves[w];
    topic.words.push_back({w, s.words[w], lp.mu[1], lp.mu[0], std::abs(lp.mu[1] - lp.mu[0])});
  }
  std::stable_sort(topic.words.begin(), topic.words.end(),
                   [](const TopicWord& a, const TopicWord& b) { return a.difference > b.difference; });
  if (topic.words.size() > max_words) topic.words.resize(max_words);
  return topic;
}

Topic extract_topic(const HltmcModel& model, std::string_view latent_id, std::size_t max_words) {
  const int node = model.structure().find(latent_id);
  if (node < 0 || model.structure().nodes[node].kind != NodeKind::latent) {
    throw std::invalid_argument("unknown latent id '" + std::string(latent_id) + "'");
  }
  return extract_topic(model, node, max_words);
}

TopicTree extract_hierarchy(const HltmcModel& model, std::size_t max_words) {
  const auto& topo = model.topology();
  const auto& s = model.structure();
  std::vector<int> preorder;
  std::vector<int> stack{topo.root()};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    preorder.push_back(u);
    const auto kids = topo.latent_children(u);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  std::vector<int> position(s.nodes.size(), -1);
  for (std::size_t k = 0; k < preorder.size(); ++k) position[preorder[k]] = static_cast<int>(k);

  std::vector<int> order = preorder;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return s.nodes[a].level > s.nodes[b].level; });

  TopicTree tree;
  std::vector<int> slot(s.nodes.size(), -1);
  tree.topics.resize(order.size());
  for (std::size_t t = 0; t < order.size(); ++t) slot[order[t]] = static_cast<int>(t);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < order.size(); ++t) tree.topics[t] = extract_topic(model, order[t], max_words);
  tree.parent.resize(order.size());
  for (std::size_t t = 0; t < order.size(); ++t) {
    const int p = topo.parent(order[t]);
    tree.parent[t] = p < 0 ? -1 : slot[p];
  }
  return tree;
}

std::string format_topic_tree(const TopicTree& tree) {
  std::vector<std::vector<int>> children(tree.topics.size());
  std::vector<int> roots;
  for (std::size_t t = 0; t < tree.topics.size(); ++t) {
    if (tree.parent[t] < 0) {
      roots.push_back(static_cast<int>(t));
    } else {
      children[tree.parent[t]].push_back(static_cast<int>(t));
    }
  }
  std::ostringstream out;
  out << std::fixed;
  auto emit = [&](auto&& self, int t, int depth) -> void {
    const Topic& topic = tree.topics[t];
    out << std::string(2 * depth, ' ') << topic.id << " [" << std::setprecision(2) << topic.size << "]";
    for (const auto& w : topic.words) out << ' ' << w.text;
    out << '\n';
    for (int c : children[t]) self(self, c, depth + 1);
  };
  for (int r : roots) emit(emit, r, 0);
  return out.str();
}

std::string topic_tree_json(const TopicTree& tree) {
  json topics = json::array();
  for (std::size_t t = 0; t < tree.topics.size(); ++t) {
    json j = topic_json(tree.topics[t]);
    j["parent"] = tree.parent[t] < 0 ? json(nullptr) : json(tree.topics[tree.parent[t]].id);
    topics.push_back(std::move(j));
  }
  return json{{"topics", topics}}.dump(2);
}

CoherenceResult coherence(std::span<const int> words, const IndicatorColumns& documents) {
  for (int w : words) {
    if (w < 0 || static_cast<std::size_t>(w) >= documents.size()) {
      throw std::invalid_argument("coherence word index out of range: " + std::to_string(w));
    }
  }
  CoherenceResult result;
  for (std::size_t i = 1; i < words.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const auto dj = documents.ones(words[j]);
      if (dj == 0) {
        ++result.skipped;
        continue;
      }
      const auto dij = documents.both(words[i], words[j]);
      result.score += std::log((static_cast<double>(dij) + 1.0) / static_cast<double>(dj));
    }
  }
  return result;
}

CoherenceResult coherence(std::span<const std::string> words, const CountCorpus& corpus) {
  std::vector<int> idx;
  for (const auto& w : words) {
    const int i = corpus.vocab.find(w);
    if (i < 0) throw DataError("word not in vocabulary: '" + w + "'");
    idx.push_back(i);
  }
  return coherence(idx, IndicatorColumns(binarize(corpus)));
}

void Embeddings::add(std::string word, std::vector<double> vector) {
  if (vectors_.empty()) {
    dim_ = vector.size();
  } else if (vector.size() != dim_) {
    throw DataError("embedding for '" + word + "' has dimension " + std::to_string(vector.size()) + ", expected " +
                    std::to_string(dim_));
  }
  vectors_.insert_or_assign(std::move(word), std::move(vector));
}

const std::vector<double>* Embeddings::find(std::string_view word) const {
  const auto it = vectors_.find(std::string(word));
  return it == vectors_.end() ? nullptr : &it->second;
}

Embeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string where = path.string();

  const std::size_t eol = data.find('\n');
  const std::string first = data.substr(0, eol);
  const auto head = split_ws(first);
  std::size_t count = 0, dim = 0;
  if (head.size() != 2 || !parse_count(head[0], count) || !parse_count(head[1], dim)) {
    return parse_text_embeddings(data, 0, where);
  }
  if (eol == std::string::npos) return Embeddings{};
  const std::size_t body = eol + 1;
  const std::size_t next_eol = data.find('\n', body);
  const auto probe = split_ws(data.substr(body, next_eol == std::string::npos ? std::string::npos : next_eol - body));
  bool text = count == 0 || probe.size() == dim + 1;
  for (std::size_t k = 1; text && k < probe.size(); ++k) {
    double v;
    text = parse_double(probe[k], v);
  }
  return text ? parse_text_embeddings(data, body, where) : parse_binary_embeddings(data, body, count, dim, where);
}

std::optional<double> compactness(std::span<const std::string> words, const Embeddings& embeddings) {
  std::vector<const std::vector<double>*> kept;
  std::vector<double> norms;
  for (const auto& w : words) {
    const auto* v = embeddings.find(w);
    if (!v) continue;
    const double n = norm(*v);
    if (n == 0.0) continue;
    kept.push_back(v);
    norms.push_back(n);
  }
  const std::size_t m = kept.size();
  if (m < 2) return std::nullopt;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < kept[i]->size(); ++k) dot += (*kept[i])[k] * (*kept[j])[k];
      total += dot / (norms[i] * norms[j]);
    }
  }
  return 2.0 * total / (static_cast<double>(m) * static_cast<double>(m - 1));
}

ScoreReport score_report(const TopicTree& tree, const CountCorpus& corpus, const Embeddings* embeddings,
                         std::size_t max_words) {
  const IndicatorColumns documents(binarize(corpus));
  ScoreReport report;
  report.topics.resize(tree.topics.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < tree.topics.size(); ++t) {
    const Topic& topic = tree.topics[t];
    const std::size_t m = std::min(max_words, topic.words.size());
    std::vector<int> idx;
    std::vector<std::string> text;
    for (std::size_t k = 0; k < m; ++k) {
      idx.push_back(topic.words[k].word);
      text.push_back(topic.words[k].text);
    }
    TopicScore score;
    score.id = topic.id;
    score.level = topic.level;
    const auto c = coherence(idx, documents);
    score.coherence = c.score;
    score.coherence_skipped = c.skipped;
    if (embeddings) score.compactness = compactness(text, *embeddings);
    report.topics[t] = std::move(score);
  }

  struct Acc {
    std::size_t n = 0, defined = 0, undefined = 0;
    double coherence = 0.0, compactness = 0.0;
    void add(const TopicScore& s, bool with_embeddings) {
      ++n;
      coherence += s.coherence;
      if (s.compactness) {
        ++defined;
        compactness += *s.compactness;
      } else if (with_embeddings) {
        ++undefined;
      }
    }
  };
  Acc all;
  std::map<int, Acc> levels;
  for (const auto& s : report.topics) {
    all.add(s, embeddings != nullptr);
    levels[s.level].add(s, embeddings != nullptr);
  }
  auto finish = [](const Acc& a, double& mean_coh, std::optional<double>& mean_comp) {
    mean_coh = a.n ? a.coherence / static_cast<double>(a.n) : 0.0;
    if (a.defined) mean_comp = a.compactness / static_cast<double>(a.defined);
  };
  finish(all, report.mean_coherence, report.mean_compactness);
  report.undefined_compactness = all.undefined;
  for (const auto& [level, acc] : levels) {
    LevelScore ls;
    ls.topics = acc.n;
    ls.undefined_compactness = acc.undefined;
    finish(acc, ls.mean_coherence, ls.mean_compactness);
    report.per_level[level] = ls;
  }
  return report;
}

std::string format_score_report(const ScoreReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  auto comp = [](const std::optional<double>& v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4);
    if (v) {
      s << *v;
    } else {
      s << "n/a";
    }
    return s.str();
  };
  out << "topic\tlevel\tcoherence\tcompactness\n";
  for (const auto& t : report.topics) {
    out << t.id << '\t' << t.level << '\t' << t.coherence << '\t' << comp(t.compactness) << '\n';
  }
  out << "average coherence (unweighted, " << report.topics.size() << " topics): " << report.mean_coherence << '\n';
  out << "average compactness: " << comp(report.mean_compactness) << " (undefined for "
      << report.undefined_compactness << " topics)\n";
  for (auto it = report.per_level.rbegin(); it != report.per_level.rend(); ++it) {
    out << "level " << it->first << ": " << it->second.topics << " topics, coherence " << it->second.mean_coherence
        << ", compactness " << comp(it->second.mean_compactness) << '\n';
  }
  return out.str();
}

std::string score_report_json(const ScoreReport& report) {
  json topics = json::array();
  for (const auto& t : report.topics) {
    topics.push_back({{"id", t.id},
                      {"level", t.level},
                      {"coherence", t.coherence},
                      {"coherence_skipped", t.coherence_skipped},
                      {"compactness", optional_json(t.compactness)}});
  }
  json levels = json::object();
  for (const auto& [level, ls] : report.per_level) {
    levels[std::to_string(level)] = {{"topics", ls.topics},
                                     {"mean_coherence", ls.mean_coherence},
                                     {"mean_compactness", optional_json(ls.mean_compactness)},
                                     {"undefined_compactness", ls.undefined_compactness}};
  }
  return json{{"topics", topics},
              {"mean_coherence", report.mean_coherence},
              {"mean_compactness", optional_json(report.mean_compactness)},
              {"undefined_compactness", report.undefined_compactness},
              {"per_level", levels}}
      .dump(2);
}

}  // namespace hltmc
