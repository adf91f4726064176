#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fixtures {

int TreeBuilder::latent(const std::string& id, int parent) {
  s_.nodes.push_back({id, NodeKind::latent, parent, 0, -1});
  return static_cast<int>(s_.nodes.size() - 1);
}

int TreeBuilder::leaf(const std::string& word, int parent) {
  const int w = static_cast<int>(s_.words.size());
  s_.words.push_back(word);
  s_.nodes.push_back({"x_" + word, NodeKind::leaf, parent, 0, w});
  return static_cast<int>(s_.nodes.size() - 1);
}

TreeStructure TreeBuilder::build() {
  assign_levels(s_);
  return s_;
}

TreeStructure space_structure() {
  TreeBuilder b;
  const int z21 = b.latent("z21");
  const int z11 = b.latent("z11", z21);
  const int z12 = b.latent("z12", z21);
  const int z13 = b.latent("z13", z21);
  for (const char* w : {"nasa", "space", "shuttle"}) b.leaf(w, z11);
  for (const char* w : {"orbit", "earth"}) b.leaf(w, z12);
  for (const char* w : {"moon", "mission"}) b.leaf(w, z13);
  return b.build();
}

ParamSet space_params() {
  const TreeStructure s = space_structure();
  ParamSet p;
  p.root_prior = 0.24;
  p.cpts.assign(s.nodes.size(), kUniformCpt);
  p.cpts[1] = Cpt{{{0.9, 0.1}, {0.2, 0.8}}};
  p.cpts[2] = Cpt{{{0.85, 0.15}, {0.3, 0.7}}};
  p.cpts[3] = Cpt{{{0.95, 0.05}, {0.4, 0.6}}};
  p.leaves.resize(s.num_words());
  for (std::size_t w = 0; w < s.num_words(); ++w) {
    const double base = 0.02 + 0.01 * static_cast<double>(w);
    p.leaves[w] = {{base, base + 0.08}, {0.02, 0.03}};
  }
  return p;
}

TreeStructure star_structure(int leaves) {
  TreeBuilder b;
  const int z = b.latent("z");
  for (int i = 0; i < leaves; ++i) b.leaf("w" + std::to_string(i), z);
  return b.build();
}

TreeStructure random_structure(Rng& rng, int max_latents, int max_leaves, bool branching) {
  const int latents = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_latents)));
  std::vector<int> latent_parent(latents, -1);
  std::vector<int> kids(latents, 0);
  for (int k = 1; k < latents; ++k) {
    latent_parent[k] = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k)));
    ++kids[latent_parent[k]];
  }
  const int wanted = branching ? 2 : 1;
  std::vector<int> leaf_parent;
  for (int k = 0; k < latents; ++k) {
    for (int c = kids[k]; c < wanted; ++c) leaf_parent.push_back(k);
  }
  const int min_leaves = static_cast<int>(leaf_parent.size());
  const int extra = max_leaves > min_leaves
                        ? static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_leaves - min_leaves + 1)))
                        : 0;
  const int leaves = min_leaves + extra;
  while (static_cast<int>(leaf_parent.size()) < leaves) {
    leaf_parent.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(latents))));
  }

  // Shuffle node positions and word indices.
  const int total = latents + leaves;
  std::vector<int> position(total);
  for (int i = 0; i < total; ++i) position[i] = i;
  shuffle(std::span<int>(position), rng);
  std::vector<int> word_of(leaves);
  for (int i = 0; i < leaves; ++i) word_of[i] = i;
  shuffle(std::span<int>(word_of), rng);

  TreeStructure s;
  s.nodes.resize(total);
  s.words.resize(leaves);
  for (int k = 0; k < latents; ++k) {
    Node& n = s.nodes[position[k]];
    n.id = "z" + std::to_string(k);
    n.kind = NodeKind::latent;
    n.parent = latent_parent[k] < 0 ? -1 : position[latent_parent[k]];
  }
  for (int i = 0; i < leaves; ++i) {
    Node& n = s.nodes[position[latents + i]];
    n.id = "v" + std::to_string(i);
    n.kind = NodeKind::leaf;
    n.parent = position[leaf_parent[i]];
    n.word = word_of[i];
    s.words[word_of[i]] = "word" + std::to_string(word_of[i]);
  }
  assign_levels(s);
  return s;
}

ParamSet random_params(const TreeStructure& s, Rng& rng) {
  ParamSet p;
  p.root_prior = uniform(rng, 0.05, 0.95);
  p.cpts.assign(s.nodes.size(), kUniformCpt);
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    if (s.nodes[i].kind != NodeKind::latent || s.nodes[i].parent < 0) continue;
    for (int zp = 0; zp < 2; ++zp) {
      const double q = uniform(rng, 0.05, 0.95);
      p.cpts[i][zp] = {1.0 - q, q};
    }
  }
  p.leaves.resize(s.num_words());
  for (auto& lp : p.leaves) {
    for (int z = 0; z < 2; ++z) {
      lp.mu[z] = uniform(rng, 0.0, 0.3);
      lp.sigma[z] = uniform(rng, 0.02, 0.2);
    }
  }
  return p;
}

HltmcModel random_model(std::uint64_t seed, int max_latents, int max_leaves) {
  Rng rng = make_rng(seed);
  TreeStructure s = random_structure(rng, max_latents, max_leaves);
  ParamSet p = random_params(s, rng);
  return HltmcModel(std::move(s), std::move(p));
}

std::vector<double> random_relfreq(std::size_t v, Rng& rng) {
  std::vector<double> r(v, 0.0);
  double sum = 0.0;
  for (auto& x : r) {
    if (uniform01(rng) < 0.33) continue;
    x = -std::log(uniform01(rng));
    sum += x;
  }
  if (sum == 0.0) {
    r[0] = 1.0;
    return r;
  }
  for (auto& x : r) x /= sum;
  return r;
}

namespace {

double log_gauss(double r, double mu, double sigma) {
  const double z = (r - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

Enumeration enumerate(const HltmcModel& model, const std::vector<double>& r) {
  const auto& s = model.structure();
  const auto& p = model.params();
  Enumeration e;
  for (std::size_t i = 0; i < s.nodes.size(); ++i) {
    if (s.nodes[i].kind == NodeKind::latent) e.latents.push_back(static_cast<int>(i));
  }
  const std::size_t l = e.latents.size();
  std::vector<int> slot(s.nodes.size(), -1);
  for (std::size_t k = 0; k < l; ++k) slot[e.latents[k]] = static_cast<int>(k);

  const std::size_t configs = std::size_t{1} << l;
  std::vector<double> logw(configs);
  e.configs.resize(configs * l);
  e.log_prior.resize(configs);
  for (std::size_t c = 0; c < configs; ++c) {
    auto state = [&](int node) { return static_cast<int>((c >> slot[node]) & 1U); };
    double lp = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
      const int node = e.latents[k];
      e.configs[c * l + k] = static_cast<std::uint8_t>(state(node));
      const int parent = s.nodes[node].parent;
      if (parent < 0) {
        lp += std::log(state(node) ? p.root_prior : 1.0 - p.root_prior);
      } else {
        lp += std::log(p.cpts[node][state(parent)][state(node)]);
      }
    }
    e.log_prior[c] = lp;
    double ll = lp;
    for (const Node& n : s.nodes) {
      if (n.kind != NodeKind::leaf) continue;
      const int z = state(n.parent);
      ll += log_gauss(r[n.word], p.leaves[n.word].mu[z], p.leaves[n.word].sigma[z]);
    }
    logw[c] = ll;
  }
  const double m = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double v : logw) total += std::exp(v - m);
  e.loglik = m + std::log(total);

  e.p1.assign(s.nodes.size(), 0.0);
  e.pair.assign(s.nodes.size(), {});
  for (std::size_t c = 0; c < configs; ++c) {
    const double w = std::exp(logw[c] - e.loglik);
    for (std::size_t k = 0; k < l; ++k) {
      const int node = e.latents[k];
      const int z = static_cast<int>((c >> k) & 1U);
      if (z) e.p1[node] += w;
      const int parent = s.nodes[node].parent;
      if (parent >= 0) e.pair[node][(c >> slot[parent]) & 1U][z] += w;
    }
  }
  return e;
}

double Enumeration::level1_marginal(const std::vector<int>& level1, const std::vector<std::uint8_t>& z) const {
  const std::size_t l = latents.size();
  double total = 0.0;
  for (std::size_t c = 0; c < log_prior.size(); ++c) {
    bool match = true;
    for (std::size_t j = 0; j < level1.size() && match; ++j) {
      const auto k = static_cast<std::size_t>(std::find(latents.begin(), latents.end(), level1[j]) - latents.begin());
      match = configs[c * l + k] == z[j];
    }
    if (match) total += std::exp(log_prior[c]);
  }
  return total;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

double log_factorial(int n) {
  double s = 0.0;
  for (int k = 2; k <= n; ++k) s += std::log(static_cast<double>(k));
  return s;
}

CountCorpus dense_corpus(const std::vector<std::vector<int>>& rows, std::vector<std::string> words) {
  const std::size_t v = rows.empty() ? words.size() : rows.front().size();
  if (words.empty()) {
    for (std::size_t w = 0; w < v; ++w) words.push_back("w" + std::to_string(w));
  }
  CountCorpus c;
  c.vocab = Vocabulary(std::move(words));
  for (std::size_t d = 0; d < rows.size(); ++d) c.docs.push_back(from_dense(rows[d], std::to_string(d + 1)));
  return c;
}

}  // namespace fixtures
