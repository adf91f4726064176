#include "hltmc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hltmc/normal.hpp"
#include "hltmc/numeric.hpp"

namespace hltmc {
namespace {

using Pair = std::array<double, 2>;

double lse2(double a, double b) { return log_add(a, b); }

void resize(InferenceWorkspace& ws, std::size_t n) {
  if (ws.lambda.size() != n) {
    ws.leafpart.resize(n);
    ws.lambda.resize(n);
    ws.up.resize(n);
    ws.outside.resize(n);
  }
}

// Leaf log-densities summed per parent, relative to the all-zero document
// baseline so only nonzero entries cost anything.
void fill_leafpart(const HltmcModel& model, const RelFreqDoc& doc, InferenceWorkspace& ws) {
  const auto& topo = model.topology();
  const auto& base = model.log_tables().zero_base;
  const auto& leaves = model.params().leaves;
  for (int u : topo.latents()) ws.leafpart[u] = base[u];
  for (std::size_t k = 0; k < doc.word.size(); ++k) {
    const int w = doc.word[k];
    const double r = doc.value[k];
    auto& lp = ws.leafpart[topo.word_parent(w)];
    for (int z = 0; z < 2; ++z) {
      const double mu = leaves[w].mu[z];
      const double s = leaves[w].sigma[z];
      // log N(r) - log N(0) = -(r^2 - 2 r mu) / (2 s^2)
      lp[z] -= 0.5 * r * (r - 2.0 * mu) / (s * s);
    }
  }
}

// Upward pass. Returns log p(d).
double upward(const HltmcModel& model, InferenceWorkspace& ws, bool normalize) {
  const auto& topo = model.topology();
  const auto& logs = model.log_tables();
  double log_scale = 0.0;
  const auto latents = topo.latents();
  for (auto it = latents.rbegin(); it != latents.rend(); ++it) {
    const int u = *it;
    Pair lam = ws.leafpart[u];
    for (int c : topo.latent_children(u)) {
      for (int z = 0; z < 2; ++z) lam[z] += ws.up[c][z];
    }
    if (normalize) {
      const double m = std::max(lam[0], lam[1]);
      if (std::isfinite(m)) {
        lam[0] -= m;
        lam[1] -= m;
        log_scale += m;
      }
    }
    ws.lambda[u] = lam;
    if (u != topo.root()) {
      const auto& lc = logs.log_cpts[u];
      for (int zp = 0; zp < 2; ++zp) ws.up[u][zp] = lse2(lc[zp][0] + lam[0], lc[zp][1] + lam[1]);
    }
  }
  const int r = topo.root();
  return log_scale + lse2(logs.log_root[0] + ws.lambda[r][0], logs.log_root[1] + ws.lambda[r][1]);
}

Pair normalized(Pair v) {
  const double m = std::max(v[0], v[1]);
  const double a = std::exp(v[0] - m);
  const double b = std::exp(v[1] - m);
  return {a / (a + b), b / (a + b)};
}

}  // namespace

RelFreqDoc RelFreqDoc::from_dense(std::span<const double> dense) {
  RelFreqDoc doc;
  for (std::size_t w = 0; w < dense.size(); ++w) {
    if (!std::isfinite(dense[w])) throw std::invalid_argument("relative frequency must be finite");
    if (dense[w] != 0.0) {
      doc.word.push_back(static_cast<int>(w));
      doc.value.push_back(dense[w]);
    }
  }
  return doc;
}

std::vector<double> RelFreqDoc::to_dense(std::size_t vocab_size) const {
  std::vector<double> dense(vocab_size, 0.0);
  for (std::size_t k = 0; k < word.size(); ++k) dense.at(word[k]) = value[k];
  return dense;
}

double loglik_doc(const HltmcModel& model, const RelFreqDoc& doc, InferenceWorkspace& ws, InferenceOptions options) {
  resize(ws, model.topology().num_nodes());
  fill_leafpart(model, doc, ws);
  return upward(model, ws, options.normalize_messages);
}

double loglik_doc(const HltmcModel& model, const RelFreqDoc& doc) {
  InferenceWorkspace ws;
  return loglik_doc(model, doc, ws);
}

double loglik_doc(const HltmcModel& model, std::span<const double> dense) {
  if (dense.size() != model.num_words()) throw std::invalid_argument("document length does not match vocabulary");
  return loglik_doc(model, RelFreqDoc::from_dense(dense));
}

void posteriors(const HltmcModel& model, const RelFreqDoc& doc, InferenceWorkspace& ws, PosteriorMarginals& out,
                InferenceOptions options) {
  const auto& topo = model.topology();
  const auto& logs = model.log_tables();
  const std::size_t n = topo.num_nodes();
  out.loglik = loglik_doc(model, doc, ws, options);
  out.p1.assign(n, 0.0);
  out.pair.assign(n, Cpt{});

  const int root = topo.root();
  ws.outside[root] = {logs.log_root[0], logs.log_root[1]};
  for (int u : topo.latents()) {
    const Pair post = normalized({ws.outside[u][0] + ws.lambda[u][0], ws.outside[u][1] + ws.lambda[u][1]});
    out.p1[u] = post[1];

    const auto children = topo.latent_children(u);
    if (children.empty()) continue;
    // prefix[k] = sum of upward messages of children before k; the suffix is
    // accumulated on the way back so each child's exclusion avoids subtraction.
    ws.prefix.resize(children.size() + 1);
    ws.prefix[0] = {0.0, 0.0};
    for (std::size_t k = 0; k < children.size(); ++k) {
      for (int z = 0; z < 2; ++z) ws.prefix[k + 1][z] = ws.prefix[k][z] + ws.up[children[k]][z];
    }
    Pair suffix{0.0, 0.0};
    for (std::size_t k = children.size(); k-- > 0;) {
      const int c = children[k];
      Pair excl;
      for (int z = 0; z < 2; ++z) excl[z] = ws.outside[u][z] + ws.leafpart[u][z] + ws.prefix[k][z] + suffix[z];
      if (options.normalize_messages) {
        const double m = std::max(excl[0], excl[1]);
        if (std::isfinite(m)) {
          excl[0] -= m;
          excl[1] -= m;
        }
      }
      const auto& lc = logs.log_cpts[c];
      for (int zc = 0; zc < 2; ++zc) ws.outside[c][zc] = lse2(excl[0] + lc[0][zc], excl[1] + lc[1][zc]);

      double joint[2][2];
      double m = kNegInf;
      for (int zp = 0; zp < 2; ++zp) {
        for (int zc = 0; zc < 2; ++zc) {
          joint[zp][zc] = excl[zp] + lc[zp][zc] + ws.lambda[c][zc];
          m = std::max(m, joint[zp][zc]);
        }
      }
      double total = 0.0;
      for (auto& row : joint) {
        for (double& v : row) {
          v = std::exp(v - m);
          total += v;
        }
      }
      for (int zp = 0; zp < 2; ++zp) {
        for (int zc = 0; zc < 2; ++zc) out.pair[c][zp][zc] = joint[zp][zc] / total;
      }
      for (int z = 0; z < 2; ++z) suffix[z] += ws.up[c][z];
    }
  }
}

PosteriorMarginals posteriors(const HltmcModel& model, const RelFreqDoc& doc, InferenceOptions options) {
  InferenceWorkspace ws;
  PosteriorMarginals out;
  posteriors(model, doc, ws, out, options);
  return out;
}

PosteriorMarginals posteriors(const HltmcModel& model, std::span<const double> dense) {
  if (dense.size() != model.num_words()) throw std::invalid_argument("document length does not match vocabulary");
  return posteriors(model, RelFreqDoc::from_dense(dense));
}

double level1_log_joint_prob(const HltmcModel& model, std::span<const std::uint8_t> z1) {
  const auto& topo = model.topology();
  const auto& logs = model.log_tables();
  if (z1.size() != topo.level1().size()) {
    throw std::invalid_argument("level-1 assignment covers " + std::to_string(z1.size()) + " latents, model has " +
                                std::to_string(topo.level1().size()));
  }
  std::vector<Pair> lambda(topo.num_nodes(), Pair{0.0, 0.0});
  const auto latents = topo.latents();
  for (auto it = latents.rbegin(); it != latents.rend(); ++it) {
    const int u = *it;
    Pair lam{0.0, 0.0};
    const int slot = topo.level1_slot(u);
    if (slot >= 0) lam[1 - z1[slot]] = kNegInf;
    for (int c : topo.latent_children(u)) {
      const auto& lc = logs.log_cpts[c];
      for (int zp = 0; zp < 2; ++zp) lam[zp] += lse2(lc[zp][0] + lambda[c][0], lc[zp][1] + lambda[c][1]);
    }
    lambda[u] = lam;
  }
  const int r = topo.root();
  return lse2(logs.log_root[0] + lambda[r][0], logs.log_root[1] + lambda[r][1]);
}

double level1_joint_prob(const HltmcModel& model, std::span<const std::uint8_t> z1) {
  return std::exp(level1_log_joint_prob(model, z1));
}

double brute_force_loglik(const HltmcModel& model, std::span<const double> dense) {
  const auto& topo = model.topology();
  const auto& logs = model.log_tables();
  const auto& leaves = model.params().leaves;
  const auto latents = topo.latents();
  const std::size_t num_latents = latents.size();
  if (num_latents > static_cast<std::size_t>(kBruteForceMaxLatents)) {
    throw std::invalid_argument("brute-force enumeration refuses more than 16 latents");
  }
  if (dense.size() != model.num_words()) throw std::invalid_argument("document length does not match vocabulary");

  // Leaf evidence per latent and state, evaluated directly.
  std::vector<Pair> leaf_term(topo.num_nodes(), Pair{0.0, 0.0});
  for (std::size_t w = 0; w < dense.size(); ++w) {
    const int parent = topo.word_parent(static_cast<int>(w));
    for (int z = 0; z < 2; ++z) leaf_term[parent][z] += normal_log_pdf(dense[w], leaves[w].mu[z], leaves[w].sigma[z]);
  }

  std::vector<int> slot(topo.num_nodes(), -1);
  for (std::size_t k = 0; k < num_latents; ++k) slot[latents[k]] = static_cast<int>(k);

  std::vector<double> terms;
  terms.reserve(std::size_t{1} << num_latents);
  for (std::uint32_t config = 0; config < (1u << num_latents); ++config) {
    double t = 0.0;
    for (std::size_t k = 0; k < num_latents; ++k) {
      const int u = latents[k];
      const int z = (config >> k) & 1;
      const int parent = topo.parent(u);
      t += parent < 0 ? logs.log_root[z] : logs.log_cpts[u][(config >> slot[parent]) & 1][z];
      t += leaf_term[u][z];
    }
    terms.push_back(t);
  }
  return log_sum_exp(terms);
}

}  // namespace hltmc
