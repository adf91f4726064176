#include "hltmc/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hltmc/error.hpp"
#include "hltmc/random.hpp"

namespace hltmc {
namespace {

constexpr double kTinyWeight = 1e-200;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::array<double, 2> normalized_pair(Rng& rng) {
  const double a = uniform(rng, 0.2, 0.8);
  const double b = uniform(rng, 0.2, 0.8);
  return {a / (a + b), b / (a + b)};
}

bool converged(double previous, double current, double tolerance) {
  const double change = std::abs(current - previous);
  return change <= tolerance * std::abs(previous) || change < 1e-14;
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  return derive_seed(seed, 0x5eed, static_cast<std::uint64_t>(restart));
}

ParamSet start_params(const TreeStructure& structure, const std::optional<ParamSet>& init,
                      std::span<const RelFreqDoc> docs, const FitConfig& config, int restart) {
  if (restart == 0 && init) return *init;
  return random_init(structure, docs, restart_seed(config.seed, restart), config.sigma_floor);
}

}  // namespace

RelFreqCorpus counts_to_relfreq(const CountCorpus& corpus) {
  if (corpus.docs.empty()) throw DataError("corpus has no documents");
  RelFreqCorpus out;
  out.docs.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    const double n = static_cast<double>(doc.length());
    if (n <= 0) {
      ++out.dropped;
      continue;
    }
    RelFreqDoc d;
    d.word.reserve(doc.entries.size());
    d.value.reserve(doc.entries.size());
    for (const auto& e : doc.entries) {
      d.word.push_back(e.word);
      d.value.push_back(e.count / n);
    }
    out.docs.push_back(std::move(d));
  }
  if (out.docs.empty()) throw DataError("every document in the corpus is empty");
  return out;
}

SufficientStats SufficientStats::zeros(std::size_t num_nodes, std::size_t num_words) {
  SufficientStats s;
  s.node_count.assign(num_nodes, {0.0, 0.0});
  s.pair_count.assign(num_nodes, Cpt{});
  s.leaf_weight.assign(num_words, {0.0, 0.0});
  s.leaf_sum.assign(num_words, {0.0, 0.0});
  s.leaf_sumsq.assign(num_words, {0.0, 0.0});
  return s;
}

SufficientStats& SufficientStats::operator+=(const SufficientStats& o) {
  total_weight += o.total_weight;
  loglik += o.loglik;
  for (std::size_t i = 0; i < node_count.size(); ++i) {
    for (int a = 0; a < 2; ++a) {
      node_count[i][a] += o.node_count[i][a];
      for (int b = 0; b < 2; ++b) pair_count[i][a][b] += o.pair_count[i][a][b];
    }
  }
  for (std::size_t w = 0; w < leaf_weight.size(); ++w) {
    for (int z = 0; z < 2; ++z) {
      leaf_weight[w][z] += o.leaf_weight[w][z];
      leaf_sum[w][z] += o.leaf_sum[w][z];
      leaf_sumsq[w][z] += o.leaf_sumsq[w][z];
    }
  }
  return *this;
}

SufficientStats& SufficientStats::operator*=(double f) {
  total_weight *= f;
  loglik *= f;
  for (std::size_t i = 0; i < node_count.size(); ++i) {
    for (int a = 0; a < 2; ++a) {
      node_count[i][a] *= f;
      for (int b = 0; b < 2; ++b) pair_count[i][a][b] *= f;
    }
  }
  for (std::size_t w = 0; w < leaf_weight.size(); ++w) {
    for (int z = 0; z < 2; ++z) {
      leaf_weight[w][z] *= f;
      leaf_sum[w][z] *= f;
      leaf_sumsq[w][z] *= f;
    }
  }
  return *this;
}

ParamSet m_step(const HltmcModel& previous, const SufficientStats& s, double sigma_floor) {
  const auto& topo = previous.topology();
  ParamSet p = previous.params();
  if (!(s.total_weight > 0.0)) throw std::invalid_argument("M-step needs positive total weight");

  const int root = topo.root();
  p.root_prior = std::clamp(s.node_count[root][1] / s.total_weight, 0.0, 1.0);
  for (int u : topo.latents()) {
    if (u == root) continue;
    for (int a = 0; a < 2; ++a) {
      const double row = s.pair_count[u][a][0] + s.pair_count[u][a][1];
      if (row < kTinyWeight) continue;
      p.cpts[u][a][1] = s.pair_count[u][a][1] / row;
      p.cpts[u][a][0] = 1.0 - p.cpts[u][a][1];
    }
  }
  for (std::size_t w = 0; w < p.leaves.size(); ++w) {
    for (int z = 0; z < 2; ++z) {
      const double weight = s.leaf_weight[w][z];
      if (weight < kTinyWeight) continue;
      const double mu = s.leaf_sum[w][z] / weight;
      const double var = s.leaf_sumsq[w][z] / weight - mu * mu;
      p.leaves[w].mu[z] = mu;
      p.leaves[w].sigma[z] = std::max(sigma_floor, std::sqrt(std::max(var, 0.0)));
    }
  }
  return p;
}

std::size_t count_floored_sigmas(const ParamSet& params, double sigma_floor) {
  std::size_t n = 0;
  for (const auto& leaf : params.leaves) {
    for (double s : leaf.sigma) n += s <= sigma_floor;
  }
  return n;
}

void FitConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(sigma_floor > 0.0)) throw std::invalid_argument("sigma_floor must be positive");
  if (restarts < 1) throw std::invalid_argument("restarts must be positive");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (!(step_exponent > 0.5 && step_exponent <= 1.0)) throw std::invalid_argument("step exponent must lie in (0.5, 1]");
}

ParamSet random_init(const TreeStructure& structure, std::span<const RelFreqDoc> docs, std::uint64_t seed,
                     double sigma_floor) {
  const std::size_t vocab = structure.num_words();
  std::vector<double> sum(vocab, 0.0), sumsq(vocab, 0.0);
  for (const auto& doc : docs) {
    for (std::size_t k = 0; k < doc.word.size(); ++k) {
      sum[doc.word[k]] += doc.value[k];
      sumsq[doc.word[k]] += doc.value[k] * doc.value[k];
    }
  }
  const double n = std::max<double>(1.0, static_cast<double>(docs.size()));

  Rng rng = make_rng(seed);
  ParamSet p;
  p.root_prior = normalized_pair(rng)[1];
  p.cpts.assign(structure.nodes.size(), kUniformCpt);
  for (std::size_t i = 0; i < structure.nodes.size(); ++i) {
    const Node& node = structure.nodes[i];
    if (node.kind != NodeKind::latent || node.parent < 0) continue;
    for (int a = 0; a < 2; ++a) {
      const auto row = normalized_pair(rng);
      p.cpts[i][a] = {1.0 - row[1], row[1]};
    }
  }
  p.leaves.resize(vocab);
  for (std::size_t w = 0; w < vocab; ++w) {
    const double mean = sum[w] / n;
    const double sd = std::sqrt(std::max(0.0, sumsq[w] / n - mean * mean));
    for (int z = 0; z < 2; ++z) {
      p.leaves[w].mu[z] = mean * uniform(rng, 0.5, 1.5);
      p.leaves[w].sigma[z] = std::max(sigma_floor, sd);
    }
  }
  return p;
}

double mean_loglik(const HltmcModel& model, std::span<const RelFreqDoc> docs) {
  std::vector<double> ll(docs.size());
  const auto n = static_cast<std::int64_t>(docs.size());
#pragma omp parallel
  {
    InferenceWorkspace ws;
#pragma omp for schedule(static)
    for (std::int64_t d = 0; d < n; ++d) ll[d] = loglik_doc(model, docs[d], ws);
  }
  return std::accumulate(ll.begin(), ll.end(), 0.0) / static_cast<double>(std::max<std::size_t>(1, docs.size()));
}

FitResult em_fit(const TreeStructure& structure, const std::optional<ParamSet>& init, std::span<const RelFreqDoc> docs,
                 const FitConfig& config, const TraceCallback& on_trace) {
  config.validate();
  if (docs.empty()) throw DataError("EM needs at least one document");
  const auto start = Clock::now();
  const double num_docs = static_cast<double>(docs.size());

  FitResult best;
  best.per_doc_loglik = -std::numeric_limits<double>::infinity();
  std::vector<TraceEntry> trace;
  for (int restart = 0; restart < config.restarts; ++restart) {
    HltmcModel model(structure, start_params(structure, init, docs, config, restart), config.sigma_floor);
    double previous = 0.0;
    double current = 0.0;
    for (int it = 0;; ++it) {
      const auto stats = e_step(model, docs);
      current = stats.loglik / num_docs;
      TraceEntry entry{restart, it, current, seconds_since(start), count_floored_sigmas(model.params(), config.sigma_floor)};
      trace.push_back(entry);
      if (on_trace) on_trace(entry);
      if ((it > 0 && converged(previous, current, config.tolerance)) || it == config.max_iters) break;
      previous = current;
      model = HltmcModel(structure, m_step(model, stats, config.sigma_floor), config.sigma_floor);
    }
    if (current > best.per_doc_loglik || restart == 0) {
      best.params = model.params();
      best.per_doc_loglik = current;
      best.best_restart = restart;
    }
  }
  best.trace = std::move(trace);
  return best;
}

FitResult stepwise_em_fit(const TreeStructure& structure, const std::optional<ParamSet>& init,
                          std::span<const RelFreqDoc> docs, const FitConfig& config, const TraceCallback& on_trace) {
  config.validate();
  if (docs.empty()) throw DataError("stepwise EM needs at least one document");
  const auto start = Clock::now();
  const std::size_t num_docs = docs.size();
  const std::size_t batch_size = std::min(config.minibatch, num_docs);

  FitResult best;
  best.per_doc_loglik = -std::numeric_limits<double>::infinity();
  std::vector<TraceEntry> trace;
  std::vector<RelFreqDoc> batch;
  for (int restart = 0; restart < config.restarts; ++restart) {
    HltmcModel model(structure, start_params(structure, init, docs, config, restart), config.sigma_floor);
    Rng rng = make_rng(derive_seed(config.seed, 0x57e9, static_cast<std::uint64_t>(restart)));
    std::vector<std::size_t> order(num_docs);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::optional<SufficientStats> running;
    int step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      shuffle(std::span<std::size_t>(order), rng);
      for (std::size_t lo = 0; lo < num_docs; lo += batch_size) {
        const std::size_t hi = std::min(num_docs, lo + batch_size);
        batch.clear();
        for (std::size_t i = lo; i < hi; ++i) batch.push_back(docs[order[i]]);

        auto stats = e_step(model, batch);
        stats *= 1.0 / static_cast<double>(hi - lo);
        const double batch_loglik = stats.loglik;
        const double eta = std::pow(static_cast<double>(step) + 2.0, -config.step_exponent);
        if (!running) {
          running = std::move(stats);
        } else {
          *running *= 1.0 - eta;
          stats *= eta;
          *running += stats;
        }
        TraceEntry entry{restart, step, batch_loglik, seconds_since(start), count_floored_sigmas(model.params(), config.sigma_floor)};
        trace.push_back(entry);
        if (on_trace) on_trace(entry);
        model = HltmcModel(structure, m_step(model, *running, config.sigma_floor), config.sigma_floor);
        ++step;
      }
    }
    const double full = mean_loglik(model, docs);
    TraceEntry final_entry{restart, step, full, seconds_since(start), count_floored_sigmas(model.params(), config.sigma_floor)};
    trace.push_back(final_entry);
    if (on_trace) on_trace(final_entry);
    if (full > best.per_doc_loglik || restart == 0) {
      best.params = model.params();
      best.per_doc_loglik = full;
      best.best_restart = restart;
    }
  }
  best.trace = std::move(trace);
  return best;
}

ParamSet relabel_states(const HltmcModel& model) {
  const auto& topo = model.topology();
  ParamSet p = model.params();
  std::vector<std::array<double, 2>> score(topo.num_nodes(), {0.0, 0.0});
  const auto latents = topo.latents();
  for (auto it = latents.rbegin(); it != latents.rend(); ++it) {
    const int u = *it;
    std::array<double, 2> sc{0.0, 0.0};
    for (int w : topo.leaf_words(u)) {
      for (int s = 0; s < 2; ++s) sc[s] += p.leaves[w].mu[s];
    }
    for (int c : topo.latent_children(u)) {
      for (int s = 0; s < 2; ++s) sc[s] += p.cpts[c][s][0] * score[c][0] + p.cpts[c][s][1] * score[c][1];
    }
    if (sc[0] > sc[1]) {
      std::swap(sc[0], sc[1]);
      for (int w : topo.leaf_words(u)) {
        std::swap(p.leaves[w].mu[0], p.leaves[w].mu[1]);
        std::swap(p.leaves[w].sigma[0], p.leaves[w].sigma[1]);
      }
      for (int c : topo.latent_children(u)) std::swap(p.cpts[c][0], p.cpts[c][1]);
      if (u == topo.root()) {
        p.root_prior = 1.0 - p.root_prior;
      } else {
        for (auto& row : p.cpts[u]) std::swap(row[0], row[1]);
      }
    }
    score[u] = sc;
  }
  return p;
}

}  // namespace hltmc
