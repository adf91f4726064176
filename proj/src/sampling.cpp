#include "hltmc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hltmc/error.hpp"
#include "hltmc/normal.hpp"

namespace hltmc {

LatentAssignment sample_latents(const HltmcModel& model, Rng& rng) {
  const auto& topo = model.topology();
  const auto& p = model.params();
  LatentAssignment z;
  z.value.assign(topo.num_nodes(), 0);
  for (int u : topo.latents()) {
    const int parent = topo.parent(u);
    const double p1 = parent < 0 ? p.root_prior : p.cpts[u][z.value[parent]][1];
    z.value[u] = bernoulli(rng, p1) ? 1 : 0;
  }
  return z;
}

double sample_truncated_normal(double mu, double sigma, Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("truncated normal requires sigma > 0");
  const double a = (0.0 - mu) / sigma;
  const double b = (1.0 - mu) / sigma;
  const double u = uniform01(rng);
  double standard;
  if (a > 0.0) {
    // Interval entirely in the upper tail: work with survival probabilities.
    const double sa = std_normal_sf(a);
    const double sb = std_normal_sf(b);
    if (sa - sb < 1e-300) throw NumericalError("truncated normal degenerate: mu=" + std::to_string(mu) + " sigma=" + std::to_string(sigma));
    standard = -std_normal_quantile(sa - u * (sa - sb));
  } else {
    const double fa = std_normal_cdf(a);
    const double fb = std_normal_cdf(b);
    if (fb - fa < 1e-300) throw NumericalError("truncated normal degenerate: mu=" + std::to_string(mu) + " sigma=" + std::to_string(sigma));
    standard = std_normal_quantile(fa + u * (fb - fa));
  }
  const double x = mu + sigma * standard;
  return std::clamp(x, kUrfEpsilon, 1.0 - kUrfEpsilon);
}

UrfVector generate_urf(const HltmcModel& model, const LatentAssignment& z, Rng& rng) {
  const auto& topo = model.topology();
  const auto& leaves = model.params().leaves;
  UrfVector x(model.num_words());
  for (std::size_t w = 0; w < x.size(); ++w) {
    const int state = z.value[topo.word_parent(static_cast<int>(w))];
    x[w] = sample_truncated_normal(leaves[w].mu[state], leaves[w].sigma[state], rng);
  }
  return x;
}

RelFreqVector normalize_urf(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += v;
  if (!(sum > 0.0)) throw NumericalError("cannot normalize an all-zero frequency vector");
  RelFreqVector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / sum;
  return y;
}

std::vector<int> sample_multinomial(std::span<const double> y, std::int64_t n, Rng& rng) {
  std::vector<int> counts(y.size(), 0);
  if (n <= 0 || y.empty()) return counts;
  std::vector<double> cumulative(y.size());
  double running = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    running += y[i];
    cumulative[i] = running;
  }
  for (std::int64_t k = 0; k < n; ++k) {
    const double target = uniform01(rng) * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    ++counts[static_cast<std::size_t>(it - cumulative.begin())];
  }
  return counts;
}

GeneratedDocument generate_document(const HltmcModel& model, std::int64_t n, Rng& rng) {
  if (n < 0) throw std::invalid_argument("document length must be non-negative");
  GeneratedDocument doc;
  doc.z = sample_latents(model, rng);
  doc.x = generate_urf(model, doc.z, rng);
  doc.y = normalize_urf(doc.x);
  doc.counts = sample_multinomial(doc.y, n, rng);
  return doc;
}

CountCorpus generate_corpus(const HltmcModel& model, std::span<const std::int64_t> lengths, std::uint64_t seed) {
  CountCorpus corpus;
  for (const auto& w : model.structure().words) corpus.vocab.add(w);
  corpus.docs.resize(lengths.size());
  const auto num_docs = static_cast<std::int64_t>(lengths.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::int64_t d = 0; d < num_docs; ++d) {
    try {
      Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
      const auto doc = generate_document(model, lengths[d], rng);
      corpus.docs[d] = from_dense(doc.counts, std::to_string(d + 1));
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return corpus;
}

}  // namespace hltmc
