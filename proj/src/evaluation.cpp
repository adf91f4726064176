#include "hltmc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

#include "hltmc/inference.hpp"
#include "hltmc/learning.hpp"
#include "hltmc/numeric.hpp"
#include "hltmc/random.hpp"
#include "hltmc/sampling.hpp"

namespace hltmc {
namespace {

constexpr double kProposalFloor = 1e-12;

// log P(d | y) for y = x / sum(x), touching only the words present in d.
double multinomial_log_prob_urf(const CountDoc& doc, std::span<const double> x, double log_coefficient) {
  double sum = 0.0;
  for (double v : x) sum += v;
  const double log_sum = std::log(sum);
  double total = log_coefficient;
  for (const auto& e : doc.entries) {
    if (x[e.word] <= 0.0) return kNegInf;
    total += e.count * (std::log(x[e.word]) - log_sum);
  }
  return total;
}

double log_coefficient(const CountDoc& doc) {
  double c = std::lgamma(static_cast<double>(doc.length()) + 1.0);
  for (const auto& e : doc.entries) c -= std::lgamma(static_cast<double>(e.count) + 1.0);
  return c;
}

template <class SampleFn>
double chunked_log_mean_exp(int samples, std::uint64_t seed, std::uint64_t key, SampleFn&& sample) {
  const int chunks = (samples + kSampleChunk - 1) / kSampleChunk;
  std::vector<double> weights(static_cast<std::size_t>(samples));
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    try {
      Rng rng = make_rng(sample_stream_seed(seed, key, static_cast<std::uint64_t>(c)));
      const int hi = std::min(samples, (c + 1) * kSampleChunk);
      for (int k = c * kSampleChunk; k < hi; ++k) weights[k] = sample(rng);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return log_mean_exp(weights);
}

void summarize(HeldoutReport& report) {
  const double n = static_cast<double>(report.per_doc.size());
  if (report.per_doc.empty()) return;
  double sum = 0.0;
  for (double v : report.per_doc) sum += v;
  report.mean = sum / n;
  double ss = 0.0;
  for (double v : report.per_doc) ss += (v - report.mean) * (v - report.mean);
  report.std_error = std::sqrt(ss / n) / std::sqrt(n);
}

}  // namespace

void EvalConfig::validate() const {
  if (samples < 1) throw std::invalid_argument("sample count K must be at least 1");
}

std::uint64_t document_key(const CountDoc& doc) {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (const auto& e : doc.entries) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(e.word));
    h = splitmix64(h ^ static_cast<std::uint64_t>(e.count));
  }
  return h;
}

std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t doc_key, std::uint64_t chunk) {
  return derive_seed(seed, doc_key, chunk);
}

double multinomial_log_prob(std::span<const int> counts, std::span<const double> y) {
  if (counts.size() != y.size()) throw std::invalid_argument("count and frequency vectors differ in length");
  long long n = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    if (y[i] <= 0.0) return kNegInf;
    n += counts[i];
    total += counts[i] * std::log(y[i]) - std::lgamma(static_cast<double>(counts[i]) + 1.0);
  }
  return total + std::lgamma(static_cast<double>(n) + 1.0);
}

double multinomial_log_prob(const CountDoc& doc, std::span<const double> y) {
  double total = log_coefficient(doc);
  for (const auto& e : doc.entries) {
    if (static_cast<std::size_t>(e.word) >= y.size()) throw std::invalid_argument("document word outside frequency vector");
    if (y[e.word] <= 0.0) return kNegInf;
    total += e.count * std::log(y[e.word]);
  }
  return total;
}

double naive_mc_loglik(const HltmcModel& model, const CountDoc& doc, const EvalConfig& config) {
  config.validate();
  const double coefficient = log_coefficient(doc);
  return chunked_log_mean_exp(config.samples, config.seed, document_key(doc), [&](Rng& rng) {
    const auto z = sample_latents(model, rng);
    const auto x = generate_urf(model, z, rng);
    return multinomial_log_prob_urf(doc, x, coefficient);
  });
}

double importance_sampling_loglik(const HltmcModel& model, const CountDoc& doc, const EvalConfig& config) {
  config.validate();
  const double n = static_cast<double>(doc.length());
  if (n < 1) throw std::invalid_argument("importance sampling needs a document with at least one word");

  RelFreqDoc df;
  for (const auto& e : doc.entries) {
    df.word.push_back(e.word);
    df.value.push_back(e.count / n);
  }
  const auto post = posteriors(model, df);
  const auto& topo = model.topology();
  const auto level1 = topo.level1();
  std::vector<double> q(level1.size());
  for (std::size_t j = 0; j < level1.size(); ++j) q[j] = std::clamp(post.p1[level1[j]], kProposalFloor, 1.0 - kProposalFloor);

  const double coefficient = log_coefficient(doc);
  return chunked_log_mean_exp(config.samples, config.seed, document_key(doc), [&](Rng& rng) {
    std::vector<std::uint8_t> z1(level1.size());
    LatentAssignment z;
    z.value.assign(topo.num_nodes(), 0);
    double log_q = 0.0;
    for (std::size_t j = 0; j < level1.size(); ++j) {
      z1[j] = bernoulli(rng, q[j]) ? 1 : 0;
      z.value[level1[j]] = z1[j];
      log_q += std::log(z1[j] ? q[j] : 1.0 - q[j]);
    }
    const auto x = generate_urf(model, z, rng);
    return multinomial_log_prob_urf(doc, x, coefficient) + level1_log_joint_prob(model, z1) - log_q;
  });
}

double estimate_loglik(const HltmcModel& model, const CountDoc& doc, const EvalConfig& config) {
  return config.estimator == Estimator::naive ? naive_mc_loglik(model, doc, config)
                                              : importance_sampling_loglik(model, doc, config);
}

HeldoutReport heldout_report_serial(const HltmcModel& model, const CountCorpus& corpus, const EvalConfig& config) {
  config.validate();
  if (corpus.docs.empty()) throw std::invalid_argument("held-out corpus is empty");
  HeldoutReport report;
  for (const auto& doc : corpus.docs) {
    if (doc.length() == 0) {
      ++report.skipped;
      continue;
    }
    report.ids.push_back(doc.id);
    report.per_doc.push_back(estimate_loglik(model, doc, config));
  }
  summarize(report);
  return report;
}

HeldoutReport heldout_report(const HltmcModel& model, const CountCorpus& corpus, const EvalConfig& config) {
  config.validate();
  if (corpus.docs.empty()) throw std::invalid_argument("held-out corpus is empty");
  std::vector<std::size_t> scored;
  HeldoutReport report;
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    if (corpus.docs[d].length() == 0) {
      ++report.skipped;
    } else {
      scored.push_back(d);
    }
  }
  report.per_doc.resize(scored.size());
  const auto n = static_cast<std::int64_t>(scored.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      report.per_doc[i] = estimate_loglik(model, corpus.docs[scored[i]], config);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t d : scored) report.ids.push_back(corpus.docs[d].id);
  summarize(report);
  return report;
}

}  // namespace hltmc
