#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hltmc/corpus.hpp"
#include "hltmc/model.hpp"

namespace hltmc {

enum class Estimator { naive, importance };

struct EvalConfig {
  int samples = 300;  // K
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::importance;

  void validate() const;
};

/// Samples are drawn in chunks of this size; chunk j of a document uses the
/// stream sample_stream_seed(seed, document_key(doc), j). Estimates depend only
/// on (seed, K, document), never on worker count or corpus position.
inline constexpr int kSampleChunk = 32;

std::uint64_t document_key(const CountDoc& doc);
std::uint64_t sample_stream_seed(std::uint64_t seed, std::uint64_t doc_key, std::uint64_t chunk);

/// log of N!/(prod N_i!) * prod y_i^N_i. Returns -inf when some y_i = 0 has
/// N_i > 0. Throws std::invalid_argument on length mismatch.
double multinomial_log_prob(std::span<const int> counts, std::span<const double> y);
double multinomial_log_prob(const CountDoc& doc, std::span<const double> y);

/// Prior-sampling estimate: log-mean-exp of log P(d | y_k) with y_k drawn by
/// the full generation process.
double naive_mc_loglik(const HltmcModel& model, const CountDoc& doc, const EvalConfig& config);

/// Importance sampling over level-1 latents with the factored proposal built
/// from their posterior marginals under M_a given d_f = c / N. Requires N >= 1.
double importance_sampling_loglik(const HltmcModel& model, const CountDoc& doc, const EvalConfig& config);

double estimate_loglik(const HltmcModel& model, const CountDoc& doc, const EvalConfig& config);

struct HeldoutReport {
  std::vector<std::string> ids;
  std::vector<double> per_doc;  // estimate per scored document
  double mean = 0.0;
  double std_error = 0.0;       // population std-dev of per_doc / sqrt(count)
  std::size_t skipped = 0;      // zero-length documents
};

/// Scores every non-empty document; parallel across documents.
HeldoutReport heldout_report(const HltmcModel& model, const CountCorpus& corpus, const EvalConfig& config);
HeldoutReport heldout_report_serial(const HltmcModel& model, const CountCorpus& corpus, const EvalConfig& config);

}  // namespace hltmc
