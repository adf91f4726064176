#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hltmc/corpus.hpp"
#include "hltmc/inference.hpp"
#include "hltmc/model.hpp"

namespace hltmc {

struct RelFreqCorpus {
  std::vector<RelFreqDoc> docs;
  std::size_t dropped = 0;  // zero-length documents skipped
};

/// d_f = (N_1/N, ..., N_V/N) per document. Zero-length documents are dropped
/// and counted. Throws DataError when no document survives.
RelFreqCorpus counts_to_relfreq(const CountCorpus& corpus);

/// Expected sufficient statistics of M_a over a batch of documents.
struct SufficientStats {
  double total_weight = 0.0;
  double loglik = 0.0;                             // sum of log p(d_f) under the E-step model
  std::vector<std::array<double, 2>> node_count;   // by node: expected count of state 0 / 1
  std::vector<Cpt> pair_count;                     // by node: [parent state][child state]
  std::vector<std::array<double, 2>> leaf_weight;  // by word: expected weight of each parent state
  std::vector<std::array<double, 2>> leaf_sum;     // by word: sum of w * r
  std::vector<std::array<double, 2>> leaf_sumsq;   // by word: sum of w * r^2

  static SufficientStats zeros(std::size_t num_nodes, std::size_t num_words);
  SufficientStats& operator+=(const SufficientStats& other);
  SufficientStats& operator*=(double factor);
};

/// Parallel over documents. Documents are split into one contiguous range per
/// worker and partial statistics are merged in document order, so results are
/// bit-reproducible for a fixed worker count and equal e_step_serial with one.
SufficientStats e_step(const HltmcModel& model, std::span<const RelFreqDoc> batch);
/// Single-threaded reference used by tests and benchmarks.
SufficientStats e_step_serial(const HltmcModel& model, std::span<const RelFreqDoc> batch);

/// Closed-form maximization. Zero-weight rows keep the values of `previous`.
ParamSet m_step(const HltmcModel& previous, const SufficientStats& stats, double sigma_floor = kDefaultSigmaFloor);

/// Number of (word, state) pairs whose fitted std-dev sits at the floor.
std::size_t count_floored_sigmas(const ParamSet& params, double sigma_floor);

struct FitConfig {
  int max_iters = 200;
  double tolerance = 1e-5;  // relative change of per-document log-likelihood
  double sigma_floor = kDefaultSigmaFloor;
  std::uint64_t seed = 1;
  int restarts = 1;
  std::size_t minibatch = 1000;
  double step_exponent = 0.75;  // eta_t = (t + 2)^(-step_exponent)
  int epochs = 1;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct TraceEntry {
  int restart = 0;
  int iteration = 0;
  double per_doc_loglik = 0.0;
  double seconds = 0.0;
  std::size_t floored_sigmas = 0;
};

struct FitResult {
  ParamSet params;
  double per_doc_loglik = 0.0;  // full-data value for the returned params
  int best_restart = 0;
  std::vector<TraceEntry> trace;  // every restart, in order
};

using TraceCallback = std::function<void(const TraceEntry&)>;

/// Random start: root prior and CPT rows from normalized uniform(0.2, 0.8)
/// pairs; mu = corpus mean of r_i times uniform(0.5, 1.5) per state; sigma =
/// corpus std-dev of r_i, at least sigma_floor.
ParamSet random_init(const TreeStructure& structure, std::span<const RelFreqDoc> docs, std::uint64_t seed,
                     double sigma_floor = kDefaultSigmaFloor);

/// Full-batch EM. Restart 0 starts from `init` when given; every other restart
/// from random_init. Returns the restart with the best final log-likelihood.
FitResult em_fit(const TreeStructure& structure, const std::optional<ParamSet>& init,
                 std::span<const RelFreqDoc> docs, const FitConfig& config, const TraceCallback& on_trace = {});

/// Stepwise EM over seeded shuffled minibatches:
///   s <- (1 - eta_t) s + eta_t * (minibatch stats / minibatch size)
/// followed by an M-step after every minibatch. The first update takes s
/// entirely from the first minibatch. Trace entries hold minibatch values
/// and a final full-data entry per restart.
FitResult stepwise_em_fit(const TreeStructure& structure, const std::optional<ParamSet>& init,
                          std::span<const RelFreqDoc> docs, const FitConfig& config,
                          const TraceCallback& on_trace = {});

/// Flips latent states so that state 1 carries the larger expected sum of
/// subtree leaf means. CPTs, the root prior and leaf parameters are permuted
/// consistently; the distribution over observations is unchanged.
ParamSet relabel_states(const HltmcModel& model);

/// Mean log p(d_f | M_a) over documents.
double mean_loglik(const HltmcModel& model, std::span<const RelFreqDoc> docs);

}  // namespace hltmc
