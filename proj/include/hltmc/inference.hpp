#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hltmc/model.hpp"

namespace hltmc {

/// Relative-frequency observation of every leaf. Only nonzero entries are
/// stored; every other leaf observes exactly 0.
struct RelFreqDoc {
  std::vector<int> word;      // ascending
  std::vector<double> value;  // same length as word

  static RelFreqDoc from_dense(std::span<const double> dense);
  std::vector<double> to_dense(std::size_t vocab_size) const;
};

struct PosteriorMarginals {
  double loglik = 0.0;
  std::vector<double> p1;  // P(z = 1 | d) per node; leaves hold 0
  std::vector<Cpt> pair;   // pair[c][zp][zc] = P(parent = zp, c = zc | d) for non-root latents
};

struct InferenceOptions {
  /// Subtract each node's max log-message and carry it in a running scale.
  /// Results are identical either way; the switch exists to test that.
  bool normalize_messages = true;
};

/// Reusable buffers for message passing over one model.
struct InferenceWorkspace {
  std::vector<std::array<double, 2>> leafpart;
  std::vector<std::array<double, 2>> lambda;
  std::vector<std::array<double, 2>> up;
  std::vector<std::array<double, 2>> outside;
  std::vector<std::array<double, 2>> prefix;
};

/// log p(d_f | M_a, theta) by an upward pass with Gaussian leaf evidence.
double loglik_doc(const HltmcModel& model, const RelFreqDoc& doc, InferenceWorkspace& ws,
                  InferenceOptions options = {});
double loglik_doc(const HltmcModel& model, const RelFreqDoc& doc);
double loglik_doc(const HltmcModel& model, std::span<const double> dense);

/// Exact node marginals and parent-child pairwise posteriors (upward-downward).
void posteriors(const HltmcModel& model, const RelFreqDoc& doc, InferenceWorkspace& ws,
                PosteriorMarginals& out, InferenceOptions options = {});
PosteriorMarginals posteriors(const HltmcModel& model, const RelFreqDoc& doc, InferenceOptions options = {});
PosteriorMarginals posteriors(const HltmcModel& model, std::span<const double> dense);

/// log p(z1 | M_a, theta) for a joint assignment of the level-1 latents,
/// listed in Topology::level1() order; every other latent is summed out.
/// Throws std::invalid_argument when the assignment has the wrong size.
double level1_log_joint_prob(const HltmcModel& model, std::span<const std::uint8_t> z1);
double level1_joint_prob(const HltmcModel& model, std::span<const std::uint8_t> z1);

inline constexpr int kBruteForceMaxLatents = 16;

/// Explicit sum over all latent configurations. Exponential; testing only.
/// Throws std::invalid_argument above kBruteForceMaxLatents latents.
double brute_force_loglik(const HltmcModel& model, std::span<const double> dense);

}  // namespace hltmc
