#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hltmc/corpus.hpp"
#include "hltmc/model.hpp"
#include "hltmc/random.hpp"

namespace hltmc {

/// Sampled latent states, indexed by node (leaf entries unused).
struct LatentAssignment {
  std::vector<std::uint8_t> value;

  bool operator==(const LatentAssignment&) const = default;
};

using UrfVector = std::vector<double>;      // unnormalized relative frequencies, each in (0,1)
using RelFreqVector = std::vector<double>;  // point on the probability simplex

/// Clamp applied to every truncated-normal draw; keeps every y_i > 0.
inline constexpr double kUrfEpsilon = 1e-12;

/// Ancestral sampling: root from its prior, then each latent given its parent.
LatentAssignment sample_latents(const HltmcModel& model, Rng& rng);

/// Inverse-CDF draw from N(mu, sigma^2) truncated to [0,1], clamped to
/// (1e-12, 1 - 1e-12). Consumes exactly one uniform. Throws NumericalError when
/// the interval mass is below 1e-300.
double sample_truncated_normal(double mu, double sigma, Rng& rng);

/// Draws x_i for every word given the states of the leaves' parents. Only the
/// entries of `z` at parents of leaves are read.
UrfVector generate_urf(const HltmcModel& model, const LatentAssignment& z, Rng& rng);

/// y = x / sum(x). Throws NumericalError when the sum is not positive.
RelFreqVector normalize_urf(std::span<const double> x);

/// n categorical draws from y (cumulative-sum search), returned as counts.
std::vector<int> sample_multinomial(std::span<const double> y, std::int64_t n, Rng& rng);

struct GeneratedDocument {
  LatentAssignment z;
  UrfVector x;
  RelFreqVector y;
  std::vector<int> counts;
};

/// All four generation steps for one document of length n.
GeneratedDocument generate_document(const HltmcModel& model, std::int64_t n, Rng& rng);

/// Generates one document per entry of `lengths`. Document d uses its own
/// stream derived from (seed, d), so output does not depend on worker count.
CountCorpus generate_corpus(const HltmcModel& model, std::span<const std::int64_t> lengths, std::uint64_t seed);

}  // namespace hltmc
