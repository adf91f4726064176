#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hltmc/corpus.hpp"
#include "hltmc/model.hpp"
#include "hltmc/random.hpp"

namespace fixtures {

using namespace hltmc;

class TreeBuilder {
 public:
  int latent(const std::string& id, int parent = -1);
  /// Adds a leaf for the next vocabulary index.
  int leaf(const std::string& word, int parent);
  TreeStructure build();

 private:
  TreeStructure s_;
};

/// z21 -> {z11, z12, z13}; z11 -> {v0, v1, v2}; z12 -> {v3, v4}; z13 -> {v5, v6}.
TreeStructure space_structure();
ParamSet space_params();

/// Single latent over `leaves` words.
TreeStructure star_structure(int leaves);

/// Random tree with 1..max_latents latents and up to max_leaves leaves (more
/// when needed); node and word order are shuffled. With `branching`, every
/// latent other than a lone root has at least two children; without it,
/// single-child chains occur.
TreeStructure random_structure(Rng& rng, int max_latents, int max_leaves, bool branching = true);
/// Interior parameters: CPT rows in (0.05, 0.95), mu in (0, 0.3), sigma in (0.02, 0.2).
ParamSet random_params(const TreeStructure& s, Rng& rng);
HltmcModel random_model(std::uint64_t seed, int max_latents, int max_leaves);

/// Point on the simplex with roughly a third of the entries exactly zero.
std::vector<double> random_relfreq(std::size_t v, Rng& rng);

/// Independent enumeration over every latent configuration.
struct Enumeration {
  double loglik = 0.0;
  std::vector<double> p1;               // by node
  std::vector<std::array<std::array<double, 2>, 2>> pair;  // by node: [parent][child]
  double level1_marginal(const std::vector<int>& level1, const std::vector<std::uint8_t>& z) const;
  std::vector<std::uint8_t> configs;    // flattened configurations, row = config
  std::vector<double> log_prior;        // log p(z) per config
  std::vector<int> latents;
};
Enumeration enumerate(const HltmcModel& model, const std::vector<double>& r);

/// Composite Simpson rule with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n);

/// Exact log(n!) by summing logs of integers.
double log_factorial(int n);

/// Builds a corpus from dense rows.
CountCorpus dense_corpus(const std::vector<std::vector<int>>& rows, std::vector<std::string> words = {});

}  // namespace fixtures
