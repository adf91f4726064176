#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "hltmc/inference.hpp"
#include "hltmc/normal.hpp"

using namespace hltmc;
using fixtures::TreeBuilder;

namespace {

HltmcModel mixture(double prior, LeafParams leaf) {
  TreeBuilder b;
  b.leaf("w", b.latent("z"));
  TreeStructure s = b.build();
  ParamSet p;
  p.root_prior = prior;
  p.cpts.assign(2, kUniformCpt);
  p.leaves = {leaf};
  return HltmcModel(s, p);
}

double gauss(double r, double mu, double sigma) {
  return std::exp(-0.5 * (r - mu) * (r - mu) / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST_CASE("one latent one leaf is a two-term mixture") {
  const LeafParams leaf{{0.1, 0.35}, {0.05, 0.2}};
  const HltmcModel m = mixture(0.3, leaf);
  for (double r : {0.0, 0.1, 0.25, 0.9}) {
    const double hand = std::log(0.7 * gauss(r, 0.1, 0.05) + 0.3 * gauss(r, 0.35, 0.2));
    const std::vector<double> d{r};
    CHECK(std::abs(loglik_doc(m, d) - hand) < 1e-12);
    CHECK(std::abs(brute_force_loglik(m, d) - hand) < 1e-12);
    const double post = 0.3 * gauss(r, 0.35, 0.2) / (0.7 * gauss(r, 0.1, 0.05) + 0.3 * gauss(r, 0.35, 0.2));
    CHECK(std::abs(posteriors(m, d).p1[0] - post) < 1e-12);
  }
}

TEST_CASE("message passing matches enumeration on random models") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const HltmcModel m = fixtures::random_model(seed, 12, 20);
    Rng rng = make_rng(seed + 1000);
    const auto r = fixtures::random_relfreq(m.num_words(), rng);
    const auto oracle = fixtures::enumerate(m, r);
    CHECK(std::abs(loglik_doc(m, r) - oracle.loglik) < 1e-8);
    CHECK(std::abs(brute_force_loglik(m, r) - oracle.loglik) < 1e-8);
    const auto post = posteriors(m, r);
    CHECK(std::abs(post.loglik - oracle.loglik) < 1e-8);
    for (int u : m.topology().latents()) {
      CHECK(std::abs(post.p1[u] - oracle.p1[u]) < 1e-8);
      if (u == m.topology().root()) continue;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) CHECK(std::abs(post.pair[u][a][b] - oracle.pair[u][a][b]) < 1e-8);
      }
    }
  }
}

TEST_CASE("pairwise posteriors marginalize to node marginals") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const HltmcModel m = fixtures::random_model(seed + 500, 12, 20);
    Rng rng = make_rng(seed);
    const auto post = posteriors(m, fixtures::random_relfreq(m.num_words(), rng));
    for (int u : m.topology().latents()) {
      const int parent = m.topology().parent(u);
      if (parent < 0) continue;
      const auto& t = post.pair[u];
      CHECK(std::abs(t[0][0] + t[0][1] + t[1][0] + t[1][1] - 1.0) < 1e-10);
      CHECK(std::abs(t[0][1] + t[1][1] - post.p1[u]) < 1e-10);
      CHECK(std::abs(t[1][0] + t[1][1] - post.p1[parent]) < 1e-10);
    }
  }
}

TEST_CASE("uninformative leaves make the likelihood independent of the latent part") {
  Rng rng = make_rng(3);
  const TreeStructure s = fixtures::random_structure(rng, 8, 12);
  ParamSet p = fixtures::random_params(s, rng);
  for (auto& lp : p.leaves) {
    lp.mu[1] = lp.mu[0];
    lp.sigma[1] = lp.sigma[0];
  }
  const auto r = fixtures::random_relfreq(s.num_words(), rng);
  const double base = loglik_doc(HltmcModel(s, p), r);
  for (int t = 0; t < 10; ++t) {
    ParamSet q = fixtures::random_params(s, rng);
    for (std::size_t w = 0; w < q.leaves.size(); ++w) q.leaves[w] = p.leaves[w];
    CHECK(std::abs(loglik_doc(HltmcModel(s, q), r) - base) < 1e-10);
  }
}

TEST_CASE("symmetric model gives one half everywhere") {
  Rng rng = make_rng(9);
  const TreeStructure s = fixtures::random_structure(rng, 8, 12);
  ParamSet p = fixtures::random_params(s, rng);
  p.root_prior = 0.5;
  for (auto& c : p.cpts) c = Cpt{{{0.7, 0.3}, {0.3, 0.7}}};
  for (auto& lp : p.leaves) {
    lp.mu = {0.1, 0.1};
    lp.sigma = {0.05, 0.05};
  }
  const HltmcModel m(s, p);
  const auto post = posteriors(m, fixtures::random_relfreq(s.num_words(), rng));
  for (int u : m.topology().latents()) CHECK(post.p1[u] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("strong evidence drives the posterior to one") {
  TreeBuilder b;
  const int z = b.latent("z");
  b.leaf("a", z);
  b.leaf("b", z);
  TreeStructure s = b.build();
  ParamSet p;
  p.root_prior = 0.01;
  p.cpts.assign(s.nodes.size(), kUniformCpt);
  p.leaves.assign(2, LeafParams{{0.0, 0.5}, {0.05, 0.05}});
  const HltmcModel m(s, p);
  const std::vector<double> r{0.5, 0.5};
  // Each likelihood ratio is exp(50) > 1e6.
  CHECK(gauss(0.5, 0.5, 0.05) / gauss(0.5, 0.0, 0.05) > 1e6);
  const double expected = fixtures::enumerate(m, r).p1[0];
  CHECK(posteriors(m, r).p1[0] > 0.999);
  CHECK(std::abs(posteriors(m, r).p1[0] - expected) < 1e-12);
}

TEST_CASE("message normalization does not change results") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const HltmcModel m = fixtures::random_model(seed + 77, 12, 20);
    Rng rng = make_rng(seed);
    const auto doc = RelFreqDoc::from_dense(fixtures::random_relfreq(m.num_words(), rng));
    const auto a = posteriors(m, doc, InferenceOptions{true});
    const auto b = posteriors(m, doc, InferenceOptions{false});
    CHECK(std::abs(a.loglik - b.loglik) < 1e-10);
    for (int u : m.topology().latents()) CHECK(std::abs(a.p1[u] - b.p1[u]) < 1e-12);
  }
}

TEST_CASE("extreme evidence stays finite") {
  const HltmcModel m(fixtures::space_structure(), [] {
    ParamSet p = fixtures::space_params();
    for (auto& lp : p.leaves) lp.sigma = {1e-4, 1e-4};
    return p;
  }());
  const std::vector<double> r{1.0, 0, 0, 0, 0, 0, 0};
  const auto post = posteriors(m, r);
  CHECK(std::isfinite(post.loglik));
  for (int u : m.topology().latents()) CHECK(std::isfinite(post.p1[u]));
}

TEST_CASE("sparse and dense observations agree") {
  const HltmcModel m = fixtures::random_model(5, 10, 20);
  Rng rng = make_rng(5);
  const auto r = fixtures::random_relfreq(m.num_words(), rng);
  const auto doc = RelFreqDoc::from_dense(r);
  CHECK(doc.to_dense(m.num_words()) == r);
  CHECK(loglik_doc(m, doc) == doctest::Approx(loglik_doc(m, r)).epsilon(1e-15));
}

TEST_CASE("level-1 joint probabilities") {
  SUBCASE("single-level model") {
    const HltmcModel m(fixtures::star_structure(3), [] {
      ParamSet p;
      p.root_prior = 0.37;
      p.cpts.assign(4, kUniformCpt);
      p.leaves.assign(3, LeafParams{{0.1, 0.2}, {0.1, 0.1}});
      return p;
    }());
    CHECK(level1_joint_prob(m, std::vector<std::uint8_t>{1}) == doctest::Approx(0.37).epsilon(1e-15));
    CHECK(level1_joint_prob(m, std::vector<std::uint8_t>{0}) == doctest::Approx(0.63).epsilon(1e-15));
  }
  SUBCASE("space topology against the two-term sum") {
    const HltmcModel m(fixtures::space_structure(), fixtures::space_params());
    const auto& p = m.params();
    const auto level1 = m.topology().level1();
    REQUIRE(level1.size() == 3);
    for (int mask = 0; mask < 8; ++mask) {
      std::vector<std::uint8_t> z(3);
      for (int j = 0; j < 3; ++j) z[j] = (mask >> j) & 1;
      double direct = 0.0;
      for (int root = 0; root < 2; ++root) {
        double term = root ? p.root_prior : 1.0 - p.root_prior;
        for (int j = 0; j < 3; ++j) term *= p.cpts[level1[j]][root][z[j]];
        direct += term;
      }
      CHECK(std::abs(level1_joint_prob(m, z) - direct) < 1e-12);
    }
  }
  SUBCASE("sums to one and matches enumeration") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const HltmcModel m = fixtures::random_model(seed + 300, 10, 16);
      const auto level1 = m.topology().level1();
      const std::vector<int> l1(level1.begin(), level1.end());
      const auto oracle = fixtures::enumerate(m, std::vector<double>(m.num_words(), 0.0));
      double total = 0.0;
      for (std::size_t mask = 0; mask < (std::size_t{1} << l1.size()); ++mask) {
        std::vector<std::uint8_t> z(l1.size());
        for (std::size_t j = 0; j < l1.size(); ++j) z[j] = (mask >> j) & 1U;
        const double prob = level1_joint_prob(m, z);
        CHECK(std::abs(prob - oracle.level1_marginal(l1, z)) < 1e-12);
        total += prob;
      }
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
  SUBCASE("wrong assignment size") {
    const HltmcModel m(fixtures::space_structure(), fixtures::space_params());
    CHECK_THROWS_AS(level1_joint_prob(m, std::vector<std::uint8_t>{1, 0}), std::invalid_argument);
  }
}

TEST_CASE("brute force refuses large models and handles deterministic cpts") {
  TreeBuilder b;
  const int root = b.latent("r");
  std::vector<int> mids;
  for (int k = 0; k < 17; ++k) {
    const int z = b.latent("z" + std::to_string(k), root);
    b.leaf("w" + std::to_string(2 * k), z);
    b.leaf("w" + std::to_string(2 * k + 1), z);
  }
  TreeStructure big = b.build();
  ParamSet p;
  p.cpts.assign(big.nodes.size(), kUniformCpt);
  p.leaves.assign(big.num_words(), LeafParams{{0.1, 0.2}, {0.1, 0.1}});
  const HltmcModel m(big, p);
  CHECK_THROWS_AS(brute_force_loglik(m, std::vector<double>(m.num_words(), 0.0)), std::invalid_argument);

  ParamSet q = fixtures::space_params();
  q.root_prior = 1.0;
  for (int c = 1; c <= 3; ++c) q.cpts[c] = Cpt{{{1.0, 0.0}, {0.0, 1.0}}};
  const HltmcModel det(fixtures::space_structure(), q);
  const std::vector<double> r{0.2, 0.1, 0.1, 0.2, 0.1, 0.2, 0.1};
  double single = 0.0;
  for (int w = 0; w < 7; ++w) single += normal_log_pdf(r[w], q.leaves[w].mu[1], q.leaves[w].sigma[1]);
  CHECK(std::abs(brute_force_loglik(det, r) - single) < 1e-12);
  CHECK(std::abs(loglik_doc(det, r) - single) < 1e-10);
}
