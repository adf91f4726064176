#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "hltmc/error.hpp"
#include "hltmc/sampling.hpp"

using namespace hltmc;
using fixtures::TreeBuilder;

namespace {

// Two latents over two leaves each; deterministic copy CPT.
HltmcModel copy_chain(double root_prior) {
  TreeBuilder b;
  const int r = b.latent("r");
  const int c = b.latent("c", r);
  b.leaf("a", r);
  b.leaf("b", c);
  b.leaf("d", c);
  TreeStructure s = b.build();
  ParamSet p;
  p.root_prior = root_prior;
  p.cpts.assign(s.nodes.size(), kUniformCpt);
  p.cpts[c] = Cpt{{{1.0, 0.0}, {0.0, 1.0}}};
  p.leaves.assign(3, LeafParams{{0.2, 0.5}, {0.05, 0.05}});
  return HltmcModel(s, p);
}

HltmcModel two_word_model() {
  TreeBuilder b;
  const int z = b.latent("z");
  b.leaf("first", z);
  b.leaf("second", z);
  TreeStructure s = b.build();
  ParamSet p;
  p.root_prior = 1.0;
  p.cpts.assign(s.nodes.size(), kUniformCpt);
  p.leaves = {LeafParams{{0.1, 0.6}, {0.1, 0.1}}, LeafParams{{0.1, 0.2}, {0.1, 0.1}}};
  return HltmcModel(s, p);
}

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("deterministic chain samples every latent as 1") {
  const HltmcModel m = copy_chain(1.0);
  Rng rng = make_rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto z = sample_latents(m, rng);
    CHECK(z.value[0] == 1);
    CHECK(z.value[1] == 1);
  }
}

TEST_CASE("root marginal matches the prior") {
  const HltmcModel m = copy_chain(0.24);
  Rng rng = make_rng(11);
  int ones = 0;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) ones += sample_latents(m, rng).value[0];
  CHECK(std::abs(ones / double(draws) - 0.24) < 0.005);
}

TEST_CASE("sampling is reproducible for a seed") {
  const HltmcModel m(fixtures::space_structure(), fixtures::space_params());
  Rng a = make_rng(99), b = make_rng(99);
  for (int t = 0; t < 50; ++t) {
    CHECK(sample_latents(m, a) == sample_latents(m, b));
    CHECK(sample_truncated_normal(0.3, 0.1, a) == sample_truncated_normal(0.3, 0.1, b));
    const auto da = generate_document(m, 40, a);
    const auto db = generate_document(m, 40, b);
    CHECK(da.counts == db.counts);
    CHECK(da.x == db.x);
  }
}

TEST_CASE("symmetric truncation keeps the mean") {
  Rng rng = make_rng(3);
  double sum = 0.0;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) sum += sample_truncated_normal(0.5, 0.01, rng);
  CHECK(std::abs(sum / draws - 0.5) < 0.001);
}

TEST_CASE("truncated normal mean matches the closed form") {
  const double mu = -0.2, sigma = 0.1;
  const double a = (0.0 - mu) / sigma, b = (1.0 - mu) / sigma;
  // Upper tail: Phi(b) - Phi(a) computed as Q(a) - Q(b) to avoid cancellation.
  const double mass = 0.5 * std::erfc(a / std::numbers::sqrt2) - 0.5 * std::erfc(b / std::numbers::sqrt2);
  const double expected = mu + sigma * (phi(a) - phi(b)) / mass;
  Rng rng = make_rng(4);
  double sum = 0.0;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    const double x = sample_truncated_normal(mu, sigma, rng);
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    sum += x;
  }
  CHECK(std::abs(sum / draws - expected) < 1e-3);
}

TEST_CASE("degenerate truncation is an error") {
  Rng rng = make_rng(1);
  CHECK_THROWS_AS(sample_truncated_normal(-50.0, 0.001, rng), NumericalError);
}

TEST_CASE("floor-width emissions stay within five sigma") {
  TreeBuilder b;
  const int z = b.latent("z");
  for (int i = 0; i < 5; ++i) b.leaf("w" + std::to_string(i), z);
  TreeStructure s = b.build();
  ParamSet p;
  p.root_prior = 0.5;
  p.cpts.assign(s.nodes.size(), kUniformCpt);
  p.leaves.assign(5, LeafParams{{0.2, 0.00455}, {kDefaultSigmaFloor, kDefaultSigmaFloor}});
  p.leaves[4].mu = {0.9, 0.5};
  const HltmcModel m(s, p);
  Rng rng = make_rng(8);
  LatentAssignment one{{1, 0, 0, 0, 0, 0}};
  for (int t = 0; t < 20000; ++t) {
    const auto x = generate_urf(m, one, rng);
    for (int w = 0; w < 5; ++w) CHECK(std::abs(x[w] - p.leaves[w].mu[1]) <= 5 * kDefaultSigmaFloor);
  }
}

TEST_CASE("leaf draws are independent given the latents") {
  const HltmcModel m = two_word_model();
  Rng rng = make_rng(21);
  LatentAssignment z{{1, 0, 0}};
  const int draws = 100000;
  double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
  for (int t = 0; t < draws; ++t) {
    const auto x = generate_urf(m, z, rng);
    s0 += x[0];
    s1 += x[1];
    s00 += x[0] * x[0];
    s11 += x[1] * x[1];
    s01 += x[0] * x[1];
  }
  const double n = draws;
  const double cov = s01 / n - (s0 / n) * (s1 / n);
  const double corr = cov / std::sqrt((s00 / n - s0 * s0 / (n * n)) * (s11 / n - s1 * s1 / (n * n)));
  CHECK(std::abs(corr) < 0.01);
}

TEST_CASE("normalize_urf") {
  auto y = normalize_urf(std::vector<double>{0.2, 0.2});
  CHECK(y[0] == 0.5);
  CHECK(y[1] == 0.5);
  y = normalize_urf(std::vector<double>{1.0, 0.0, 0.0});
  CHECK(y == std::vector<double>{1.0, 0.0, 0.0});
  CHECK_THROWS_AS(normalize_urf(std::vector<double>{0.0, 0.0}), NumericalError);
  Rng rng = make_rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(1 + uniform_index(rng, 30));
    for (auto& v : x) v = uniform01(rng);
    y = normalize_urf(x);
    double s = 0.0;
    for (double v : y) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("generated documents have exactly N words") {
  const HltmcModel m(fixtures::space_structure(), fixtures::space_params());
  Rng rng = make_rng(6);
  CHECK(generate_document(m, 0, rng).counts == std::vector<int>(7, 0));
  for (int t = 0; t < 200; ++t) {
    const std::int64_t n = static_cast<std::int64_t>(uniform_index(rng, 500));
    const auto doc = generate_document(m, n, rng);
    std::int64_t total = 0;
    for (int c : doc.counts) total += c;
    CHECK(total == n);
  }
}

TEST_CASE("word frequencies of a long document follow E[y]") {
  const HltmcModel m = two_word_model();
  // Oracle for E[y_1]: average y_1 over independent emission-only draws.
  Rng oracle = make_rng(1234);
  LatentAssignment z{{1, 0, 0}};
  double ey = 0.0;
  const int sims = 100000;
  for (int t = 0; t < sims; ++t) ey += normalize_urf(generate_urf(m, z, oracle))[0];
  ey /= sims;
  CHECK(std::abs(ey - 0.75) < 0.02);

  Rng rng = make_rng(77);
  double freq = 0.0;
  const int docs = 20;
  for (int d = 0; d < docs; ++d) freq += generate_document(m, 1000000, rng).counts[0] / 1e6;
  CHECK(std::abs(freq / docs - ey) < 0.01);
  const auto single = generate_document(m, 1000000, rng);
  CHECK(single.counts[0] + single.counts[1] == 1000000);
}

TEST_CASE("logic sampling marginals converge to exact prior marginals") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const HltmcModel m = fixtures::random_model(seed + 40, 12, 20);
    const auto exact = prior_marginals(m);
    std::vector<double> freq(exact.size(), 0.0);
    Rng rng = make_rng(seed);
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) {
      const auto z = sample_latents(m, rng);
      for (int u : m.topology().latents()) freq[u] += z.value[u];
    }
    for (int u : m.topology().latents()) CHECK(std::abs(freq[u] / draws - exact[u]) < 0.01);
  }
}

TEST_CASE("generated corpus does not depend on worker count") {
  const HltmcModel m(fixtures::space_structure(), fixtures::space_params());
  std::vector<std::int64_t> lengths(64, 50);
  lengths[3] = 0;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const CountCorpus one = generate_corpus(m, lengths, 42);
  omp_set_num_threads(4);
  const CountCorpus four = generate_corpus(m, lengths, 42);
  omp_set_num_threads(saved);
  CHECK(one == four);
  CHECK(one.docs[3].entries.empty());
  CHECK(one.docs[0].length() == 50);
  CHECK_FALSE(generate_corpus(m, lengths, 43) == one);
}
