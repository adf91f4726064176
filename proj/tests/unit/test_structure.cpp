#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "hltmc/error.hpp"
#include "hltmc/structure.hpp"

using namespace hltmc;

namespace {

// k blocks of `size` words; each document switches each block on with
// probability 0.3 and then includes each of its words with probability `keep`.
CountCorpus block_corpus(int k, int size, int docs, double keep, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<std::vector<int>> rows;
  for (int d = 0; d < docs; ++d) {
    std::vector<int> row(static_cast<std::size_t>(k * size), 0);
    for (int b = 0; b < k; ++b) {
      if (!bernoulli(rng, 0.3)) continue;
      for (int i = 0; i < size; ++i) row[b * size + i] = bernoulli(rng, keep) ? 1 + static_cast<int>(uniform_index(rng, 3)) : 0;
    }
    rows.push_back(row);
  }
  return fixtures::dense_corpus(rows);
}

std::set<std::set<int>> level1_groups(const TreeStructure& s) {
  std::map<int, std::set<int>> groups;
  for (const auto& n : s.nodes) {
    if (n.kind == NodeKind::leaf) groups[n.parent].insert(n.word);
  }
  std::set<std::set<int>> out;
  for (auto& [p, g] : groups) out.insert(g);
  return out;
}

double entropy(double p) { return -(p * std::log(p) + (1 - p) * std::log(1 - p)); }

}  // namespace

TEST_CASE("binarize") {
  const CountCorpus c = fixtures::dense_corpus({{0, 3, 1}, {0, 0, 0}});
  const BinaryCorpus b = binarize(c);
  CHECK(b.docs[0] == std::vector<int>{1, 2});
  CHECK(b.docs[1].empty());
  CHECK(b.num_words == 3);
  CountCorpus again = c;
  for (auto& d : again.docs) {
    for (auto& e : d.entries) e.count = 1;
  }
  CHECK(binarize(again) == b);
}

TEST_CASE("mutual information") {
  SUBCASE("a column with itself is its smoothed entropy") {
    const CountCorpus c = fixtures::dense_corpus({{1, 0}, {1, 1}, {0, 1}, {0, 0}, {2, 0}});
    const BinaryCorpus b = binarize(c);
    CHECK(pairwise_mi(b, 0, 0) == doctest::Approx(entropy(3.5 / 6.0)).epsilon(1e-14));
  }
  SUBCASE("independent columns") {
    Rng rng = make_rng(1);
    BinaryCorpus b;
    b.num_words = 2;
    for (int d = 0; d < 100000; ++d) {
      std::vector<int> doc;
      if (bernoulli(rng, 0.3)) doc.push_back(0);
      if (bernoulli(rng, 0.6)) doc.push_back(1);
      b.docs.push_back(doc);
    }
    CHECK(pairwise_mi(b, 0, 1) < 0.001);
  }
  SUBCASE("perfectly correlated columns") {
    BinaryCorpus b;
    b.num_words = 2;
    // Smoothing leaks O(log n / n) into the empty cells, so n must be large.
    for (int d = 0; d < 100000; ++d) b.docs.push_back(d % 3 == 0 ? std::vector<int>{0, 1} : std::vector<int>{});
    const double h = entropy(33334.0 / 100000.0);
    CHECK(std::abs(pairwise_mi(b, 0, 1) - h) < 1e-3);
  }
  SUBCASE("hand-computed smoothed table") {
    // n11=1, n10=1, n01=2, n00=1 plus 0.5 each over 7.
    const CountCorpus c = fixtures::dense_corpus({{1, 1}, {1, 0}, {0, 1}, {0, 1}, {0, 0}});
    const double p11 = 1.5 / 7, p10 = 1.5 / 7, p01 = 2.5 / 7, p00 = 1.5 / 7;
    const double pa = p11 + p10, pb = p11 + p01;
    const double mi = p11 * std::log(p11 / (pa * pb)) + p10 * std::log(p10 / (pa * (1 - pb))) +
                      p01 * std::log(p01 / ((1 - pa) * pb)) + p00 * std::log(p00 / ((1 - pa) * (1 - pb)));
    CHECK(pairwise_mi(binarize(c), 0, 1) == doctest::Approx(mi).epsilon(1e-13));
    CHECK(pairwise_mi(binarize(c), 1, 0) == doctest::Approx(mi).epsilon(1e-13));
  }
}

TEST_CASE("MI matrix: parallel equals serial") {
  const CountCorpus c = block_corpus(5, 8, 700, 0.8, 3);
  const IndicatorColumns cols(binarize(c));
  std::vector<std::size_t> which(cols.size());
  for (std::size_t i = 0; i < which.size(); ++i) which[i] = i;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const auto par = mi_matrix(cols, which);
  omp_set_num_threads(saved);
  CHECK(par == mi_matrix_serial(cols, which));
  const BinaryCorpus b = binarize(c);
  CHECK(par[3 * 40 + 17] == doctest::Approx(pairwise_mi(b, 3, 17)).epsilon(1e-14));
}

TEST_CASE("two perfectly correlated blocks of three") {
  std::vector<std::vector<int>> rows;
  for (int d = 0; d < 40; ++d) {
    const int a = d % 2, b = (d / 2) % 2;
    rows.push_back({a, a, a, b, b, b});
  }
  const CountCorpus c = fixtures::dense_corpus(rows);
  const TreeStructure s = build_structure(binarize(c), c.vocab, {3});
  CHECK(validate_structure(s).ok());
  CHECK(level1_groups(s) == std::set<std::set<int>>{{0, 1, 2}, {3, 4, 5}});
  int latents = 0;
  for (const auto& n : s.nodes) latents += n.kind == NodeKind::latent;
  CHECK(latents == 3);
}

TEST_CASE("few words hang from a single latent") {
  const CountCorpus c = fixtures::dense_corpus({{1, 0, 2}, {0, 1, 1}});
  const TreeStructure s = build_structure(binarize(c), c.vocab, {7});
  CHECK(s.nodes.size() == 4);
  CHECK(s.nodes.back().kind == NodeKind::latent);
  CHECK(s.nodes.back().parent == -1);
  CHECK_THROWS_AS(build_structure(binarize(fixtures::dense_corpus({{1}})), Vocabulary({"w"})), std::invalid_argument);
  CHECK_THROWS_AS(build_structure(binarize(c), c.vocab, {1}), std::invalid_argument);
}

TEST_CASE("block recovery and structural contract") {
  for (int k : {2, 3, 5, 7}) {
    const int size = 50 / k < 7 ? 50 / k : 7;
    const CountCorpus c = block_corpus(k, size, 2000, 0.95, static_cast<std::uint64_t>(k));
    const TreeStructure s = build_structure(binarize(c), c.vocab, {static_cast<std::size_t>(size)});
    REQUIRE(validate_structure(s).ok());
    std::set<std::set<int>> truth;
    for (int b = 0; b < k; ++b) {
      std::set<int> g;
      for (int i = 0; i < size; ++i) g.insert(b * size + i);
      truth.insert(g);
    }
    CHECK(level1_groups(s) == truth);
    CHECK(s.nodes.size() <= 2 * c.vocab.size());
    CHECK(build_structure(binarize(c), c.vocab, {static_cast<std::size_t>(size)}) == s);
  }
}

TEST_CASE("random corpora always give valid structures") {
  Rng rng = make_rng(12);
  for (int t = 0; t < 30; ++t) {
    const std::size_t v = 2 + uniform_index(rng, 60);
    std::vector<std::vector<int>> rows(1 + uniform_index(rng, 50), std::vector<int>(v));
    for (auto& row : rows) {
      for (auto& x : row) x = bernoulli(rng, 0.3) ? 1 : 0;
    }
    const CountCorpus c = fixtures::dense_corpus(rows);
    const std::size_t g = 2 + uniform_index(rng, 8);
    const TreeStructure s = build_structure(binarize(c), c.vocab, {g});
    CHECK(validate_structure(s).ok());
    CHECK(s.nodes.size() <= 2 * v);
    std::size_t latents = 0;
    for (const auto& n : s.nodes) latents += n.kind == NodeKind::latent;
    CHECK(latents <= v);
  }
}

TEST_CASE("structure files") {
  const Vocabulary vocab({"alpha", "beta", "gamma"});
  SUBCASE("round trip") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = make_rng(seed);
      const TreeStructure s = fixtures::random_structure(rng, 8, 15);
      std::stringstream buf;
      write_structure(s, buf);
      const Vocabulary v(s.words);
      CHECK(parse_structure(buf, "buf", &v) == s);
      std::stringstream again;
      write_structure(s, again);
      CHECK(parse_structure(again, "buf") .nodes.size() == s.nodes.size());
    }
  }
  SUBCASE("two roots") {
    std::istringstream in("r1 - latent\nr2 - latent\na r1 leaf alpha\nb r2 leaf beta\nc r2 leaf gamma\n");
    CHECK_THROWS_AS(parse_structure(in, "f", &vocab), DataError);
  }
  SUBCASE("unknown word is named with its line") {
    std::istringstream in("r - latent\na r leaf alpha\n# comment\nb r leaf delta\n");
    try {
      parse_structure(in, "f", &vocab);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
      CHECK(std::string(e.what()).find("delta") != std::string::npos);
    }
  }
  SUBCASE("malformed lines") {
    std::istringstream bad_kind("r - root\n");
    CHECK_THROWS_AS(parse_structure(bad_kind, "f"), ParseError);
    std::istringstream bad_parent("r - latent\na q leaf alpha\n");
    CHECK_THROWS_AS(parse_structure(bad_parent, "f"), ParseError);
    std::istringstream dup("r - latent\nr - latent\n");
    CHECK_THROWS_AS(parse_structure(dup, "f"), ParseError);
    std::istringstream missing("r - latent\na r leaf alpha\nb r leaf beta\n");
    CHECK_THROWS_AS(parse_structure(missing, "f", &vocab), DataError);
  }
}
