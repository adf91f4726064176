#include "hltmc/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "hltmc/error.hpp"
#include "hltmc/numeric.hpp"
#include "hltmc/random.hpp"

namespace hltmc {
namespace {

std::vector<long long> parse_integers(std::string_view line, const std::string& where, long lineno) {
  std::vector<long long> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i == line.size()) break;
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + line.size(), value);
    if (ec != std::errc() || (ptr != line.data() + line.size() && *ptr != ' ' && *ptr != '\t' && *ptr != '\r')) {
      throw ParseError(where, lineno, "expected integers, got '" + std::string(line) + "'");
    }
    out.push_back(value);
    i = static_cast<std::size_t>(ptr - line.data());
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) {
  for (auto& w : words) {
    if (find(w) >= 0) throw DataError("duplicate vocabulary word '" + w + "'");
    add(std::move(w));
  }
}

int Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

int Vocabulary::add(std::string word) {
  const int existing = find(word);
  if (existing >= 0) return existing;
  const int index = static_cast<int>(words_.size());
  index_.emplace(word, index);
  words_.push_back(std::move(word));
  return index;
}

std::int64_t CountDoc::length() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.count;
  return n;
}

std::vector<int> to_dense(const CountDoc& doc, std::size_t vocab_size) {
  std::vector<int> dense(vocab_size, 0);
  for (const auto& e : doc.entries) dense.at(e.word) = e.count;
  return dense;
}

CountDoc from_dense(std::span<const int> counts, std::string id) {
  CountDoc doc;
  doc.id = std::move(id);
  for (std::size_t w = 0; w < counts.size(); ++w) {
    if (counts[w] > 0) doc.entries.push_back({static_cast<int>(w), counts[w]});
  }
  return doc;
}

std::vector<std::string> load_vocab_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    words.push_back(line);
  }
  return words;
}

CountCorpus load_uci_bow(const std::filesystem::path& docword, const std::filesystem::path& vocab_path) {
  return load_uci_bow(docword, Vocabulary(load_vocab_file(vocab_path)));
}

CountCorpus load_uci_bow(const std::filesystem::path& docword, Vocabulary vocab) {
  CountCorpus corpus;
  corpus.vocab = std::move(vocab);

  auto in = open_input(docword);
  const std::string where = docword.string();
  std::string line;
  long lineno = 0;
  long long header[3];
  for (int h = 0; h < 3; ++h) {
    if (!std::getline(in, line)) throw ParseError(where, lineno + 1, "missing header line");
    ++lineno;
    const auto values = parse_integers(line, where, lineno);
    if (values.size() != 1 || values[0] < 0) throw ParseError(where, lineno, "header must be one non-negative integer");
    header[h] = values[0];
  }
  const long long num_docs = header[0];
  const long long num_words = header[1];
  const long long nnz = header[2];
  if (num_words != static_cast<long long>(corpus.vocab.size())) {
    throw ParseError(where, 2, "header W=" + std::to_string(num_words) + " but vocabulary has " +
                                   std::to_string(corpus.vocab.size()) + " words");
  }

  corpus.docs.resize(static_cast<std::size_t>(num_docs));
  for (long long d = 0; d < num_docs; ++d) corpus.docs[d].id = std::to_string(d + 1);

  long long triples = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto values = parse_integers(line, where, lineno);
    if (values.empty()) continue;
    if (values.size() != 3) throw ParseError(where, lineno, "expected 'docId wordId count'");
    const long long doc = values[0], word = values[1], count = values[2];
    if (doc < 1 || doc > num_docs) throw ParseError(where, lineno, "docId out of range (ids are 1-based)");
    if (word < 1 || word > num_words) throw ParseError(where, lineno, "wordId out of range (ids are 1-based)");
    if (count < 1 || count > std::numeric_limits<int>::max()) throw ParseError(where, lineno, "count must be positive");
    corpus.docs[doc - 1].entries.push_back({static_cast<int>(word - 1), static_cast<int>(count)});
    ++triples;
  }
  if (triples != nnz) {
    throw ParseError(where, 3, "NNZ header says " + std::to_string(nnz) + " but file has " + std::to_string(triples) + " triples");
  }
  for (auto& doc : corpus.docs) {
    std::sort(doc.entries.begin(), doc.entries.end(), [](auto& a, auto& b) { return a.word < b.word; });
    for (std::size_t i = 1; i < doc.entries.size(); ++i) {
      if (doc.entries[i].word == doc.entries[i - 1].word) {
        throw ParseError(where, 0, "document " + doc.id + " lists word " +
                                       corpus.vocab.word(doc.entries[i].word) + " twice");
      }
    }
  }
  return corpus;
}

void save_uci_bow(const CountCorpus& corpus, const std::filesystem::path& docword,
                  const std::filesystem::path& vocab) {
  std::ofstream out(docword);
  if (!out) throw DataError("cannot write " + docword.string());
  std::size_t nnz = 0;
  for (const auto& doc : corpus.docs) nnz += doc.entries.size();
  out << corpus.docs.size() << '\n' << corpus.vocab.size() << '\n' << nnz << '\n';
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (const auto& e : corpus.docs[d].entries) out << d + 1 << ' ' << e.word + 1 << ' ' << e.count << '\n';
  }
  std::ofstream vout(vocab);
  if (!vout) throw DataError("cannot write " + vocab.string());
  for (const auto& w : corpus.vocab.words()) vout << w << '\n';
}

std::vector<double> tfidf_scores(const CountCorpus& corpus, TfidfAverage average) {
  const std::size_t vocab = corpus.vocab.size();
  const double num_docs = static_cast<double>(corpus.num_docs());
  std::vector<double> tf_sum(vocab, 0.0);
  std::vector<double> df(vocab, 0.0);
  for (const auto& doc : corpus.docs) {
    const double n = static_cast<double>(doc.length());
    if (n <= 0) continue;
    for (const auto& e : doc.entries) {
      tf_sum[e.word] += e.count / n;
      df[e.word] += 1.0;
    }
  }
  std::vector<double> score(vocab, kNegInf);
#pragma omp parallel for schedule(static)
  for (std::size_t w = 0; w < vocab; ++w) {
    if (df[w] == 0.0) continue;
    const double idf = std::log(num_docs / df[w]);
    const double denom = average == TfidfAverage::all_documents ? num_docs : df[w];
    score[w] = tf_sum[w] * idf / denom;
  }
  return score;
}

CountCorpus select_vocab_tfidf(const CountCorpus& corpus, std::size_t target_size, TfidfAverage average) {
  const std::size_t vocab = corpus.vocab.size();
  if (target_size < 1) throw std::invalid_argument("target vocabulary size must be at least 1");
  if (target_size > vocab) throw std::invalid_argument("target vocabulary size exceeds vocabulary");

  const auto score = tfidf_scores(corpus, average);
  std::vector<int> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return corpus.vocab.word(a) < corpus.vocab.word(b);
  });
  order.resize(target_size);
  std::sort(order.begin(), order.end());

  std::vector<int> remap(vocab, -1);
  CountCorpus out;
  for (int w : order) remap[w] = out.vocab.add(corpus.vocab.word(w));
  out.docs.reserve(corpus.docs.size());
  for (const auto& doc : corpus.docs) {
    CountDoc d;
    d.id = doc.id;
    for (const auto& e : doc.entries) {
      if (remap[e.word] >= 0) d.entries.push_back({remap[e.word], e.count});
    }
    out.docs.push_back(std::move(d));
  }
  return out;
}

CountCorpus reproject(const CountCorpus& corpus, const Vocabulary& target, std::int64_t* dropped_tokens) {
  std::vector<int> remap(corpus.vocab.size());
  for (std::size_t w = 0; w < remap.size(); ++w) remap[w] = target.find(corpus.vocab.word(static_cast<int>(w)));
  CountCorpus out;
  out.vocab = target;
  std::int64_t dropped = 0;
  for (const auto& doc : corpus.docs) {
    CountDoc d;
    d.id = doc.id;
    for (const auto& e : doc.entries) {
      if (remap[e.word] >= 0) {
        d.entries.push_back({remap[e.word], e.count});
      } else {
        dropped += e.count;
      }
    }
    std::sort(d.entries.begin(), d.entries.end(), [](auto& a, auto& b) { return a.word < b.word; });
    out.docs.push_back(std::move(d));
  }
  if (dropped_tokens) *dropped_tokens += dropped;
  return out;
}

CorpusSplit split_corpus(const CountCorpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0,1)");
  }
  const std::size_t num_docs = corpus.num_docs();
  std::vector<std::size_t> order(num_docs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  shuffle(std::span<std::size_t>(order), rng);
  const auto num_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(num_docs) - 1e-9));

  CorpusSplit split;
  split.train.vocab = corpus.vocab;
  split.test.vocab = corpus.vocab;
  for (std::size_t i = 0; i < num_docs; ++i) {
    (i < num_train ? split.train : split.test).docs.push_back(corpus.docs[order[i]]);
  }
  return split;
}

}  // namespace hltmc
