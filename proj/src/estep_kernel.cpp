#include <exception>

#include "hltmc/learning.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hltmc {
namespace {

void accumulate(const HltmcModel& model, const RelFreqDoc& doc, InferenceWorkspace& ws, PosteriorMarginals& post,
                SufficientStats& s) {
  const auto& topo = model.topology();
  posteriors(model, doc, ws, post);
  s.total_weight += 1.0;
  s.loglik += post.loglik;
  for (int u : topo.latents()) {
    const double p1 = post.p1[u];
    s.node_count[u][0] += 1.0 - p1;
    s.node_count[u][1] += p1;
    if (u == topo.root()) continue;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) s.pair_count[u][a][b] += post.pair[u][a][b];
    }
  }
  for (std::size_t k = 0; k < doc.word.size(); ++k) {
    const int w = doc.word[k];
    const double r = doc.value[k];
    const double p1 = post.p1[topo.word_parent(w)];
    const double weight[2] = {1.0 - p1, p1};
    for (int z = 0; z < 2; ++z) {
      s.leaf_sum[w][z] += weight[z] * r;
      s.leaf_sumsq[w][z] += weight[z] * r * r;
    }
  }
}

// Leaves share their parent's state weights; documents observing r = 0 add
// weight but nothing to the sums, so weights are filled in one pass at the end.
void finalize_leaf_weights(const HltmcModel& model, SufficientStats& s) {
  const auto& topo = model.topology();
  for (std::size_t w = 0; w < s.leaf_weight.size(); ++w) {
    s.leaf_weight[w] = s.node_count[topo.word_parent(static_cast<int>(w))];
  }
}

SufficientStats accumulate_range(const HltmcModel& model, std::span<const RelFreqDoc> docs) {
  auto s = SufficientStats::zeros(model.topology().num_nodes(), model.num_words());
  InferenceWorkspace ws;
  PosteriorMarginals post;
  for (const auto& doc : docs) accumulate(model, doc, ws, post, s);
  return s;
}

}  // namespace

SufficientStats e_step_serial(const HltmcModel& model, std::span<const RelFreqDoc> batch) {
  auto s = accumulate_range(model, batch);
  finalize_leaf_weights(model, s);
  return s;
}

SufficientStats e_step(const HltmcModel& model, std::span<const RelFreqDoc> batch) {
  int workers = 1;
#ifdef _OPENMP
  workers = omp_get_max_threads();
#endif
  const std::size_t n = batch.size();
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  if (chunks == 1) return e_step_serial(model, batch);

  std::vector<SufficientStats> part(chunks);
  std::exception_ptr failure;
#pragma omp parallel for schedule(static, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    try {
      const std::size_t lo = c * n / chunks;
      const std::size_t hi = (c + 1) * n / chunks;
      part[c] = accumulate_range(model, batch.subspan(lo, hi - lo));
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // Pairwise merge in index order.
  for (std::size_t stride = 1; stride < chunks; stride *= 2) {
    for (std::size_t i = 0; i + stride < chunks; i += 2 * stride) part[i] += part[i + stride];
  }
  finalize_leaf_weights(model, part[0]);
  return std::move(part[0]);
}

}  // namespace hltmc
