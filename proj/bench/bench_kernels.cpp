// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <numeric>

#include "fixtures.hpp"
#include "hltmc/evaluation.hpp"
#include "hltmc/learning.hpp"
#include "hltmc/sampling.hpp"
#include "hltmc/structure.hpp"

using namespace hltmc;

namespace {

const HltmcModel& model() {
  static const HltmcModel m = fixtures::random_model(3, 12, 60);
  return m;
}

const CountCorpus& corpus() {
  static const CountCorpus c = generate_corpus(model(), std::vector<std::int64_t>(4000, 150), 1);
  return c;
}

const RelFreqCorpus& relfreq() {
  static const RelFreqCorpus r = counts_to_relfreq(corpus());
  return r;
}

void BM_EStep(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(e_step(model(), relfreq().docs));
}
void BM_EStepSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(e_step_serial(model(), relfreq().docs));
}

CountCorpus eval_slice() {
  CountCorpus c = corpus();
  c.docs.resize(200);
  return c;
}

void BM_Heldout(benchmark::State& state) {
  const CountCorpus c = eval_slice();
  for (auto _ : state) benchmark::DoNotOptimize(heldout_report(model(), c, EvalConfig{}));
}
void BM_HeldoutSerial(benchmark::State& state) {
  const CountCorpus c = eval_slice();
  for (auto _ : state) benchmark::DoNotOptimize(heldout_report_serial(model(), c, EvalConfig{}));
}

struct MiInput {
  IndicatorColumns columns;
  std::vector<std::size_t> which;
};

const MiInput& mi_input() {
  static const MiInput in = [] {
    IndicatorColumns cols(binarize(corpus()));
    std::vector<std::size_t> which(cols.size());
    std::iota(which.begin(), which.end(), std::size_t{0});
    return MiInput{std::move(cols), std::move(which)};
  }();
  return in;
}

void BM_MiMatrix(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mi_matrix(mi_input().columns, mi_input().which));
}
void BM_MiMatrixSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(mi_matrix_serial(mi_input().columns, mi_input().which));
}

}  // namespace

BENCHMARK(BM_EStep)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EStepSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Heldout)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_HeldoutSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MiMatrix)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MiMatrixSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
