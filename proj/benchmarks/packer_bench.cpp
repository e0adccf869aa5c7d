#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "medcurate/packer.hpp"

namespace {

std::vector<std::size_t> Lengths(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_int_distribution<std::size_t> dist(50, 4096);
  std::vector<std::size_t> out(n);
  for (auto& l : out) l = dist(rng);
  return out;
}

void BM_PackFfd(benchmark::State& state) {
  const auto lengths = Lengths(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(medcurate::packer::PackFfd(lengths, 4096));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PackFfd)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity();

void BM_PackFfdNaive(benchmark::State& state) {
  const auto lengths = Lengths(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(medcurate::packer::PackFfdNaive(lengths, 4096));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PackFfdNaive)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Complexity();

}  // namespace
