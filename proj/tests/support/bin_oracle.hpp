#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <vector>

namespace medcurate::testing {

// Minimum number of bins by exhaustive search (branch and bound over
// "put item into an existing bin or open a new one"). Exponential; meant
// for n <= 12.
inline std::size_t OptimalBinCount(std::vector<std::size_t> items, std::size_t capacity) {
  std::sort(items.begin(), items.end(), std::greater<>());
  std::size_t best = items.size();
  std::vector<std::size_t> loads;
  std::function<void(std::size_t)> search = [&](std::size_t i) {
    if (loads.size() >= best) return;
    if (i == items.size()) {
      best = loads.size();
      return;
    }
    for (std::size_t b = 0; b < loads.size(); ++b) {
      // Bins with equal load are interchangeable.
      bool seen = false;
      for (std::size_t p = 0; p < b && !seen; ++p) seen = loads[p] == loads[b];
      if (seen || loads[b] + items[i] > capacity) continue;
      loads[b] += items[i];
      search(i + 1);
      loads[b] -= items[i];
    }
    loads.push_back(items[i]);
    search(i + 1);
    loads.pop_back();
  };
  search(0);
  return best;
}

// Plain first-fit over a descending order, written independently of the
// library: returns per-bin item lengths.
inline std::vector<std::vector<std::size_t>> FirstFitDecreasingTrace(
    const std::vector<std::size_t>& items, std::size_t capacity) {
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return items[a] > items[b]; });
  std::vector<std::vector<std::size_t>> bins;
  std::vector<std::size_t> loads;
  for (std::size_t i : order) {
    std::size_t b = 0;
    while (b < bins.size() && loads[b] + items[i] > capacity) ++b;
    if (b == bins.size()) {
      bins.emplace_back();
      loads.push_back(0);
    }
    bins[b].push_back(items[i]);
    loads[b] += items[i];
  }
  return bins;
}

}  // namespace medcurate::testing
