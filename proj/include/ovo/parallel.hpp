#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace ovo {

/// Work is split into fixed-size chunks keyed by chunk index, so the
/// partitioning (and therefore any per-chunk result) depends only on the
/// item count, never on the worker count. Workers pull chunk indices from
/// a shared counter; each chunk writes only to its own slot.
///
/// f is invoked as f(chunk_index, begin, end) with [begin, end) item ranges.
template <typename F>
void for_each_chunk(std::int64_t item_count, std::int64_t chunk_size, int workers, F&& f) {
  if (item_count <= 0) {
    return;
  }
  if (chunk_size <= 0) {
    throw std::invalid_argument("chunk_size must be positive");
  }
  const std::int64_t chunks = (item_count + chunk_size - 1) / chunk_size;
  auto run_chunk = [&](std::int64_t c) {
    const std::int64_t begin = c * chunk_size;
    const std::int64_t end = std::min(begin + chunk_size, item_count);
    f(c, begin, end);
  };
  if (workers <= 1 || chunks == 1) {
    for (std::int64_t c = 0; c < chunks; ++c) {
      run_chunk(c);
    }
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::atomic<int> error_owner{0};

  auto body = [&]() {
    for (std::int64_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      if (failed.load(std::memory_order_relaxed)) {
        return;
      }
      try {
        run_chunk(c);
      } catch (...) {
        int expected = 0;
        if (error_owner.compare_exchange_strong(expected, 1)) {
          first_error = std::current_exception();
        }
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers - 1));
  for (int t = 0; t < workers - 1; ++t) {
    threads.emplace_back(body);
  }
  body();
  for (auto& t : threads) {
    t.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

inline std::int64_t chunk_count(std::int64_t item_count, std::int64_t chunk_size) {
  return item_count <= 0 ? 0 : (item_count + chunk_size - 1) / chunk_size;
}

/// Fixed-order pairwise tree combine: level by level, adjacent pairs are
/// merged left-to-right. The association order is a function of the input
/// length alone, which keeps floating-point reductions bit-identical no
/// matter how many workers produced the partials.
template <typename T, typename Combine>
T pairwise_combine(std::vector<T> items, Combine&& combine, T empty_value) {
  if (items.empty()) {
    return empty_value;
  }
  while (items.size() > 1) {
    std::vector<T> merged;
    merged.reserve((items.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < items.size(); i += 2) {
      merged.push_back(combine(std::move(items[i]), std::move(items[i + 1])));
    }
    if (items.size() % 2 == 1) {
      merged.push_back(std::move(items.back()));
    }
    items = std::move(merged);
  }
  return std::move(items.front());
}

/// Deterministic sum of per-row terms: partials are accumulated per fixed
/// chunk and combined with the pairwise tree.
template <typename RowTerm>
double deterministic_row_sum(std::int64_t rows, std::int64_t chunk_size, int workers,
                             RowTerm&& term) {
  const std::int64_t chunks = chunk_count(rows, chunk_size);
  std::vector<double> partials(static_cast<std::size_t>(chunks), 0.0);
  for_each_chunk(rows, chunk_size, workers,
                 [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
                   double acc = 0.0;
                   for (std::int64_t i = begin; i < end; ++i) {
                     acc += term(i);
                   }
                   partials[static_cast<std::size_t>(c)] = acc;
                 });
  return pairwise_combine(std::move(partials), [](double a, double b) { return a + b; }, 0.0);
}

}  // namespace ovo
