#pragma once

// Associative scans with span/work flop accounting.
//
// A monoid supplies `value_type`, `combine(a, b, ledger)` and `identity()`
// returning std::optional (empty for operators without a neutral element,
// which are valid for seq_scan only). combine need not be commutative.
//
// Span is accumulated level by level: every batch of invocations that may
// run concurrently is one level, contributing the largest single-invocation
// cost to span and the sum of all costs to work.

#include <algorithm>
#include <bit>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "parbayes/kernel.hpp"
#include "parbayes/parallel.hpp"

namespace parbayes {

template <class M>
concept Monoid = requires(const M& m, const typename M::value_type& a, FlopLedger& ledger) {
  typename M::value_type;
  { m.combine(a, a, ledger) } -> std::convertible_to<typename M::value_type>;
  { m.identity() } -> std::same_as<std::optional<typename M::value_type>>;
};

struct CostReport {
  std::uint64_t work_flops = 0;
  std::uint64_t span_flops = 0;
  std::size_t level_count = 0;
  FlopLedger ledger;

  // One batch of concurrent tasks.
  void add_level(std::span<const FlopLedger> tasks) {
    if (tasks.empty()) return;
    std::uint64_t widest = 0;
    for (const auto& t : tasks) {
      const std::uint64_t c = t.total();
      widest = std::max(widest, c);
      work_flops += c;
      ledger.merge(t);
    }
    span_flops += widest;
    ++level_count;
  }

  // A strictly sequential stretch of work (span == work).
  void add_sequential(const FlopLedger& task) {
    const std::uint64_t c = task.total();
    work_flops += c;
    span_flops += c;
    ledger.merge(task);
    ++level_count;
  }

  // Work that happens after everything already recorded.
  void append(const CostReport& later) {
    work_flops += later.work_flops;
    span_flops += later.span_flops;
    level_count += later.level_count;
    ledger.merge(later.ledger);
  }
};

template <class T>
struct ScanReport {
  std::vector<T> results;
  CostReport cost;
};

// Runs fn(i, ledger) for i in [0, count) as one concurrent level.
template <class F>
auto parallel_level(const Executor& exec, std::size_t count, F&& fn, CostReport& cost) {
  using T = std::invoke_result_t<F&, std::size_t, FlopLedger&>;
  std::vector<T> out(count);
  std::vector<FlopLedger> ledgers(count);
  exec.for_each_index(count, [&](std::size_t i) { out[i] = fn(i, ledgers[i]); });
  cost.add_level(ledgers);
  return out;
}

// Swaps operand order: combine(a, b) = base.combine(b, a).
template <Monoid M>
struct Opposite {
  using value_type = typename M::value_type;
  M base;

  value_type combine(const value_type& a, const value_type& b, FlopLedger& ledger) const {
    return base.combine(b, a, ledger);
  }
  std::optional<value_type> identity() const { return base.identity(); }
};

// Left-to-right inclusive scan, one combine per level.
template <class M>
ScanReport<typename M::value_type> seq_scan(std::span<const typename M::value_type> elems,
                                            const M& monoid) {
  if (elems.empty()) throw std::invalid_argument("seq_scan: empty input");
  ScanReport<typename M::value_type> report;
  report.results.reserve(elems.size());
  report.results.push_back(elems[0]);
  for (std::size_t k = 1; k < elems.size(); ++k) {
    FlopLedger task;
    report.results.push_back(monoid.combine(report.results.back(), elems[k], task));
    report.cost.add_sequential(task);
  }
  return report;
}

// Work-efficient tree scan: up-sweep, root reset to identity, down-sweep,
// then a final pass combining each exclusive prefix with the saved input.
// Inputs are padded with identities to the next power of two.
template <Monoid M>
ScanReport<typename M::value_type> par_scan(std::span<const typename M::value_type> elems,
                                            const M& monoid, const Executor& exec = Executor{}) {
  using T = typename M::value_type;
  if (elems.empty()) throw std::invalid_argument("par_scan: empty input");
  const std::optional<T> identity = monoid.identity();
  if (!identity) throw std::invalid_argument("par_scan: monoid has no identity element");

  const std::size_t n = elems.size();
  const std::size_t m = std::bit_ceil(n);
  std::vector<T> a(elems.begin(), elems.end());
  a.resize(m, *identity);

  ScanReport<T> report;
  CostReport& cost = report.cost;

  // Tree nodes touched at stride s: left child j = i + s/2 - 1, parent k = i + s - 1.
  auto level = [&](std::size_t stride, bool down) {
    const std::size_t half = stride / 2;
    const std::size_t nodes = m / stride;
    std::vector<FlopLedger> ledgers(nodes);
    exec.for_each_index(nodes, [&](std::size_t t) {
      const std::size_t i = t * stride;
      const std::size_t j = i + half - 1;
      const std::size_t k = i + stride - 1;
      if (!down) {
        a[k] = monoid.combine(a[j], a[k], ledgers[t]);
      } else {
        T left = std::move(a[j]);
        a[j] = a[k];
        a[k] = monoid.combine(a[k], left, ledgers[t]);
      }
    });
    cost.add_level(ledgers);
  };

  for (std::size_t stride = 2; stride <= m; stride *= 2) level(stride, false);
  a[m - 1] = *identity;
  for (std::size_t stride = m; stride >= 2; stride /= 2) level(stride, true);

  std::vector<FlopLedger> ledgers(n);
  report.results.resize(n);
  exec.for_each_index(n, [&](std::size_t i) {
    report.results[i] = monoid.combine(a[i], elems[i], ledgers[i]);
  });
  cost.add_level(ledgers);
  return report;
}

// Combines consecutive runs of `block` elements left to right; the final
// block may be short. One task per block.
template <class M>
ScanReport<typename M::value_type> block_reduce(std::span<const typename M::value_type> elems,
                                                const M& monoid, std::size_t block,
                                                const Executor& exec = Executor{}) {
  if (block < 1) throw std::invalid_argument("block_reduce: block length must be at least 1");
  if (elems.empty()) throw std::invalid_argument("block_reduce: empty input");
  const std::size_t blocks = (elems.size() + block - 1) / block;
  ScanReport<typename M::value_type> report;
  report.results = parallel_level(
      exec, blocks,
      [&](std::size_t b, FlopLedger& ledger) {
        const std::size_t first = b * block;
        const std::size_t last = std::min(elems.size(), first + block);
        typename M::value_type acc = elems[first];
        for (std::size_t i = first + 1; i < last; ++i) acc = monoid.combine(acc, elems[i], ledger);
        return acc;
      },
      report.cost);
  return report;
}

// Inclusive scan through block elements: reduce each block, tree-scan the
// block elements, then expand inside every block from its exclusive prefix.
// block == 1 is a plain par_scan.
template <Monoid M>
ScanReport<typename M::value_type> blocked_scan(std::span<const typename M::value_type> elems,
                                                const M& monoid, std::size_t block,
                                                const Executor& exec = Executor{}) {
  using T = typename M::value_type;
  if (block < 1) throw std::invalid_argument("blocked_scan: block length must be at least 1");
  if (block == 1) return par_scan(elems, monoid, exec);
  if (elems.empty()) throw std::invalid_argument("blocked_scan: empty input");
  if (!monoid.identity()) throw std::invalid_argument("blocked_scan: monoid has no identity element");

  ScanReport<T> reduced = block_reduce(elems, monoid, block, exec);
  ScanReport<T> scanned = par_scan(std::span<const T>(reduced.results), monoid, exec);

  ScanReport<T> report;
  report.cost = std::move(reduced.cost);
  report.cost.append(scanned.cost);
  report.results.resize(elems.size());
  const std::size_t blocks = reduced.results.size();
  std::vector<FlopLedger> ledgers(blocks);
  exec.for_each_index(blocks, [&](std::size_t b) {
    const std::size_t first = b * block;
    const std::size_t last = std::min(elems.size(), first + block);
    T acc = b == 0 ? elems[first] : monoid.combine(scanned.results[b - 1], elems[first], ledgers[b]);
    report.results[first] = acc;
    for (std::size_t i = first + 1; i < last; ++i) {
      acc = monoid.combine(acc, elems[i], ledgers[b]);
      report.results[i] = acc;
    }
  });
  report.cost.add_level(ledgers);
  return report;
}

// results[k] = a_{k} (x) a_{k+1} (x) ... (x) a_{n-1}, in original time order.
// Scans the reversed sequence under the opposite monoid.
template <Monoid M>
ScanReport<typename M::value_type> reverse_scan(std::span<const typename M::value_type> elems,
                                                const M& monoid, std::size_t block = 1,
                                                const Executor& exec = Executor{}) {
  using T = typename M::value_type;
  if (elems.empty()) throw std::invalid_argument("reverse_scan: empty input");
  std::vector<T> reversed(elems.rbegin(), elems.rend());
  ScanReport<T> report =
      blocked_scan(std::span<const T>(reversed), Opposite<M>{monoid}, block, exec);
  std::reverse(report.results.begin(), report.results.end());
  return report;
}

// Plain addition over doubles, one flop per combine.
struct AddMonoid {
  using value_type = double;
  double combine(double a, double b, FlopLedger& ledger) const {
    ledger.charge(flop_tag::scalar, 1);
    return a + b;
  }
  std::optional<double> identity() const { return 0.0; }
};

// Not associative and has no identity; seq_scan only.
struct SubtractOperator {
  using value_type = double;
  double combine(double a, double b, FlopLedger& ledger) const {
    ledger.charge(flop_tag::scalar, 1);
    return a - b;
  }
  std::optional<double> identity() const { return std::nullopt; }
};

struct MatrixProductMonoid {
  using value_type = Matrix;
  std::size_t dim = 1;

  Matrix combine(const Matrix& a, const Matrix& b, FlopLedger& ledger) const {
    return matmul(a, b, ledger);
  }
  std::optional<Matrix> identity() const { return Matrix::identity(dim); }
};

}  // namespace parbayes
