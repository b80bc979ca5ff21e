#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace factum {

// Pairwise (cascade) summation of term(i) for i in [begin, end). Error grows
// with log(n) rather than n.
template <class Term>
double pairwise_sum(std::size_t begin, std::size_t end, const Term& term) {
  constexpr std::size_t kLeaf = 8;
  if (end - begin <= kLeaf) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += term(i);
    return acc;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
}

inline double pairwise_sum(std::span<const double> values) {
  return pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i]; });
}

template <class T>
double dot(std::span<const T> a, std::span<const T> b) {
  return pairwise_sum(0, a.size(),
                      [&](std::size_t i) { return static_cast<double>(a[i]) * static_cast<double>(b[i]); });
}

template <class T>
double norm2(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

}  // namespace factum
