#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <optional>

#include "alignmap/errors.hpp"

namespace alignmap {

/// Cosine similarity of two vector expressions; nullopt when either norm is
/// zero (the quantity is undefined there, callers decide how to surface it).
template <typename A, typename B>
std::optional<double> try_cosine(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    return std::nullopt;
  }
  return a.dot(b) / (na * nb);
}

template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const auto c = try_cosine(a, b);
  if (!c) {
    throw ValidationError("cosine similarity undefined for zero-norm vector");
  }
  return *c;
}

template <typename D>
double mean(const Eigen::MatrixBase<D>& v) {
  return v.mean();
}

/// Population variance: divides by the element count, not count - 1.
template <typename D>
double population_variance(const Eigen::MatrixBase<D>& v) {
  const double mu = v.mean();
  return (v.array() - mu).square().sum() / static_cast<double>(v.size());
}

/// ceil(ratio * n) as a count, guarded against FP overshoot when the product
/// is an exact integer (e.g. 0.1 * 30 evaluating to 3.0000000000000004).
inline std::size_t count_ceil(double ratio, std::size_t n) {
  const double raw = ratio * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return k > n ? n : k;
}

}  // namespace alignmap
