#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "orthoflow/sampling.hpp"

// Independent reference implementations used to check the library. Everything
// here favors obviousness over speed; callers keep d small.
namespace testhelp {

// Partitions of {0..d-1} into blocks of size s, by direct recursion: the
// lowest unplaced vertex anchors a block, joined by every (s-1)-subset of the
// remaining pool.
inline void enumerate_rec(const std::vector<int>& pool, int s,
                          std::vector<std::vector<int>>& current,
                          std::vector<std::vector<std::vector<int>>>& out) {
  if (pool.empty()) {
    out.push_back(current);
    return;
  }
  const int anchor = pool[0];
  const int m = static_cast<int>(pool.size()) - 1;
  std::vector<int> idx(s - 1);
  for (int i = 0; i < s - 1; ++i) idx[i] = i;
  while (true) {
    std::vector<int> block = {anchor};
    std::vector<bool> used(m, false);
    for (int i : idx) {
      block.push_back(pool[i + 1]);
      used[i] = true;
    }
    std::vector<int> rest;
    for (int i = 0; i < m; ++i)
      if (!used[i]) rest.push_back(pool[i + 1]);
    current.push_back(block);
    enumerate_rec(rest, s, current, out);
    current.pop_back();

    if (s == 1) break;
    int k = s - 2;
    while (k >= 0 && idx[k] == m - (s - 1) + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int i = k + 1; i < s - 1; ++i) idx[i] = idx[i - 1] + 1;
  }
}

inline std::vector<std::vector<std::vector<int>>> naive_partitions(int d, int s) {
  if (s < 1 || d % s != 0) throw std::invalid_argument("naive_partitions: s must divide d");
  std::vector<int> pool(d);
  for (int i = 0; i < d; ++i) pool[i] = i;
  std::vector<std::vector<int>> current;
  std::vector<std::vector<std::vector<int>>> out;
  enumerate_rec(pool, s, current, out);
  return out;
}

inline ortho::BigInt naive_partition_count(int d, int s) {
  return static_cast<ortho::BigInt>(naive_partitions(d, s).size());
}

// Partitions whose blocks put a and b together.
inline ortho::BigInt naive_edge_count(int d, int s, int a, int b) {
  ortho::BigInt n = 0;
  for (const auto& p : naive_partitions(d, s))
    for (const auto& block : p) {
      bool has_a = false;
      bool has_b = false;
      for (int v : block) {
        has_a |= v == a;
        has_b |= v == b;
      }
      if (has_a && has_b) ++n;
      if (has_a || has_b) break;
    }
  return n;
}

inline Eigen::MatrixXd restrict_dense(const Eigen::MatrixXd& w,
                                      const std::vector<std::vector<int>>& blocks) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  for (const auto& block : blocks)
    for (std::size_t a = 0; a < block.size(); ++a)
      for (std::size_t b = 0; b < block.size(); ++b)
        if (a != b) out(block[a], block[b]) = w(block[a], block[b]);
  return out;
}

inline double chi_square_stat(const std::vector<long>& observed,
                              const std::vector<double>& probs) {
  if (observed.size() != probs.size())
    throw std::invalid_argument("chi_square_stat: size mismatch");
  long n = 0;
  for (long o : observed) n += o;
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double expected = static_cast<double>(n) * probs[k];
    if (expected <= 0.0) throw std::invalid_argument("chi_square_stat: zero expectation");
    const double diff = static_cast<double>(observed[k]) - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

// Upper 0.99 quantiles of the chi-square distribution.
inline double chi_square_q99(int dof) {
  switch (dof) {
    case 2: return 9.21034037197618;
    case 4: return 13.276704135987622;
    case 9: return 21.66599433346194;
    case 14: return 29.14123774432988;
    default: throw std::invalid_argument("chi_square_q99: quantile not tabulated");
  }
}

}  // namespace testhelp
