#include "orthoflow/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

namespace ortho {

namespace {

constexpr double kTauSlack = 1e-12;
constexpr long kEnumerationCap = 1000000;

void require_block_size(int d, int s, const char* op) {
  if (s < 2) throw std::invalid_argument(std::string(op) + ": s must be >= 2");
  if (s > d) throw std::invalid_argument(std::string(op) + ": s must be <= d");
  if (d % s != 0) throw std::invalid_argument(std::string(op) + ": s must divide d");
}

BigInt factorial(int n) {
  BigInt f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

BigInt int_pow(const BigInt& base, int e) {
  BigInt p = 1;
  for (int k = 0; k < e; ++k) p *= base;
  return p;
}

std::vector<Eigen::MatrixXd> restrict_blocks(const Eigen::MatrixXd& w,
                                             const VertexPartition& t) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(t.blocks.size());
  for (const auto& block : t.blocks) {
    const int n = static_cast<int>(block.size());
    Eigen::MatrixXd m(n, n);
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < n; ++c) m(a, c) = w(block[a], block[c]);
    }
    out.push_back(std::move(m));
  }
  return out;
}

VertexPartition matching_to_partition(int d,
                                      const std::vector<std::pair<int, int>>& m) {
  std::vector<char> matched(d, 0);
  std::vector<std::vector<int>> blocks;
  blocks.reserve(m.size() + d);
  for (const auto& [i, j] : m) {
    blocks.push_back({i, j});
    matched[i] = 1;
    matched[j] = 1;
  }
  for (int v = 0; v < d; ++v) {
    if (!matched[v]) blocks.push_back({v});
  }
  VertexPartition t;
  t.d = d;
  t.blocks = std::move(blocks);
  t.canonicalize();
  return t;
}

void validate_matching(int d, const std::vector<std::pair<int, int>>& m) {
  std::vector<char> busy(d, 0);
  for (const auto& [i, j] : m) {
    if (i < 0 || j >= d || i >= j) {
      throw std::invalid_argument("matching edge out of range");
    }
    if (busy[i] || busy[j]) {
      throw std::invalid_argument("vertex repeated within a matching");
    }
    busy[i] = 1;
    busy[j] = 1;
  }
}

}  // namespace

VertexPartition VertexPartition::from_blocks(int d,
                                             std::vector<std::vector<int>> blocks) {
  if (d < 1) throw std::invalid_argument("partition: d must be positive");
  std::vector<char> seen(d, 0);
  int total = 0;
  for (const auto& block : blocks) {
    if (block.empty()) throw std::invalid_argument("partition: empty block");
    for (int v : block) {
      if (v < 0 || v >= d) throw std::invalid_argument("partition: vertex out of range");
      if (seen[v]) throw std::invalid_argument("partition: vertex repeated");
      seen[v] = 1;
      ++total;
    }
  }
  if (total != d) throw std::invalid_argument("partition: blocks must cover all vertices");
  VertexPartition t;
  t.d = d;
  t.blocks = std::move(blocks);
  t.canonicalize();
  return t;
}

void VertexPartition::canonicalize() {
  for (auto& block : blocks) std::sort(block.begin(), block.end());
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

bool VertexPartition::has_uniform_block_size(int s) const {
  return std::all_of(blocks.begin(), blocks.end(), [s](const auto& b) {
    return static_cast<int>(b.size()) == s;
  });
}

Eigen::MatrixXd SkewEstimate::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(partition.d, partition.d);
  for (std::size_t k = 0; k < partition.blocks.size(); ++k) {
    const auto& block = partition.blocks[k];
    const int n = static_cast<int>(block.size());
    for (int a = 0; a < n; ++a) {
      for (int c = 0; c < n; ++c) m(block[a], block[c]) = scale * block_data[k](a, c);
    }
  }
  return m;
}

WeightFunction WeightFunction::abs() {
  return WeightFunction(Kind::Abs, {});
}

WeightFunction WeightFunction::square() {
  return WeightFunction(Kind::Square, {});
}

WeightFunction WeightFunction::custom(std::function<double(double)> h) {
  if (!h) throw std::invalid_argument("custom weight: empty function");
  if (h(0.0) != 0.0) throw std::invalid_argument("custom weight: h(0) must be 0");
  Rng probe(0x5eedf00dull);
  for (int k = 0; k < 64; ++k) {
    const double x = (probe.uniform() * 2.0 - 1.0) * 10.0;
    const double hp = h(x);
    const double hn = h(-x);
    if (!(hp >= 0.0) || !(hn >= 0.0)) {
      throw std::invalid_argument("custom weight: h must be nonnegative");
    }
    if (std::abs(hp - hn) > 1e-12 * std::max(1.0, std::abs(hp))) {
      throw std::invalid_argument("custom weight: h must be even");
    }
  }
  return WeightFunction(Kind::Custom, std::move(h));
}

double WeightFunction::operator()(double x) const {
  switch (kind_) {
    case Kind::Abs:
      return std::abs(x);
    case Kind::Square:
      return x * x;
    case Kind::Custom:
      return fn_(x);
  }
  return 0.0;
}

BigInt count_partitions(int d, int s) {
  require_block_size(d, s, "count_partitions");
  const int l = d / s;
  return factorial(d) / (int_pow(factorial(s), l) * factorial(l));
}

BigInt edge_multiplicity(int d, int s) {
  require_block_size(d, s, "edge_multiplicity");
  const int l = d / s;
  return factorial(d - 2) /
         (factorial(l - 1) * int_pow(factorial(s), l - 1) * factorial(s - 2));
}

double uniform_scale(int d, int s) {
  require_block_size(d, s, "uniform_scale");
  return static_cast<double>(d - 1) / static_cast<double>(s - 1);
}

VertexPartition sample_uniform_partition(int d, int s, Rng& rng) {
  require_block_size(d, s, "sample_uniform_partition");
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = d - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  VertexPartition t;
  t.d = d;
  t.blocks.reserve(d / s);
  for (int k = 0; k < d; k += s) {
    t.blocks.emplace_back(perm.begin() + k, perm.begin() + k + s);
  }
  t.canonicalize();
  return t;
}

namespace {

void enumerate_rec(int s, std::vector<int>& remaining,
                   std::vector<std::vector<int>>& current,
                   std::vector<VertexPartition>& out, int d) {
  if (remaining.empty()) {
    VertexPartition t;
    t.d = d;
    t.blocks = current;
    out.push_back(std::move(t));
    return;
  }
  // First remaining vertex anchors the next block; choose its s-1 partners.
  const int anchor = remaining.front();
  std::vector<int> rest(remaining.begin() + 1, remaining.end());
  const int n = static_cast<int>(rest.size());
  std::vector<int> idx(s - 1);
  std::function<void(int, int)> choose = [&](int start, int depth) {
    if (depth == s - 1) {
      std::vector<int> block{anchor};
      for (int k : idx) block.push_back(rest[k]);
      std::vector<int> next;
      next.reserve(n - (s - 1));
      std::size_t taken = 0;
      for (int k = 0; k < n; ++k) {
        if (taken < idx.size() && idx[taken] == k) {
          ++taken;
        } else {
          next.push_back(rest[k]);
        }
      }
      current.push_back(std::move(block));
      enumerate_rec(s, next, current, out, d);
      current.pop_back();
      return;
    }
    for (int k = start; k < n; ++k) {
      idx[depth] = k;
      choose(k + 1, depth + 1);
    }
  };
  choose(0, 0);
}

}  // namespace

std::vector<VertexPartition> enumerate_partitions(int d, int s) {
  require_block_size(d, s, "enumerate_partitions");
  if (count_partitions(d, s) > kEnumerationCap) {
    throw std::runtime_error("enumerate_partitions: partition count exceeds cap");
  }
  std::vector<VertexPartition> out;
  std::vector<int> all(d);
  std::iota(all.begin(), all.end(), 0);
  std::vector<std::vector<int>> current;
  enumerate_rec(s, all, current, out, d);
  return out;
}

SkewEstimate uniform_estimate(const SkewSymmetric& omega, const VertexPartition& t) {
  if (t.d != omega.dim()) {
    throw std::invalid_argument("uniform_estimate: dimension mismatch");
  }
  if (t.blocks.empty()) throw std::invalid_argument("uniform_estimate: empty partition");
  const int s = static_cast<int>(t.blocks.front().size());
  if (!t.has_uniform_block_size(s)) {
    throw std::invalid_argument("uniform_estimate: blocks must share one size");
  }
  SkewEstimate est;
  est.partition = t;
  est.block_data = restrict_blocks(omega.matrix(), t);
  est.scale = uniform_scale(t.d, s);
  return est;
}

SkewEstimate uniform_estimate_from_gradient(const ManifoldPoint& x,
                                            const AmbientGradient& g,
                                            const VertexPartition& t) {
  const Eigen::MatrixXd& xm = x.matrix();
  const Eigen::MatrixXd& gm = g.data;
  if (gm.rows() != xm.rows() || gm.cols() != xm.cols()) {
    throw std::invalid_argument("uniform_estimate_from_gradient: shape mismatch");
  }
  if (t.d != xm.rows()) {
    throw std::invalid_argument("uniform_estimate_from_gradient: dimension mismatch");
  }
  if (t.blocks.empty()) {
    throw std::invalid_argument("uniform_estimate_from_gradient: empty partition");
  }
  const int s = static_cast<int>(t.blocks.front().size());
  if (!t.has_uniform_block_size(s)) {
    throw std::invalid_argument("uniform_estimate_from_gradient: blocks must share one size");
  }
  SkewEstimate est;
  est.partition = t;
  est.block_data.reserve(t.blocks.size());
  for (const auto& block : t.blocks) {
    const int n = static_cast<int>(block.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      for (int c = a + 1; c < n; ++c) {
        const double v = gm.row(block[a]).dot(xm.row(block[c])) -
                         xm.row(block[a]).dot(gm.row(block[c]));
        m(a, c) = v;
        m(c, a) = -v;
      }
    }
    est.block_data.push_back(std::move(m));
  }
  est.scale = uniform_scale(t.d, s);
  return est;
}

double l1_h_norm(const SkewSymmetric& omega, const WeightFunction& h) {
  const Eigen::MatrixXd& w = omega.matrix();
  const int d = omega.dim();
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) acc += h(w(i, j));
  }
  return 2.0 * acc;
}

double mc_l1_estimate(const SkewSymmetric& omega, const WeightFunction& h,
                      double r, Rng& rng) {
  const int d = omega.dim();
  const double n = 0.5 * d * (d - 1);
  if (!(r >= 1.0) || r > n) {
    throw std::invalid_argument("mc_l1_estimate: need 1 <= r <= d(d-1)/2");
  }
  const Eigen::MatrixXd& w = omega.matrix();
  const double p = r / n;
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (rng.uniform() < p) acc += h(w(i, j));
    }
  }
  return 2.0 * (n / r) * acc;
}

double h_block_mass(const SkewSymmetric& omega, const VertexPartition& t,
                    const WeightFunction& h) {
  if (t.d != omega.dim()) throw std::invalid_argument("h_block_mass: dimension mismatch");
  const Eigen::MatrixXd& w = omega.matrix();
  double acc = 0.0;
  for (const auto& block : t.blocks) {
    const int n = static_cast<int>(block.size());
    for (int a = 0; a < n; ++a) {
      for (int c = a + 1; c < n; ++c) acc += h(w(block[a], block[c]));
    }
  }
  return acc;
}

HRegularDraw h_regular_sample(const SkewSymmetric& omega, int s,
                              const WeightFunction& h,
                              const HRegularOptions& opt, Rng& rng) {
  const int d = omega.dim();
  require_block_size(d, s, "h_regular_sample");
  if (opt.max_trials < 1) {
    throw std::invalid_argument("h_regular_sample: max_trials must be positive");
  }
  const double l1 = l1_h_norm(omega, h);
  if (!(l1 > 0.0)) {
    throw std::invalid_argument("h_regular_sample: matrix has zero h-mass");
  }
  double tau = l1;
  if (opt.version == HRegularOptions::Version::II) {
    if (!(opt.alpha > 0.0) || opt.alpha > 1.0 || !(opt.beta > 0.0) || opt.beta > 1.0) {
      throw std::invalid_argument("h_regular_sample: alpha and beta must lie in (0,1]");
    }
    tau = (static_cast<double>(s) / (static_cast<double>(d) * opt.alpha * opt.beta)) * l1;
  }
  for (long trial = 1; trial <= opt.max_trials; ++trial) {
    VertexPartition t = sample_uniform_partition(d, s, rng);
    const double hm = h_block_mass(omega, t, h);
    double q = 2.0 * hm / tau;
    if (q > 1.0 + kTauSlack) {
      if (opt.version == HRegularOptions::Version::II) {
        throw TauViolationError(
            "h_regular_sample: threshold tau below 2*h-mass of a sampled partition");
      }
      q = 1.0;
    } else if (q > 1.0) {
      q = 1.0;
    }
    if (rng.uniform() < q) {
      SkewEstimate est;
      est.partition = t;
      est.block_data = restrict_blocks(omega.matrix(), t);
      est.scale = l1 / (2.0 * hm);
      return {std::move(est), trial};
    }
  }
  throw MaxTrialsError("h_regular_sample: no acceptance within max_trials");
}

namespace {

MatchingFamily round_robin_family(int d) {
  // Circle method; for odd d a dummy vertex supplies the byes.
  const int n = (d % 2 == 0) ? d : d + 1;
  MatchingFamily family;
  family.d = d;
  for (int r = 0; r < n - 1; ++r) {
    std::vector<std::pair<int, int>> m;
    auto add = [&](int a, int b) {
      if (a >= d || b >= d) return;  // dummy pairing = bye
      if (a > b) std::swap(a, b);
      m.emplace_back(a, b);
    };
    add(n - 1, r);
    for (int k = 1; k < n / 2; ++k) {
      add((r + k) % (n - 1), (r - k + (n - 1)) % (n - 1));
    }
    std::sort(m.begin(), m.end());
    family.matchings.push_back(std::move(m));
  }
  return family;
}

MatchingFamily greedy_heavy_family(const Eigen::MatrixXd& w) {
  const int d = static_cast<int>(w.rows());
  std::vector<std::tuple<double, int, int>> edges;
  edges.reserve(d * (d - 1) / 2);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) edges.emplace_back(std::abs(w(i, j)), i, j);
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });

  std::vector<char> taken(edges.size(), 0);
  std::size_t remaining = edges.size();
  std::vector<std::pair<double, std::vector<std::pair<int, int>>>> rounds;
  while (remaining > 0) {
    std::vector<char> busy(d, 0);
    std::vector<std::pair<int, int>> m;
    double mass = 0.0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (taken[k]) continue;
      const auto& [aw, i, j] = edges[k];
      if (busy[i] || busy[j]) continue;
      busy[i] = 1;
      busy[j] = 1;
      taken[k] = 1;
      --remaining;
      mass += aw;
      m.emplace_back(i, j);
    }
    std::sort(m.begin(), m.end());
    rounds.emplace_back(mass, std::move(m));
  }
  std::stable_sort(rounds.begin(), rounds.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  MatchingFamily family;
  family.d = d;
  family.matchings.reserve(rounds.size());
  for (auto& [mass, m] : rounds) family.matchings.push_back(std::move(m));
  return family;
}

}  // namespace

MatchingFamily build_nonintersecting_family(const SkewSymmetric& omega,
                                            FamilyStrategy strategy) {
  const int d = omega.dim();
  if (d < 2) throw std::invalid_argument("build_nonintersecting_family: need d >= 2");
  switch (strategy) {
    case FamilyStrategy::RoundRobin:
      return round_robin_family(d);
    case FamilyStrategy::GreedyHeavy:
      return greedy_heavy_family(omega.matrix());
  }
  throw std::logic_error("build_nonintersecting_family: unknown strategy");
}

SkewEstimate importance_sample_family(const SkewSymmetric& omega,
                                      const MatchingFamily& family,
                                      FamilyDistribution dist,
                                      const WeightFunction& h, Rng& rng) {
  const int d = omega.dim();
  if (family.d != d) {
    throw std::invalid_argument("importance_sample_family: dimension mismatch");
  }
  const Eigen::MatrixXd& w = omega.matrix();

  Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> covered =
      Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, d);
  for (const auto& m : family.matchings) {
    validate_matching(d, m);
    for (const auto& [i, j] : m) covered(i, j) = 1;
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (w(i, j) != 0.0 && !covered(i, j)) {
        throw std::runtime_error(
            "importance_sample_family: family does not cover a nonzero edge");
      }
    }
  }

  std::vector<double> mass(family.matchings.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < family.matchings.size(); ++k) {
    double acc = 0.0;
    for (const auto& [i, j] : family.matchings[k]) {
      acc += (dist == FamilyDistribution::HRegular) ? h(w(i, j)) : w(i, j) * w(i, j);
    }
    mass[k] = (dist == FamilyDistribution::OptimalL2) ? std::sqrt(acc) : acc;
    total += mass[k];
  }

  std::size_t pick = 0;
  double scale = 1.0;
  if (total > 0.0) {
    const double u = rng.uniform() * total;
    double cum = 0.0;
    pick = family.matchings.size() - 1;
    for (std::size_t k = 0; k < family.matchings.size(); ++k) {
      cum += mass[k];
      if (u < cum) {
        pick = k;
        break;
      }
    }
    scale = total / mass[pick];
  }

  SkewEstimate est;
  est.partition = matching_to_partition(d, family.matchings[pick]);
  est.block_data = restrict_blocks(w, est.partition);
  est.scale = scale;
  return est;
}

double rho_statistic(const SkewSymmetric& omega, int s, const WeightFunction& h) {
  const int d = omega.dim();
  require_block_size(d, s, "rho_statistic");
  const double l1 = l1_h_norm(omega, h);
  if (!(l1 > 0.0)) throw std::invalid_argument("rho_statistic: matrix has zero h-mass");
  const Eigen::MatrixXd& w = omega.matrix();
  std::vector<double> hv;
  hv.reserve(d * (d - 1) / 2);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) hv.push_back(h(w(i, j)));
  }
  const int m = d * (s - 1) / 2;
  std::partial_sort(hv.begin(), hv.begin() + m, hv.end(), std::greater<>());
  double top = 0.0;
  for (int k = 0; k < m; ++k) top += hv[k];
  return l1 / (2.0 * top);
}

}  // namespace ortho
