#pragma once

// Popularity binning, Gaussian KDE, the two-sample Anderson-Darling test
// (Scholz & Stephens, midrank version for ties), Bonferroni correction and the
// Mann-Whitney U test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecc/cloud.hpp"
#include "ecc/error.hpp"
#include "ecc/random.hpp"

namespace ecc {

// --- popularity bins ---------------------------------------------------------

/// Likes L fall in bin i when thresholds[i-1] < L <= thresholds[i]; the last
/// bin takes everything above the largest threshold.
struct PopularityBinning {
  std::vector<std::int64_t> thresholds;
  std::vector<std::string> labels;

  static PopularityBinning from_thresholds(std::vector<std::int64_t> thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end()) ||
        std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end())
      throw ConfigError("bin thresholds must be strictly ascending");
    for (auto t : thresholds)
      if (t < 0) throw ConfigError("bin thresholds must be non-negative");
    PopularityBinning b;
    b.thresholds = std::move(thresholds);
    const auto& th = b.thresholds;
    if (th.size() == 1) {
      b.labels = {"Low", "High"};
    } else if (th.size() == 2) {
      b.labels = {"Low", "Medium", "High"};
    } else if (th.empty()) {
      b.labels = {"All"};
    } else {
      b.labels.push_back("0-" + std::to_string(th[0]));
      for (std::size_t i = 1; i < th.size(); ++i)
        b.labels.push_back(std::to_string(th[i - 1] + 1) + "-" + std::to_string(th[i]));
      b.labels.push_back(">" + std::to_string(th.back()));
    }
    return b;
  }

  std::size_t bin_of(std::int64_t likes) const {
    return static_cast<std::size_t>(std::lower_bound(thresholds.begin(), thresholds.end(), likes) -
                                    thresholds.begin());
  }

  std::size_t size() const { return labels.size(); }
};

/// Parses "10,100" style threshold lists.
inline std::vector<std::int64_t> parse_thresholds(std::string_view text) {
  std::vector<std::int64_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto field = text.substr(pos, end - pos);
    if (!field.empty()) {
      const auto v = parse_int(field);
      if (!v) throw ConfigError("bad bin threshold: " + std::string(field));
      out.push_back(*v);
    }
    pos = end + 1;
  }
  return out;
}

struct Bin {
  std::string label;
  std::vector<double> samples;
};

/// Eccentricities grouped by popularity bin; undefined eccentricities dropped.
inline std::vector<Bin> bin_by_popularity(const std::vector<EccentricityRecord>& records,
                                          const PopularityBinning& binning) {
  std::vector<Bin> bins(binning.size());
  for (std::size_t i = 0; i < bins.size(); ++i) bins[i].label = binning.labels[i];
  for (const auto& r : records)
    if (r.eccentricity) bins[binning.bin_of(r.likes)].samples.push_back(*r.eccentricity);
  return bins;
}

// --- kernel density ------------------------------------------------------------

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t n_samples = 0;
};

/// `points` evenly spaced values over [lo - pad*h, hi + pad*h].
inline std::vector<double> kde_grid(double lo, double hi, double bandwidth, std::size_t points = 512,
                                    double pad = 3.0) {
  if (points < 2) throw ConfigError("kde grid needs at least 2 points");
  const double a = lo - pad * bandwidth;
  const double b = hi + pad * bandwidth;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

inline DensityCurve kde(std::span<const double> samples, double bandwidth, std::vector<double> grid) {
  if (samples.empty()) throw InputError("kde needs at least one sample");
  if (!(bandwidth > 0.0)) throw ConfigError("kde bandwidth must be positive");
  DensityCurve c;
  c.bandwidth = bandwidth;
  c.n_samples = samples.size();
  c.density.resize(grid.size());
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth *
                             std::sqrt(2.0 * std::numbers::pi));
  const double inv2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (const double s : samples) {
      const double d = grid[g] - s;
      acc += std::exp(-d * d * inv2h2);
    }
    c.density[g] = acc * norm;
  }
  c.grid = std::move(grid);
  return c;
}

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

// --- multiple comparisons -------------------------------------------------------

inline double bonferroni(double p, std::size_t m) {
  if (m == 0) throw ConfigError("bonferroni: m must be positive");
  return std::min(1.0, p * static_cast<double>(m));
}

inline std::vector<double> bonferroni(std::span<const double> pvals, std::size_t m) {
  std::vector<double> out;
  out.reserve(pvals.size());
  for (const double p : pvals) out.push_back(bonferroni(p, m));
  return out;
}

// --- combinatorics helpers -----------------------------------------------------------

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

/// Calls fn(positions) for every k-subset of {0..n-1}, in lexicographic order.
template <typename Fn>
void for_each_combination(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k > n) return;
  while (true) {
    fn(std::span<const std::size_t>(idx));
    if (k == 0) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// --- Anderson-Darling -------------------------------------------------------------

enum class PMethod { Table, Permutation };

inline PMethod parse_p_method(std::string_view s) {
  if (s == "table") return PMethod::Table;
  if (s == "permutation") return PMethod::Permutation;
  throw ConfigError("unknown p-value method: " + std::string(s));
}

inline std::string_view to_string(PMethod m) { return m == PMethod::Table ? "table" : "permutation"; }

struct AdOptions {
  PMethod method = PMethod::Table;
  std::size_t n_perm = 999;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct AdResult {
  double a2 = 0.0;            // A2akN
  double standardized = 0.0;  // (A2akN - 1) / sigma_N
  double p = 1.0;
  // How p was obtained: "table", "table-floor" (statistic beyond the table,
  // p is an upper bound), "exact" (all splits) or "monte-carlo".
  std::string p_source;
  bool degenerate = false;  // all pooled values equal
};

/// Pooled-sample layout shared by the statistic and its permutation null.
class AdPooled {
 public:
  AdPooled(std::span<const double> x, std::span<const double> y) : n1_(x.size()), n_(x.size() + y.size()) {
    std::vector<std::pair<double, int>> all;
    all.reserve(n_);
    for (double v : x) all.emplace_back(v, 1);
    for (double v : y) all.emplace_back(v, 0);
    std::sort(all.begin(), all.end());
    labels_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      if (i == 0 || all[i].first != all[i - 1].first) multiplicity_.push_back(0);
      ++multiplicity_.back();
      labels_[i] = static_cast<char>(all[i].second);
    }
    const double N = static_cast<double>(n_);
    double before = 0.0;
    weight_.resize(multiplicity_.size());
    ba_.resize(multiplicity_.size());
    for (std::size_t j = 0; j < multiplicity_.size(); ++j) {
      const double l = static_cast<double>(multiplicity_[j]);
      const double ba = before + l / 2.0;
      const double denom = ba * (N - ba) - N * l / 4.0;
      ba_[j] = ba;
      weight_[j] = denom > 0.0 ? l / denom : 0.0;
      before += l;
    }
  }

  std::size_t n1() const { return n1_; }
  std::size_t size() const { return n_; }
  std::size_t distinct() const { return multiplicity_.size(); }
  const std::vector<char>& labels() const { return labels_; }

  /// A2akN for a labeling of the sorted pooled positions (1 = first sample).
  double statistic(std::span<const char> labels) const {
    const double N = static_cast<double>(n_);
    const double n1 = static_cast<double>(n1_);
    const double n2 = N - n1;
    double sum = 0.0;
    double m_before = 0.0;  // first-sample count strictly below group j
    std::size_t i = 0;
    for (std::size_t j = 0; j < multiplicity_.size(); ++j) {
      double c = 0.0;
      for (std::size_t e = i + multiplicity_[j]; i < e; ++i) c += labels[i];
      const double ma = m_before + c / 2.0;
      const double dev = N * ma - n1 * ba_[j];
      sum += weight_[j] * dev * dev;
      m_before += c;
    }
    return (N - 1.0) / (N * N) * (1.0 / n1 + 1.0 / n2) * sum;
  }

  double observed() const { return statistic(labels_); }

 private:
  std::size_t n1_;
  std::size_t n_;
  std::vector<std::size_t> multiplicity_;
  std::vector<char> labels_;
  std::vector<double> weight_;  // l_j / (B_aj (N - B_aj) - N l_j / 4)
  std::vector<double> ba_;
};

namespace detail {

// Null standard deviation of A2akN for k samples (Scholz & Stephens).
inline double ad_sigma(std::size_t k_samples, std::span<const std::size_t> sizes) {
  const std::size_t n_total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const double N = static_cast<double>(n_total);
  const double k = static_cast<double>(k_samples);
  double H = 0.0;
  for (auto s : sizes) H += 1.0 / static_cast<double>(s);
  double h = 0.0;
  for (std::size_t i = 1; i < n_total; ++i) h += 1.0 / static_cast<double>(i);
  // g = sum_{i=1}^{N-2} sum_{j=i+1}^{N-1} 1 / ((N - i) j)
  double g = 0.0;
  double tail = 0.0;  // sum_{i=N-j+1}^{N-1} 1/i, grown as j increases
  for (std::size_t j = 2; j < n_total; ++j) {
    tail += 1.0 / static_cast<double>(n_total - j + 1);
    g += tail / static_cast<double>(j);
  }
  const double a = (4 * g - 6) * (k - 1) + (10 - 6 * g) * H;
  const double b = (2 * g - 4) * k * k + 8 * h * k + (2 * g - 14 * h - 4) * H - 8 * h + 4 * g - 6;
  const double c = (6 * h + 2 * g - 2) * k * k + (4 * h - 4 * g + 6) * k + (2 * h - 6) * H + 4 * h;
  const double d = (2 * h + 6) * k * k - 4 * h * k;
  const double var = (a * N * N * N + b * N * N + c * N + d) / ((N - 1) * (N - 2) * (N - 3));
  return std::sqrt(var);
}

struct AdTable {
  std::array<double, 7> critical;
  std::array<double, 7> log_sig;
  Eigen::Vector3d fit;  // log p = fit0 + fit1*T + fit2*T^2
};

// Critical values of the standardized statistic for m = k - 1 = 1, and a
// least-squares quadratic through (critical, log significance).
inline const AdTable& ad_table() {
  static const AdTable table = [] {
    constexpr std::array<double, 7> sig{0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001};
    constexpr std::array<double, 7> b0{0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085};
    constexpr std::array<double, 7> b1{-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615};
    constexpr std::array<double, 7> b2{-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154};
    AdTable t{};
    Eigen::Matrix<double, 7, 3> A;
    Eigen::Matrix<double, 7, 1> rhs;
    for (std::size_t i = 0; i < 7; ++i) {
      t.critical[i] = b0[i] + b1[i] + b2[i];
      t.log_sig[i] = std::log(sig[i]);
      const auto r = static_cast<Eigen::Index>(i);
      A(r, 0) = 1.0;
      A(r, 1) = t.critical[i];
      A(r, 2) = t.critical[i] * t.critical[i];
      rhs(r) = t.log_sig[i];
    }
    t.fit = A.colPivHouseholderQr().solve(rhs);
    return t;
  }();
  return table;
}

}  // namespace detail

/// Permutation p-value of the observed split. Enumerates every split when
/// there are at most `n_perm` of them, otherwise draws `n_perm` seeded random
/// splits (permutation i uses a stream derived from (seed, i)).
inline std::pair<double, std::string> ad_permutation_p(const AdPooled& pooled, double observed,
                                                       const AdOptions& opts) {
  const std::size_t n = pooled.size();
  const std::size_t n1 = pooled.n1();
  const double threshold = observed * (1.0 - 1e-12) - 1e-300;
  const std::uint64_t splits = binomial(n, n1);
  if (splits <= opts.n_perm) {
    std::uint64_t hits = 0;
    std::vector<char> labels(n);
    for_each_combination(n, n1, [&](std::span<const std::size_t> pos) {
      std::fill(labels.begin(), labels.end(), 0);
      for (auto p : pos) labels[p] = 1;
      if (pooled.statistic(labels) >= threshold) ++hits;
    });
    return {static_cast<double>(hits) / static_cast<double>(splits), "exact"};
  }
  if (opts.n_perm == 0) throw ConfigError("n_perm must be positive");
  const unsigned threads = std::max(1U, opts.threads);
  std::vector<std::uint64_t> hits(threads, 0);
  auto work = [&](unsigned w) {
    std::vector<char> labels;
    for (std::size_t i = w; i < opts.n_perm; i += threads) {
      labels = pooled.labels();
      Rng rng(derive_seed(opts.seed, i));
      rng.shuffle(std::span<char>(labels));
      if (pooled.statistic(labels) >= threshold) ++hits[w];
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back([&work, w] { work(w); });
  }
  const std::uint64_t total = std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
  return {static_cast<double>(total + 1) / static_cast<double>(opts.n_perm + 1), "monte-carlo"};
}

/// Two-sample Anderson-Darling test. With the table method, statistics below
/// the tabulated range (p > 0.25) fall back to the permutation p-value and
/// statistics above it report the table floor 0.001.
inline AdResult ad_test_2sample(std::span<const double> x, std::span<const double> y,
                                const AdOptions& opts = {}) {
  if (x.size() < 2 || y.size() < 2) throw InputError("anderson-darling needs >= 2 samples per group");
  const AdPooled pooled(x, y);
  AdResult r;
  if (pooled.distinct() < 2) {
    r.degenerate = true;
    r.p = 1.0;
    r.p_source = "degenerate";
    return r;
  }
  r.a2 = pooled.observed();
  const std::array<std::size_t, 2> sizes{x.size(), y.size()};
  r.standardized = (r.a2 - 1.0) / detail::ad_sigma(2, sizes);

  if (opts.method == PMethod::Permutation) {
    std::tie(r.p, r.p_source) = ad_permutation_p(pooled, r.a2, opts);
    return r;
  }
  const auto& table = detail::ad_table();
  if (r.standardized < table.critical.front()) {
    std::tie(r.p, r.p_source) = ad_permutation_p(pooled, r.a2, opts);
  } else if (r.standardized > table.critical.back()) {
    r.p = 0.001;
    r.p_source = "table-floor";
  } else {
    const double t = r.standardized;
    r.p = std::exp(table.fit(0) + table.fit(1) * t + table.fit(2) * t * t);
    r.p_source = "table";
  }
  return r;
}

// --- Mann-Whitney ---------------------------------------------------------------

struct MwResult {
  double u = 0.0;  // pairs with x > y, ties counted one half
  double p = 1.0;  // two-sided
  bool exact = false;
};

inline constexpr std::size_t kMannWhitneyExactLimit = 12;

namespace detail {

// Twice the midrank of every pooled position (so ranks stay integral), in
// input order: first x, then y.
inline std::vector<std::int64_t> doubled_midranks(std::span<const double> x, std::span<const double> y,
                                                  double* tie_term) {
  const std::size_t n = x.size() + y.size();
  std::vector<std::pair<double, std::size_t>> all;
  all.reserve(n);
  for (std::size_t i = 0; i < x.size(); ++i) all.emplace_back(x[i], i);
  for (std::size_t i = 0; i < y.size(); ++i) all.emplace_back(y[i], x.size() + i);
  std::sort(all.begin(), all.end());
  std::vector<std::int64_t> ranks(n);
  double ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const auto r2 = static_cast<std::int64_t>(i + j + 1);  // 2 * ((i+1) + j) / 2
    for (std::size_t k = i; k < j; ++k) ranks[all[k].second] = r2;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

}  // namespace detail

inline MwResult mann_whitney(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw InputError("mann-whitney needs at least one sample per group");
  const std::size_t n1 = x.size(), n2 = y.size(), n = n1 + n2;
  double tie_term = 0.0;
  const auto ranks = detail::doubled_midranks(x, y, &tie_term);
  std::int64_t r2 = 0;
  for (std::size_t i = 0; i < n1; ++i) r2 += ranks[i];
  const auto base = static_cast<std::int64_t>(n1 * (n1 + 1));
  const std::int64_t u2 = r2 - base;  // 2U
  const auto nm = static_cast<std::int64_t>(n1 * n2);

  MwResult res;
  res.u = static_cast<double>(u2) / 2.0;
  if (n <= kMannWhitneyExactLimit) {
    const std::int64_t obs = std::abs(u2 - nm);
    std::uint64_t hits = 0, total = 0;
    for_each_combination(n, n1, [&](std::span<const std::size_t> pos) {
      std::int64_t s = 0;
      for (auto p : pos) s += ranks[p];
      if (std::abs(s - base - nm) >= obs) ++hits;
      ++total;
    });
    res.p = static_cast<double>(hits) / static_cast<double>(total);
    res.exact = true;
    return res;
  }
  const double N = static_cast<double>(n);
  const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                     ((N + 1.0) - tie_term / (N * (N - 1.0)));
  if (!(var > 0.0)) return res;
  const double z = std::max(0.0, std::abs(res.u - static_cast<double>(nm) / 2.0) - 0.5) / std::sqrt(var);
  res.p = std::min(1.0, std::erfc(z / std::numbers::sqrt2));
  return res;
}

// --- per-bin summary ----------------------------------------------------------------

struct BinStats {
  std::string label;
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<DensityCurve> density;
};

struct PairTest {
  std::string a;
  std::string b;
  AdResult ad;
  double p_bonferroni = 1.0;
};

struct BinSummary {
  double bandwidth = 5.0;
  std::vector<double> grid;
  std::vector<BinStats> bins;
  std::vector<PairTest> tests;
  std::vector<std::string> notices;
};

struct SummaryOptions {
  double bandwidth = 5.0;
  std::size_t grid_points = 512;
  double grid_pad = 3.0;  // in bandwidths
  AdOptions ad;
};

/// Mean and KDE per bin on one shared grid, plus Bonferroni-corrected
/// pairwise Anderson-Darling tests between bins holding >= 2 samples.
inline BinSummary bin_summary(const std::vector<Bin>& bins, const SummaryOptions& opts = {}) {
  BinSummary out;
  out.bandwidth = opts.bandwidth;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Bin& b : bins)
    for (double s : b.samples) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  if (lo <= hi) out.grid = kde_grid(lo, hi, opts.bandwidth, opts.grid_points, opts.grid_pad);

  for (const Bin& b : bins) {
    BinStats st;
    st.label = b.label;
    st.n = b.samples.size();
    if (!b.samples.empty()) {
      double sum = 0.0;
      for (double s : b.samples) sum += s;
      st.mean = sum / static_cast<double>(b.samples.size());
      st.density = kde(b.samples, opts.bandwidth, out.grid);
    }
    out.bins.push_back(std::move(st));
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < bins.size(); ++i)
    for (std::size_t j = i + 1; j < bins.size(); ++j) {
      if (bins[i].samples.size() < 2 || bins[j].samples.size() < 2) {
        out.notices.push_back("test " + bins[i].label + " vs " + bins[j].label +
                              " skipped: fewer than 2 samples");
        continue;
      }
      pairs.emplace_back(i, j);
    }
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const auto [i, j] = pairs[t];
    AdOptions ad = opts.ad;
    ad.seed = derive_seed(opts.ad.seed, t);
    PairTest pt;
    pt.a = bins[i].label;
    pt.b = bins[j].label;
    pt.ad = ad_test_2sample(bins[i].samples, bins[j].samples, ad);
    pt.p_bonferroni = bonferroni(pt.ad.p, pairs.size());
    out.tests.push_back(std::move(pt));
  }
  return out;
}

}  // namespace ecc
