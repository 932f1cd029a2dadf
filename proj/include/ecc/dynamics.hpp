#pragma once

// Per-user eccentricity dynamics. F is the weighted mean absolute change of a
// user's eccentricity series, G the weighted mean signed change. Weights are
// a function of each step's time gap and the user's mean gap.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecc/cloud.hpp"
#include "ecc/error.hpp"
#include "ecc/io.hpp"

namespace ecc {

struct TimedValue {
  double t;  // seconds
  double value;
};

struct FgScores {
  double f = 0.0;
  double g = 0.0;
};

/// weight(gap, mean_gap) for one step of the series.
using GapWeight = std::function<double(double gap, double mean_gap)>;

enum class FgWeighting { InverseGap, ProportionalGap, Uniform };

inline GapWeight gap_weight(FgWeighting w) {
  switch (w) {
    case FgWeighting::InverseGap:
      return [](double gap, double mean_gap) { return mean_gap / gap; };
    case FgWeighting::ProportionalGap:
      return [](double gap, double mean_gap) { return gap / mean_gap; };
    case FgWeighting::Uniform:
      break;
  }
  return [](double, double) { return 1.0; };
}

inline std::string_view to_string(FgWeighting w) {
  switch (w) {
    case FgWeighting::InverseGap: return "inverse-gap";
    case FgWeighting::ProportionalGap: return "proportional-gap";
    case FgWeighting::Uniform: return "uniform";
  }
  return "uniform";
}

inline FgWeighting parse_fg_weighting(std::string_view s) {
  if (s == "inverse-gap") return FgWeighting::InverseGap;
  if (s == "proportional-gap") return FgWeighting::ProportionalGap;
  if (s == "uniform") return FgWeighting::Uniform;
  throw ConfigError("unknown F/G weighting: " + std::string(s));
}

inline constexpr FgWeighting kDefaultFgWeighting = FgWeighting::Uniform;

/// Mean of the consecutive gaps, each clamped below by `min_gap`.
inline std::optional<double> mean_gap(std::span<const double> times, double min_gap) {
  if (times.size() < 2) return std::nullopt;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) total += std::max(times[k + 1] - times[k], min_gap);
  return total / static_cast<double>(times.size() - 1);
}

/// F and G of a time-sorted series; nullopt for fewer than two points.
inline std::optional<FgScores> fg_scores(std::span<const TimedValue> series, double min_gap,
                                         const GapWeight& weight) {
  if (!(min_gap > 0.0)) throw ConfigError("min_gap must be positive");
  if (series.size() < 2) return std::nullopt;
  std::vector<double> gaps(series.size() - 1);
  double gap_sum = 0.0;
  for (std::size_t k = 0; k + 1 < series.size(); ++k) {
    const double dt = series[k + 1].t - series[k].t;
    if (dt < 0.0) throw InvariantError("fg_scores: series not sorted by time");
    gaps[k] = std::max(dt, min_gap);
    gap_sum += gaps[k];
  }
  const double mean = gap_sum / static_cast<double>(gaps.size());
  double wsum = 0.0, fsum = 0.0, gsum = 0.0;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    const double w = weight(gaps[k], mean);
    const double de = series[k + 1].value - series[k].value;
    wsum += w;
    fsum += w * std::abs(de);
    gsum += w * de;
  }
  if (!(wsum > 0.0)) throw InvariantError("fg_scores: weights must be positive");
  return FgScores{fsum / wsum, gsum / wsum};
}

inline std::optional<FgScores> fg_scores(std::span<const TimedValue> series, double min_gap = 1.0,
                                         FgWeighting weighting = kDefaultFgWeighting) {
  return fg_scores(series, min_gap, gap_weight(weighting));
}

struct UserDynamics {
  std::string user;
  std::size_t n = 0;  // posts with a defined eccentricity
  std::optional<FgScores> ecc;
  std::optional<FgScores> self;
  std::optional<double> mean_gap_seconds;  // over all of the user's posts
};

struct DynamicsOptions {
  double min_gap_seconds = 1.0;
  FgWeighting weighting = kDefaultFgWeighting;
};

/// One entry per author, sorted by user id. Each series uses only defined
/// values; undefined posts are skipped, not interpolated.
inline std::vector<UserDynamics> user_dynamics(const std::vector<EccentricityRecord>& records,
                                               const DynamicsOptions& opts = {}) {
  struct Series {
    std::vector<double> times;
    std::vector<TimedValue> ecc;
    std::vector<TimedValue> self;
  };
  std::map<std::string, Series> by_user;
  for (const auto& r : records) {
    Series& s = by_user[r.author];
    const auto t = static_cast<double>(r.created_at);
    s.times.push_back(t);
    if (r.eccentricity) s.ecc.push_back({t, *r.eccentricity});
    if (r.self_eccentricity) s.self.push_back({t, *r.self_eccentricity});
  }
  const GapWeight weight = gap_weight(opts.weighting);
  std::vector<UserDynamics> out;
  out.reserve(by_user.size());
  for (auto& [user, s] : by_user) {
    // Records from one replay are already time-ordered per author; re-sort in
    // case the caller concatenated files.
    auto by_t = [](const TimedValue& a, const TimedValue& b) { return a.t < b.t; };
    std::stable_sort(s.ecc.begin(), s.ecc.end(), by_t);
    std::stable_sort(s.self.begin(), s.self.end(), by_t);
    std::sort(s.times.begin(), s.times.end());
    UserDynamics d;
    d.user = user;
    d.n = s.ecc.size();
    d.ecc = fg_scores(s.ecc, opts.min_gap_seconds, weight);
    d.self = fg_scores(s.self, opts.min_gap_seconds, weight);
    d.mean_gap_seconds = mean_gap(s.times, opts.min_gap_seconds);
    out.push_back(std::move(d));
  }
  return out;
}

inline constexpr const char* kDynamicsHeader = "user,n,f_ecc,g_ecc,f_self,g_self,mean_gap_seconds";

inline void write_dynamics_csv(std::ostream& out, const std::vector<UserDynamics>& rows) {
  out << kDynamicsHeader << '\n';
  for (const auto& d : rows) {
    auto f = [](const std::optional<FgScores>& s) { return s ? format_double(s->f) : std::string{}; };
    auto g = [](const std::optional<FgScores>& s) { return s ? format_double(s->g) : std::string{}; };
    write_csv_row(out, {d.user, std::to_string(d.n), f(d.ecc), g(d.ecc), f(d.self), g(d.self),
                        format_optional(d.mean_gap_seconds)});
  }
}

inline std::vector<UserDynamics> load_dynamics_csv(const std::filesystem::path& path) {
  std::vector<UserDynamics> out;
  bool header = true;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    if (header) {
      if (line != kDynamicsHeader) throw InputError(path.string() + ": unexpected header");
      header = false;
      return;
    }
    const auto f = split_csv_row(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 7) throw InputError(where + ": expected 7 fields");
    UserDynamics d;
    d.user = f[0];
    const auto n = parse_int(f[1]);
    if (!n) throw InputError(where + ": bad n");
    d.n = static_cast<std::size_t>(*n);
    auto pair = [&](const std::string& a, const std::string& b) -> std::optional<FgScores> {
      const auto x = parse_double(a), y = parse_double(b);
      if (x.has_value() != y.has_value()) throw InputError(where + ": half-defined F/G pair");
      if (!x) return std::nullopt;
      return FgScores{*x, *y};
    };
    d.ecc = pair(f[2], f[3]);
    d.self = pair(f[4], f[5]);
    d.mean_gap_seconds = parse_double(f[6]);
    out.push_back(std::move(d));
  });
  return out;
}

}  // namespace ecc
