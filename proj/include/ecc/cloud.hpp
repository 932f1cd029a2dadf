#pragma once

// Windowed knowledge bases and the eccentricity replay.
//
// Each owner's knowledge base holds the posts of its ego neighborhood created
// in [t - window, t) for the time t of the post being scored. Owners are
// independent, so the replay is partitioned by owner across worker threads;
// every owner's arithmetic happens in one fixed order, which makes the output
// identical at any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ecc/corpus.hpp"
#include "ecc/embed.hpp"
#include "ecc/error.hpp"
#include "ecc/io.hpp"

namespace ecc {

inline constexpr std::int64_t kDefaultWindowSeconds = 5 * kSecondsPerDay;

/// One row per post, rows in replay order.
using VectorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EccentricityRecord {
  std::string post_id;
  std::string author;
  std::int64_t created_at = 0;
  std::int64_t likes = 0;
  std::optional<double> eccentricity;       // empty iff cloud_size == 0
  std::optional<double> self_eccentricity;  // empty iff self_cloud_size == 0
  std::size_t cloud_size = 0;
  std::size_t self_cloud_size = 0;

  friend bool operator==(const EccentricityRecord&, const EccentricityRecord&) = default;
};

/// Sliding window of post vectors with an incrementally maintained sum.
class KnowledgeBase {
 public:
  struct Entry {
    std::size_t row;  // row in the shared vector matrix
    std::int64_t created_at;
  };

  KnowledgeBase(const VectorMatrix& vectors, std::int64_t window_seconds)
      : vectors_(&vectors), window_(window_seconds), sum_(Eigen::VectorXd::Zero(vectors.cols())) {
    if (window_seconds <= 0) throw ConfigError("window must be positive");
  }

  /// Entries must arrive in non-decreasing created_at order.
  void insert(std::size_t row, std::int64_t created_at) {
    if (!entries_.empty() && created_at < entries_.back().created_at)
      throw InvariantError("knowledge base insert out of time order");
    entries_.push_back({row, created_at});
    sum_ += vectors_->row(static_cast<Eigen::Index>(row)).transpose();
  }

  /// Drops every entry older than `now - window`, i.e. created_at < now - window.
  void expire(std::int64_t now) {
    const std::int64_t cutoff = now - window_;
    bool removed = false;
    while (!entries_.empty() && entries_.front().created_at < cutoff) {
      sum_ -= vectors_->row(static_cast<Eigen::Index>(entries_.front().row)).transpose();
      entries_.pop_front();
      ++removals_;
      removed = true;
    }
    if (!removed) return;
    // Subtraction leaves rounding residue; rebuild from scratch once removals
    // outnumber live entries, which bounds drift at amortized O(1) cost.
    if (entries_.empty()) {
      sum_.setZero();
      removals_ = 0;
    } else if (removals_ > 2 * entries_.size() + 32) {
      sum_ = fresh_sum();
      removals_ = 0;
    }
  }

  std::size_t count() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::int64_t window_seconds() const { return window_; }
  const std::deque<Entry>& entries() const { return entries_; }
  const Eigen::VectorXd& running_sum() const { return sum_; }

  Eigen::VectorXd fresh_sum() const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(vectors_->cols());
    for (const Entry& e : entries_) s += vectors_->row(static_cast<Eigen::Index>(e.row)).transpose();
    return s;
  }

  /// Mean of the entries; nullopt for an empty cloud.
  std::optional<IdeaVector> centroid() const {
    if (entries_.empty()) return std::nullopt;
    return IdeaVector(sum_ / static_cast<double>(entries_.size()));
  }

  /// L2 distance of `v` from the centroid; nullopt for an empty cloud.
  template <typename Derived>
  std::optional<double> distance(const Eigen::MatrixBase<Derived>& v) const {
    if (entries_.empty()) return std::nullopt;
    const double inv = 1.0 / static_cast<double>(entries_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sum_.size(); ++i) {
      const double d = v(i) - sum_(i) * inv;
      acc += d * d;
    }
    return std::sqrt(acc);
  }

 private:
  const VectorMatrix* vectors_;
  std::int64_t window_;
  std::deque<Entry> entries_;
  Eigen::VectorXd sum_;
  std::size_t removals_ = 0;
};

struct ReplayOptions {
  std::int64_t window_seconds = kDefaultWindowSeconds;
  unsigned threads = 1;
};

/// Final per-owner state after a replay, for drift and content checks.
struct OwnerState {
  KnowledgeBase neighborhood;
  KnowledgeBase self;
};

namespace detail {

struct ReplayInput {
  const Corpus* corpus;
  VectorMatrix vectors;                       // row i = posts()[i]
  std::vector<UserIndex> author;              // per post
  std::vector<std::vector<std::size_t>> feed; // per owner: posts by ego members, in order
  std::vector<std::vector<std::size_t>> own;  // per owner: own posts, in order
};

inline ReplayInput prepare_replay(const Corpus& corpus, const VectorStore& vectors) {
  const auto& posts = corpus.posts();
  const SocialGraph& g = corpus.graph();
  ReplayInput in;
  in.corpus = &corpus;
  const Eigen::Index dim = posts.empty() ? 0 : static_cast<Eigen::Index>(vectors.dim());
  in.vectors.resize(static_cast<Eigen::Index>(posts.size()), dim);
  in.author.resize(posts.size());
  in.feed.resize(g.user_count());
  in.own.resize(g.user_count());
  const auto reverse = g.reverse_ego_index();
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (!vectors.contains(posts[i].id)) throw InputError("no vector for post " + posts[i].id);
    in.vectors.row(static_cast<Eigen::Index>(i)) = vectors.at(posts[i].id).transpose();
    const UserIndex a = g.index_of(posts[i].author);
    in.author[i] = a;
    in.own[a].push_back(i);
    for (UserIndex owner : reverse[a]) in.feed[owner].push_back(i);
  }
  return in;
}

/// Scores every post authored by `owner` and returns the final windows.
inline OwnerState replay_owner(const ReplayInput& in, UserIndex owner, std::int64_t window,
                               std::vector<EccentricityRecord>& records) {
  const auto& posts = in.corpus->posts();
  OwnerState st{KnowledgeBase(in.vectors, window), KnowledgeBase(in.vectors, window)};
  const auto& feed = in.feed[owner];
  const auto& own = in.own[owner];
  std::size_t next_feed = 0;
  std::size_t next_own = 0;
  for (const std::size_t p : own) {
    const std::int64_t t = posts[p].created_at;
    // Everything strictly earlier than t becomes visible; p itself and any
    // same-second post stay out. Posts already outside the window are skipped.
    const std::int64_t cutoff = t - window;
    for (; next_feed < feed.size() && posts[feed[next_feed]].created_at < t; ++next_feed) {
      const std::int64_t c = posts[feed[next_feed]].created_at;
      if (c >= cutoff) st.neighborhood.insert(feed[next_feed], c);
    }
    for (; next_own < own.size() && posts[own[next_own]].created_at < t; ++next_own) {
      const std::int64_t c = posts[own[next_own]].created_at;
      if (c >= cutoff) st.self.insert(own[next_own], c);
    }
    st.neighborhood.expire(t);
    st.self.expire(t);

    const auto v = in.vectors.row(static_cast<Eigen::Index>(p)).transpose();
    EccentricityRecord& rec = records[p];
    rec.cloud_size = st.neighborhood.count();
    rec.self_cloud_size = st.self.count();
    rec.eccentricity = st.neighborhood.distance(v);
    rec.self_eccentricity = st.self.distance(v);
  }
  return st;
}

template <typename Fn>
void for_each_owner(std::size_t n_owners, unsigned threads, Fn&& fn) {
  threads = std::max(1U, threads);
  if (threads == 1 || n_owners < 2) {
    for (UserIndex u = 0; u < n_owners; ++u) fn(u);
    return;
  }
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (UserIndex u = w; u < n_owners; u += threads) fn(u);
    });
  }
}

inline std::vector<EccentricityRecord> blank_records(const Corpus& corpus) {
  std::vector<EccentricityRecord> records(corpus.posts().size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Post& p = corpus.posts()[i];
    records[i].post_id = p.id;
    records[i].author = p.author;
    records[i].created_at = p.created_at;
    records[i].likes = p.likes;
  }
  return records;
}

}  // namespace detail

/// Eccentricity and self-eccentricity of every post, in replay order.
inline std::vector<EccentricityRecord> replay(const Corpus& corpus, const VectorStore& vectors,
                                              const ReplayOptions& opts = {}) {
  if (opts.window_seconds <= 0) throw ConfigError("window must be positive");
  const auto in = detail::prepare_replay(corpus, vectors);
  auto records = detail::blank_records(corpus);
  // Each owner writes only the records of its own posts.
  detail::for_each_owner(corpus.graph().user_count(), opts.threads, [&](UserIndex u) {
    detail::replay_owner(in, u, opts.window_seconds, records);
  });
  return records;
}

/// Replays sequentially and hands each owner's final windows to `inspect`
/// (called as inspect(owner, const OwnerState&)) while they are still live.
template <typename Inspect>
void replay_inspect(const Corpus& corpus, const VectorStore& vectors, std::int64_t window_seconds,
                    Inspect&& inspect) {
  const auto in = detail::prepare_replay(corpus, vectors);
  auto records = detail::blank_records(corpus);
  for (UserIndex u = 0; u < corpus.graph().user_count(); ++u) {
    const OwnerState st = detail::replay_owner(in, u, window_seconds, records);
    inspect(u, st);
  }
}

/// Brute-force recomputation of one post's (eccentricity, self-eccentricity)
/// by scanning the whole log; shares no state with replay().
inline std::pair<std::optional<double>, std::optional<double>> eccentricity_oracle(
    const Corpus& corpus, const VectorStore& vectors, std::int64_t window_seconds,
    const std::string& post_id) {
  const auto& posts = corpus.posts();
  const auto it = std::find_if(posts.begin(), posts.end(), [&](const Post& p) { return p.id == post_id; });
  if (it == posts.end()) throw InputError("unknown post id: " + post_id);
  const Post& target = *it;
  const auto members = corpus.graph().ego_neighborhood(target.author);
  const std::unordered_set<std::string> ego(members.begin(), members.end());
  const IdeaVector& v = vectors.at(target.id);

  IdeaVector cloud_sum = IdeaVector::Zero(v.size());
  IdeaVector self_sum = IdeaVector::Zero(v.size());
  std::size_t cloud_n = 0, self_n = 0;
  for (const Post& q : posts) {
    if (q.created_at >= target.created_at || q.created_at < target.created_at - window_seconds) continue;
    if (ego.contains(q.author)) {
      cloud_sum += vectors.at(q.id);
      ++cloud_n;
    }
    if (q.author == target.author) {
      self_sum += vectors.at(q.id);
      ++self_n;
    }
  }
  auto dist = [&](const IdeaVector& sum, std::size_t n) -> std::optional<double> {
    if (n == 0) return std::nullopt;
    return (v - sum / static_cast<double>(n)).norm();
  };
  return {dist(cloud_sum, cloud_n), dist(self_sum, self_n)};
}

// --- CSV -------------------------------------------------------------------

inline constexpr const char* kEccentricityHeader =
    "post_id,author,created_at,likes,eccentricity,self_eccentricity,cloud_size,self_cloud_size";

inline void write_eccentricity_csv(std::ostream& out, const std::vector<EccentricityRecord>& records) {
  out << kEccentricityHeader << '\n';
  for (const auto& r : records) {
    write_csv_row(out, {r.post_id, r.author, std::to_string(r.created_at), std::to_string(r.likes),
                        format_optional(r.eccentricity), format_optional(r.self_eccentricity),
                        std::to_string(r.cloud_size), std::to_string(r.self_cloud_size)});
  }
}

inline std::vector<EccentricityRecord> load_eccentricity_csv(const std::filesystem::path& path) {
  std::vector<EccentricityRecord> out;
  bool header = true;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    if (header) {
      if (line != kEccentricityHeader) throw InputError(path.string() + ": unexpected header");
      header = false;
      return;
    }
    const auto f = split_csv_row(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 8) throw InputError(where + ": expected 8 fields");
    EccentricityRecord r;
    r.post_id = f[0];
    r.author = f[1];
    const auto created = parse_int(f[2]);
    const auto likes = parse_int(f[3]);
    const auto cs = parse_int(f[6]);
    const auto ss = parse_int(f[7]);
    if (!created || !likes || !cs || !ss) throw InputError(where + ": bad integer field");
    r.created_at = *created;
    r.likes = *likes;
    r.cloud_size = static_cast<std::size_t>(*cs);
    r.self_cloud_size = static_cast<std::size_t>(*ss);
    r.eccentricity = parse_double(f[4]);
    r.self_eccentricity = parse_double(f[5]);
    if (!f[4].empty() && !r.eccentricity) throw InputError(where + ": bad eccentricity");
    if (!f[5].empty() && !r.self_eccentricity) throw InputError(where + ": bad self_eccentricity");
    if (r.eccentricity.has_value() != (r.cloud_size > 0) ||
        r.self_eccentricity.has_value() != (r.self_cloud_size > 0))
      throw InputError(where + ": eccentricity defined-ness disagrees with cloud size");
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace ecc
