#pragma once

// Post log and follow graph: loading, validation, LCC extraction, seeded user
// sampling and ego-neighborhood queries. Everything here is immutable once
// built and safe to share across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ecc/error.hpp"
#include "ecc/io.hpp"
#include "ecc/random.hpp"

namespace ecc {

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct Post {
  std::string id;
  std::string author;
  std::int64_t created_at = 0;  // seconds since epoch
  std::string text;
  std::int64_t likes = 0;

  friend bool operator==(const Post&, const Post&) = default;
};

/// Replay order: (created_at, id) ascending.
inline bool post_order(const Post& a, const Post& b) {
  if (a.created_at != b.created_at) return a.created_at < b.created_at;
  return a.id < b.id;
}

using UserIndex = std::size_t;

/// Directed follow graph. Users are stored sorted by id, so an index order is
/// also lexicographic id order. Self-loops are never stored.
class SocialGraph {
 public:
  using Edge = std::pair<std::string, std::string>;  // (follower, followee)

  SocialGraph() = default;

  /// Normalizes an arbitrary user/edge list: endpoints are added to the user
  /// set, duplicate edges collapse and self-loops are dropped.
  static SocialGraph from_edges(std::vector<std::string> users, const std::vector<Edge>& edges) {
    for (const auto& [a, b] : edges) {
      users.push_back(a);
      users.push_back(b);
    }
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());

    SocialGraph g;
    g.users_ = std::move(users);
    g.index_.reserve(g.users_.size());
    for (UserIndex i = 0; i < g.users_.size(); ++i) g.index_.emplace(g.users_[i], i);
    g.out_.resize(g.users_.size());
    for (const auto& [a, b] : edges) {
      if (a == b) continue;
      g.out_[g.index_.at(a)].push_back(g.index_.at(b));
    }
    for (auto& adj : g.out_) {
      std::sort(adj.begin(), adj.end());
      adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    return g;
  }

  std::size_t user_count() const { return users_.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& adj : out_) n += adj.size();
    return n;
  }
  bool empty() const { return users_.empty(); }

  const std::vector<std::string>& users() const { return users_; }
  const std::string& user(UserIndex i) const { return users_.at(i); }
  bool contains(std::string_view id) const { return index_.find(std::string(id)) != index_.end(); }

  UserIndex index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw InputError("unknown user: " + std::string(id));
    return it->second;
  }

  const std::vector<UserIndex>& followees(UserIndex i) const { return out_.at(i); }

  /// Edges in (follower, followee) lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (UserIndex i = 0; i < users_.size(); ++i)
      for (UserIndex j : out_[i]) out.emplace_back(users_[i], users_[j]);
    return out;
  }

  /// {u} plus every user u follows, sorted by id.
  std::vector<std::string> ego_neighborhood(std::string_view id) const {
    const auto members = ego_indices(index_of(id));
    std::vector<std::string> out;
    out.reserve(members.size());
    for (UserIndex m : members) out.push_back(users_[m]);
    return out;
  }

  std::vector<UserIndex> ego_indices(UserIndex u) const {
    std::vector<UserIndex> members = out_.at(u);
    members.insert(std::lower_bound(members.begin(), members.end(), u), u);
    return members;
  }

  /// For every user v, the owners whose ego neighborhood contains v:
  /// v itself plus v's followers. Each list is sorted.
  std::vector<std::vector<UserIndex>> reverse_ego_index() const {
    std::vector<std::vector<UserIndex>> rev(users_.size());
    for (UserIndex v = 0; v < users_.size(); ++v) rev[v].push_back(v);
    for (UserIndex u = 0; u < users_.size(); ++u)
      for (UserIndex v : out_[u]) rev[v].push_back(u);
    for (auto& r : rev) std::sort(r.begin(), r.end());
    return rev;
  }

  /// Subgraph induced on the given user indices.
  SocialGraph induced(std::vector<UserIndex> keep) const {
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    std::vector<char> in(users_.size(), 0);
    for (UserIndex k : keep) in.at(k) = 1;
    std::vector<std::string> users;
    std::vector<Edge> edges;
    for (UserIndex k : keep) {
      users.push_back(users_[k]);
      for (UserIndex j : out_[k])
        if (in[j]) edges.emplace_back(users_[k], users_[j]);
    }
    return from_edges(std::move(users), edges);
  }

  /// Same graph with extra (possibly isolated) users.
  SocialGraph with_users(const std::vector<std::string>& extra) const {
    std::vector<std::string> users = users_;
    users.insert(users.end(), extra.begin(), extra.end());
    return from_edges(std::move(users), edges());
  }

  friend bool operator==(const SocialGraph& a, const SocialGraph& b) {
    return a.users_ == b.users_ && a.out_ == b.out_;
  }

 private:
  std::vector<std::string> users_;
  std::unordered_map<std::string, UserIndex> index_;
  std::vector<std::vector<UserIndex>> out_;
};

/// Sorted posts plus the follow graph; every author is a graph user.
class Corpus {
 public:
  Corpus() = default;

  /// Sorts the posts and adds authors missing from the graph as isolated users.
  Corpus(std::vector<Post> posts, const SocialGraph& graph) : posts_(std::move(posts)) {
    std::sort(posts_.begin(), posts_.end(), post_order);
    std::unordered_set<std::string> ids;
    std::vector<std::string> missing;
    for (const Post& p : posts_) {
      if (!ids.insert(p.id).second) throw InputError("duplicate post id: " + p.id);
      if (!graph.contains(p.author)) missing.push_back(p.author);
    }
    graph_ = missing.empty() ? graph : graph.with_users(missing);
  }

  const std::vector<Post>& posts() const { return posts_; }
  const SocialGraph& graph() const { return graph_; }

  /// Keeps only posts whose author is a user of `g`; the graph becomes `g`.
  Corpus restricted_to(const SocialGraph& g) const {
    std::vector<Post> kept;
    for (const Post& p : posts_)
      if (g.contains(p.author)) kept.push_back(p);
    return Corpus(std::move(kept), g);
  }

 private:
  std::vector<Post> posts_;
  SocialGraph graph_;
};

// --- loading ---------------------------------------------------------------

struct PostLoad {
  std::vector<Post> posts;
  std::size_t skipped = 0;
};

namespace detail {

inline bool read_post(const nlohmann::json& j, Post& p) {
  if (!j.is_object()) return false;
  for (const char* key : {"id", "author", "text"})
    if (!j.contains(key) || !j[key].is_string()) return false;
  for (const char* key : {"created_at", "likes"})
    if (!j.contains(key) || !j[key].is_number_integer()) return false;
  p.id = j["id"].get<std::string>();
  p.author = j["author"].get<std::string>();
  p.text = j["text"].get<std::string>();
  p.created_at = j["created_at"].get<std::int64_t>();
  p.likes = j["likes"].get<std::int64_t>();
  return p.created_at >= 0 && p.likes >= 0 && !p.id.empty() && !p.author.empty();
}

}  // namespace detail

inline PostLoad load_posts(const std::filesystem::path& path) {
  PostLoad out;
  std::unordered_set<std::string> ids;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    Post p;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !detail::read_post(j, p)) {
      log_warn(path.string() + ":" + std::to_string(lineno) + ": malformed post skipped");
      ++out.skipped;
      return;
    }
    if (!ids.insert(p.id).second) throw InputError("duplicate post id: " + p.id);
    out.posts.push_back(std::move(p));
  });
  std::sort(out.posts.begin(), out.posts.end(), post_order);
  return out;
}

struct EdgeLoad {
  SocialGraph graph;
  std::size_t skipped = 0;
};

inline EdgeLoad load_edges(const std::filesystem::path& path) {
  std::vector<SocialGraph::Edge> edges;
  std::size_t skipped = 0;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("follower") || !j.contains("followee") ||
        !j["follower"].is_string() || !j["followee"].is_string() ||
        j["follower"].get_ref<const std::string&>().empty() ||
        j["followee"].get_ref<const std::string&>().empty()) {
      log_warn(path.string() + ":" + std::to_string(lineno) + ": malformed edge skipped");
      ++skipped;
      return;
    }
    edges.emplace_back(j["follower"].get<std::string>(), j["followee"].get<std::string>());
  });
  return {SocialGraph::from_edges({}, edges), skipped};
}

inline void write_posts(std::ostream& out, const std::vector<Post>& posts) {
  for (const Post& p : posts) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["author"] = p.author;
    j["created_at"] = p.created_at;
    j["text"] = p.text;
    j["likes"] = p.likes;
    out << j.dump() << '\n';
  }
}

inline void write_edges(std::ostream& out, const SocialGraph& g) {
  for (const auto& [a, b] : g.edges()) {
    nlohmann::ordered_json j;
    j["follower"] = a;
    j["followee"] = b;
    out << j.dump() << '\n';
  }
}

// --- graph operations --------------------------------------------------------

/// Largest weakly connected component. Ties go to the component containing
/// the lexicographically smallest user id.
inline SocialGraph largest_connected_component(const SocialGraph& g) {
  const std::size_t n = g.user_count();
  if (n == 0) return {};
  std::vector<UserIndex> parent(n);
  std::iota(parent.begin(), parent.end(), UserIndex{0});
  auto find = [&](UserIndex x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (UserIndex u = 0; u < n; ++u)
    for (UserIndex v : g.followees(u)) {
      const UserIndex a = find(u), b = find(v);
      // Keep the smaller index as root so a root is its component's minimum.
      if (a < b) parent[b] = a;
      else if (b < a) parent[a] = b;
    }

  std::vector<std::size_t> size(n, 0);
  for (UserIndex u = 0; u < n; ++u) ++size[find(u)];
  UserIndex best = 0;
  for (UserIndex r = 1; r < n; ++r)
    if (size[r] > size[best]) best = r;  // strict: the earliest root wins ties

  std::vector<UserIndex> keep;
  keep.reserve(size[best]);
  for (UserIndex u = 0; u < n; ++u)
    if (find(u) == best) keep.push_back(u);
  return g.induced(std::move(keep));
}

/// Induced subgraph on ceil(fraction * |users|) users drawn without replacement.
inline SocialGraph sample_users(const SocialGraph& g, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("sample fraction must be in (0, 1], got " + format_double(fraction));
  const std::size_t n = g.user_count();
  // The small shrink keeps products like 0.3 * 10 = 3.0000000000000004 at 3.
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) * (1.0 - 1e-12)));
  if (k >= n) return g;

  std::vector<UserIndex> order(n);
  std::iota(order.begin(), order.end(), UserIndex{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
  order.resize(k);
  return g.induced(std::move(order));
}

}  // namespace ecc
