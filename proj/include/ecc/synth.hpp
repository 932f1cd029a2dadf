#pragma once

// Seeded synthetic corpora with planted effects.
//
//  - attention-coupling: like counts grow with how far a post sits from its
//    author's neighborhood center.
//  - elevator-drift: every user's ideas move with one shared constant
//    velocity, so users drift away from their own past while staying level
//    with their neighbors.
//  - null: neither.
//
// Every mode consumes the random streams identically, so strength 0 in either
// effect mode reproduces the null corpus exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ecc/corpus.hpp"
#include "ecc/embed.hpp"
#include "ecc/error.hpp"
#include "ecc/random.hpp"

namespace ecc {

enum class SynthEffect { Null, AttentionCoupling, ElevatorDrift };

inline SynthEffect parse_synth_effect(std::string_view s) {
  if (s == "null") return SynthEffect::Null;
  if (s == "attention-coupling") return SynthEffect::AttentionCoupling;
  if (s == "elevator-drift") return SynthEffect::ElevatorDrift;
  throw ConfigError("unknown synth effect: " + std::string(s));
}

inline std::string_view to_string(SynthEffect e) {
  switch (e) {
    case SynthEffect::AttentionCoupling: return "attention-coupling";
    case SynthEffect::ElevatorDrift: return "elevator-drift";
    case SynthEffect::Null: break;
  }
  return "null";
}

struct SynthConfig {
  std::size_t n_users = 100;
  double follow_prob = 0.05;
  std::size_t n_days = 30;
  double posts_per_user_per_day = 1.0;
  std::size_t dim = 8;
  std::uint64_t seed = 1;
  SynthEffect effect = SynthEffect::Null;
  double effect_strength = 0.0;

  double user_spread = 0.3;   // sd of user means around the origin
  double post_noise = 0.05;   // per-component sd of a post around its user mean
  double like_log_mean = 1.0; // baseline log-likes location
  double like_log_sd = 1.2;
  std::int64_t max_likes = 500;
  std::int64_t start_time = 1472688000;  // 2016-09-01T00:00:00Z
  bool emit_text = false;

  void validate() const {
    if (n_users < 1) throw ConfigError("synth: n_users must be positive");
    if (n_days < 1) throw ConfigError("synth: n_days must be positive");
    if (dim < 1) throw ConfigError("synth: dim must be positive");
    if (!(follow_prob >= 0.0 && follow_prob <= 1.0)) throw ConfigError("synth: follow_prob must be in [0, 1]");
    if (!(posts_per_user_per_day > 0.0)) throw ConfigError("synth: post rate must be positive");
    if (!(effect_strength >= 0.0)) throw ConfigError("synth: effect strength must be >= 0");
    if (!(post_noise > 0.0) || !(user_spread >= 0.0) || !(like_log_sd >= 0.0))
      throw ConfigError("synth: noise scales must be non-negative");
  }
};

struct SynthCorpus {
  Corpus corpus;
  VectorStore vectors;
  std::vector<double> planted_deviation;  // per post, in corpus order
  IdeaVector drift_direction;
};

namespace detail {

inline std::string padded(std::string_view prefix, std::size_t v, int width) {
  std::string digits = std::to_string(v);
  if (digits.size() < static_cast<std::size_t>(width))
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(prefix) + digits;
}

inline int digits_for(std::size_t n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

// Pronounceable pseudo-words for synthetic text.
inline std::vector<std::string> synth_vocabulary(std::size_t size, Rng& rng) {
  static constexpr std::string_view onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                                "s", "t", "v", "z", "br", "tr", "st", "pl"};
  static constexpr std::string_view vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::vector<std::string> words;
  words.reserve(size);
  while (words.size() < size) {
    std::string w;
    const std::size_t syllables = 2 + rng.below(2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += onsets[rng.below(std::size(onsets))];
      w += vowels[rng.below(std::size(vowels))];
    }
    w += onsets[rng.below(10)];
    words.push_back(std::move(w));
  }
  return words;
}

}  // namespace detail

inline SynthCorpus gen_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_users;
  const auto dim = static_cast<Eigen::Index>(cfg.dim);
  const int width = detail::digits_for(n - 1);

  std::vector<std::string> users(n);
  for (std::size_t i = 0; i < n; ++i) users[i] = detail::padded("u", i, width);

  // Directed Erdos-Renyi follow graph.
  Rng graph_rng(derive_seed(cfg.seed, 1));
  std::vector<SocialGraph::Edge> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      if (graph_rng.bernoulli(cfg.follow_prob)) edges.emplace_back(users[a], users[b]);
    }
  const SocialGraph graph = SocialGraph::from_edges(users, edges);

  Rng user_rng(derive_seed(cfg.seed, 2));
  std::vector<IdeaVector> user_mean(n, IdeaVector::Zero(dim));
  for (auto& m : user_mean)
    for (Eigen::Index k = 0; k < dim; ++k) m(k) = user_rng.normal(0.0, cfg.user_spread);

  Rng drift_rng(derive_seed(cfg.seed, 3));
  IdeaVector direction(dim);
  for (Eigen::Index k = 0; k < dim; ++k) direction(k) = drift_rng.normal();
  direction /= direction.norm();
  const double velocity = cfg.effect == SynthEffect::ElevatorDrift ? cfg.effect_strength : 0.0;

  // Expected neighborhood center (without drift) of every user.
  std::vector<IdeaVector> hood_center(n);
  for (UserIndex u = 0; u < n; ++u) {
    IdeaVector c = IdeaVector::Zero(dim);
    const auto members = graph.ego_indices(u);
    for (UserIndex m : members) c += user_mean[m];
    hood_center[u] = c / static_cast<double>(members.size());
  }

  struct Draft {
    Post post;
    IdeaVector vec;
    double deviation;
    double like_noise;
  };
  std::vector<Draft> drafts;
  Rng post_rng(derive_seed(cfg.seed, 4));
  Rng text_rng(derive_seed(cfg.seed, 5));
  const auto vocab = cfg.emit_text ? detail::synth_vocabulary(2000, text_rng) : std::vector<std::string>{};
  const double span_seconds = static_cast<double>(cfg.n_days) * static_cast<double>(kSecondsPerDay);
  const double mean_posts = cfg.posts_per_user_per_day * static_cast<double>(cfg.n_days);

  for (UserIndex u = 0; u < n; ++u) {
    const std::size_t count = post_rng.poisson(mean_posts);
    std::vector<std::int64_t> times(count);
    for (auto& t : times) t = static_cast<std::int64_t>(post_rng.uniform() * span_seconds);
    std::sort(times.begin(), times.end());
    const int pw = detail::digits_for(count == 0 ? 0 : count - 1);
    for (std::size_t i = 0; i < count; ++i) {
      Draft d;
      d.post.id = users[u] + detail::padded("_", i, pw);
      d.post.author = users[u];
      d.post.created_at = cfg.start_time + times[i];
      const double days = static_cast<double>(times[i]) / static_cast<double>(kSecondsPerDay);
      // Per-post scale spreads deviations out so some posts sit far from center.
      const double scale = cfg.post_noise * std::exp(0.5 * post_rng.normal());
      IdeaVector noise(dim);
      for (Eigen::Index k = 0; k < dim; ++k) noise(k) = post_rng.normal(0.0, scale);
      const IdeaVector drift = velocity * days * direction;
      d.vec = user_mean[u] + drift + noise;
      d.deviation = (d.vec - (hood_center[u] + drift)).norm();
      d.like_noise = post_rng.normal();
      if (cfg.emit_text) {
        const std::size_t len = 6 + text_rng.below(12);
        std::string text;
        const std::size_t topic = (u * 97) % vocab.size();
        for (std::size_t w = 0; w < len; ++w) {
          // Mostly topic words, occasionally the shared pool.
          const std::size_t idx = text_rng.bernoulli(0.7) ? (topic + text_rng.below(60)) % vocab.size()
                                                          : text_rng.below(vocab.size());
          if (!text.empty()) text += ' ';
          text += vocab[idx];
          if (text_rng.bernoulli(0.05)) text += ',';
        }
        if (text_rng.bernoulli(0.2)) text += " " + std::to_string(text_rng.below(1000));
        d.post.text = text + ".";
      }
      drafts.push_back(std::move(d));
    }
  }

  // Likes depend on the standardized deviation only in attention-coupling mode.
  double mean_dev = 0.0, sd_dev = 0.0;
  for (const auto& d : drafts) mean_dev += d.deviation;
  if (!drafts.empty()) mean_dev /= static_cast<double>(drafts.size());
  for (const auto& d : drafts) sd_dev += (d.deviation - mean_dev) * (d.deviation - mean_dev);
  sd_dev = drafts.size() > 1 ? std::sqrt(sd_dev / static_cast<double>(drafts.size() - 1)) : 1.0;
  if (!(sd_dev > 0.0)) sd_dev = 1.0;
  const double coupling = cfg.effect == SynthEffect::AttentionCoupling ? cfg.effect_strength : 0.0;
  for (auto& d : drafts) {
    const double z = (d.deviation - mean_dev) / sd_dev;
    const double log_likes = cfg.like_log_mean + cfg.like_log_sd * d.like_noise + coupling * z;
    const double likes = std::floor(std::exp(std::min(log_likes, 30.0)));
    d.post.likes = std::min<std::int64_t>(cfg.max_likes, static_cast<std::int64_t>(likes));
  }

  std::sort(drafts.begin(), drafts.end(), [](const Draft& a, const Draft& b) { return post_order(a.post, b.post); });
  SynthCorpus out;
  out.drift_direction = direction;
  out.vectors = VectorStore(cfg.dim);
  std::vector<Post> posts;
  posts.reserve(drafts.size());
  out.planted_deviation.reserve(drafts.size());
  for (auto& d : drafts) {
    out.vectors.insert(d.post.id, std::move(d.vec));
    out.planted_deviation.push_back(d.deviation);
    posts.push_back(std::move(d.post));
  }
  out.corpus = Corpus(std::move(posts), graph);
  return out;
}

}  // namespace ecc
