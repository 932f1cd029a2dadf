#include <gtest/gtest.h>

#include <sstream>

#include "ecc/cloud.hpp"
#include "random_corpus.hpp"
#include "test_support.hpp"

using namespace ecc;

namespace {

constexpr std::int64_t kDay = kSecondsPerDay;
constexpr std::int64_t kWindow = 5 * kDay;

IdeaVector vec(std::initializer_list<double> xs) {
  IdeaVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

struct Fixture {
  Corpus corpus;
  VectorStore vectors;
};

Fixture three_users() {
  std::vector<SocialGraph::Edge> edges;
  for (const char* a : {"a", "b", "c"})
    for (const char* b : {"a", "b", "c"})
      if (std::string(a) != b) edges.emplace_back(a, b);
  Fixture f{Corpus({{"p1", "b", 1 * kDay, "", 0}, {"p2", "c", 2 * kDay, "", 0}, {"p3", "a", 3 * kDay, "", 0}},
                   SocialGraph::from_edges({}, edges)),
            VectorStore(1)};
  f.vectors.insert("p1", vec({0}));
  f.vectors.insert("p2", vec({2}));
  f.vectors.insert("p3", vec({4}));
  return f;
}

Fixture two_posts(std::int64_t second_at) {
  Fixture f{Corpus({{"pb", "b", 0, "", 0}, {"pa", "a", second_at, "", 0}}, SocialGraph::from_edges({}, {{"a", "b"}})),
            VectorStore(1)};
  f.vectors.insert("pb", vec({1}));
  f.vectors.insert("pa", vec({5}));
  return f;
}

const EccentricityRecord& record_for(const std::vector<EccentricityRecord>& rs, const std::string& id) {
  for (const auto& r : rs)
    if (r.post_id == id) return r;
  throw std::runtime_error("no record " + id);
}

bool close(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= 1e-9 * (1.0 + std::abs(*b));
}

}  // namespace

TEST(KnowledgeBase, Centroids) {
  VectorMatrix m(5, 2);
  m << 0, 0, 2, 0, 1, 2, 3, 4, 5, 6;
  KnowledgeBase a(m, kWindow);
  EXPECT_FALSE(a.centroid().has_value());
  EXPECT_FALSE(a.distance(vec({0, 0})).has_value());
  a.insert(0, 0);
  EXPECT_EQ(*a.centroid(), vec({0, 0}));
  a.insert(1, 1);
  EXPECT_EQ(*a.centroid(), vec({1, 0}));

  KnowledgeBase b(m, kWindow);
  b.insert(2, 0);
  b.insert(3, 0);
  b.insert(4, 0);
  EXPECT_EQ(*b.centroid(), vec({3, 4}));
  EXPECT_DOUBLE_EQ(*b.distance(vec({6, 8})), 5.0);
}

TEST(KnowledgeBase, ExpiryIsHalfOpen) {
  VectorMatrix m(3, 1);
  m << 1, 2, 3;
  KnowledgeBase kb(m, 10);
  kb.insert(0, 0);
  kb.insert(1, 5);
  kb.insert(2, 9);
  kb.expire(10);  // cutoff 0: the entry at 0 is exactly one window old and stays
  EXPECT_EQ(kb.count(), 3u);
  kb.expire(11);
  EXPECT_EQ(kb.count(), 2u);
  EXPECT_EQ(kb.running_sum()(0), 5.0);
  kb.expire(100);
  EXPECT_TRUE(kb.empty());
  EXPECT_EQ(kb.running_sum()(0), 0.0);
}

TEST(KnowledgeBase, RejectsOutOfOrderInsert) {
  VectorMatrix m(2, 1);
  m << 1, 2;
  KnowledgeBase kb(m, 10);
  kb.insert(0, 5);
  EXPECT_THROW(kb.insert(1, 4), InvariantError);
  EXPECT_THROW(KnowledgeBase(m, 0), ConfigError);
}

TEST(KnowledgeBase, RunningSumStaysCloseUnderChurn) {
  Rng rng(1);
  const Eigen::Index n = 20000;
  VectorMatrix m(n, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < 4; ++k) m(i, k) = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(12)) - 6.0);
  KnowledgeBase kb(m, 50);
  for (Eigen::Index i = 0; i < n; ++i) {
    kb.expire(i);
    kb.insert(static_cast<std::size_t>(i), i);
    if (i % 997 == 0) {
      const Eigen::VectorXd fresh = kb.fresh_sum();
      EXPECT_LE((kb.running_sum() - fresh).norm(), 1e-9 * (1.0 + fresh.norm()));
    }
  }
}

TEST(Replay, WorkedExample) {
  const auto f = three_users();
  const auto rs = replay(f.corpus, f.vectors);
  const auto& r = record_for(rs, "p3");
  ASSERT_TRUE(r.eccentricity.has_value());
  EXPECT_EQ(*r.eccentricity, 3.0);
  EXPECT_FALSE(r.self_eccentricity.has_value());
  EXPECT_EQ(r.cloud_size, 2u);
  EXPECT_EQ(r.self_cloud_size, 0u);
  EXPECT_EQ(eccentricity_oracle(f.corpus, f.vectors, kWindow, "p3"),
            (std::pair<std::optional<double>, std::optional<double>>{3.0, std::nullopt}));
}

TEST(Replay, RecordsFollowCorpusOrder) {
  const auto f = three_users();
  const auto rs = replay(f.corpus, f.vectors);
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_EQ(rs[0].post_id, "p1");
  EXPECT_EQ(rs[1].post_id, "p2");
  EXPECT_EQ(rs[2].post_id, "p3");
  EXPECT_EQ(rs[1].eccentricity, 2.0);
}

TEST(Replay, FirstPostIsUndefined) {
  const auto f = three_users();
  const auto& r = replay(f.corpus, f.vectors)[0];
  EXPECT_FALSE(r.eccentricity.has_value());
  EXPECT_FALSE(r.self_eccentricity.has_value());
  EXPECT_EQ(r.cloud_size, 0u);
}

TEST(Replay, WindowBoundary) {
  const auto past = two_posts(kWindow + 1);
  const auto r1 = record_for(replay(past.corpus, past.vectors), "pa");
  EXPECT_FALSE(r1.eccentricity.has_value());
  EXPECT_EQ(eccentricity_oracle(past.corpus, past.vectors, kWindow, "pa"),
            (std::pair<std::optional<double>, std::optional<double>>{std::nullopt, std::nullopt}));

  // created_at == t - W lies inside [t - W, t).
  const auto edge = two_posts(kWindow);
  const auto r2 = record_for(replay(edge.corpus, edge.vectors), "pa");
  EXPECT_EQ(r2.eccentricity, 4.0);
  EXPECT_EQ(r2.cloud_size, 1u);
}

TEST(Replay, SameSecondPostsAreInvisibleToEachOther) {
  const auto f = two_posts(0);
  const auto rs = replay(f.corpus, f.vectors);
  EXPECT_FALSE(record_for(rs, "pa").eccentricity.has_value());
  EXPECT_FALSE(record_for(rs, "pb").eccentricity.has_value());
}

TEST(Replay, FollowersAreNotInTheNeighborhood) {
  // a follows b: b's posts reach a, a's posts never reach b.
  Fixture f{Corpus({{"pa", "a", 0, "", 0}, {"pb", "b", 10, "", 0}}, SocialGraph::from_edges({}, {{"a", "b"}})),
            VectorStore(1)};
  f.vectors.insert("pa", vec({1}));
  f.vectors.insert("pb", vec({5}));
  EXPECT_FALSE(record_for(replay(f.corpus, f.vectors), "pb").eccentricity.has_value());
}

TEST(Replay, OwnPostsAreInBothClouds) {
  Fixture f{Corpus({{"p1", "a", 0, "", 0}, {"p2", "a", 10, "", 0}}, SocialGraph::from_edges({"a"}, {})),
            VectorStore(2)};
  f.vectors.insert("p1", vec({0, 0}));
  f.vectors.insert("p2", vec({3, 4}));
  const auto& r = record_for(replay(f.corpus, f.vectors), "p2");
  EXPECT_EQ(r.eccentricity, 5.0);
  EXPECT_EQ(r.self_eccentricity, 5.0);
}

TEST(Replay, MissingVectorIsFatalAndNamesThePost) {
  auto f = three_users();
  VectorStore partial(1);
  partial.insert("p1", vec({0}));
  try {
    replay(f.corpus, partial);
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("p2"), std::string::npos);
  }
}

TEST(Replay, OracleUnknownPostIsFatal) {
  const auto f = three_users();
  EXPECT_THROW(eccentricity_oracle(f.corpus, f.vectors, kWindow, "nope"), InputError);
}

TEST(Replay, MatchesOracleOnRandomCorpora) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto rc = test::random_corpus(seed);
    const auto rs = replay(rc.corpus, rc.vectors);
    for (const auto& r : rs) {
      const auto [e, s] = eccentricity_oracle(rc.corpus, rc.vectors, kWindow, r.post_id);
      EXPECT_TRUE(close(r.eccentricity, e)) << r.post_id;
      EXPECT_TRUE(close(r.self_eccentricity, s)) << r.post_id;
    }
  }
}

TEST(Replay, CloudSizesMatchDirectCounts) {
  const auto rc = test::random_corpus(7, 15, 300);
  const auto& posts = rc.corpus.posts();
  const auto rs = replay(rc.corpus, rc.vectors);
  const auto& g = rc.corpus.graph();
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto hood = g.ego_neighborhood(posts[i].author);
    std::size_t cloud = 0, self = 0;
    for (const auto& q : posts) {
      const bool live = q.created_at < posts[i].created_at && q.created_at >= posts[i].created_at - kWindow;
      if (!live) continue;
      cloud += std::binary_search(hood.begin(), hood.end(), q.author);
      self += q.author == posts[i].author;
    }
    EXPECT_EQ(rs[i].cloud_size, cloud);
    EXPECT_EQ(rs[i].self_cloud_size, self);
  }
}

TEST(Replay, SameResultAtAnyThreadCount) {
  const auto rc = test::random_corpus(3, 40, 2000);
  const auto one = replay(rc.corpus, rc.vectors, {kWindow, 1});
  for (unsigned t : {2U, 3U, 8U}) EXPECT_EQ(replay(rc.corpus, rc.vectors, {kWindow, t}), one);
}

TEST(Replay, RunningSumsMatchFreshSumsAfterReplay) {
  const auto rc = test::random_corpus(11, 20, 3000, 8, 60 * kDay);
  std::size_t checked = 0;
  replay_inspect(rc.corpus, rc.vectors, kWindow, [&](UserIndex, const OwnerState& st) {
    for (const KnowledgeBase* kb : {&st.neighborhood, &st.self}) {
      const Eigen::VectorXd fresh = kb->fresh_sum();
      EXPECT_LE((kb->running_sum() - fresh).norm(), 1e-9 * (1.0 + fresh.norm()));
      ++checked;
    }
  });
  EXPECT_EQ(checked, 2 * rc.corpus.graph().user_count());
}

TEST(Replay, TranslationInvariant) {
  const auto rc = test::random_corpus(21);
  VectorStore shifted(8);
  IdeaVector shift(8);
  for (Eigen::Index k = 0; k < 8; ++k) shift(k) = 1000.0 * static_cast<double>(k) - 3000.0;
  for (const auto& id : rc.vectors.sorted_ids()) shifted.insert(id, rc.vectors.at(id) + shift);
  const auto a = replay(rc.corpus, rc.vectors);
  const auto b = replay(rc.corpus, shifted);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(close(b[i].eccentricity, a[i].eccentricity));
    EXPECT_TRUE(close(b[i].self_eccentricity, a[i].self_eccentricity));
  }
}

TEST(Replay, WindowMustBePositive) {
  const auto f = three_users();
  EXPECT_THROW(replay(f.corpus, f.vectors, {0, 1}), ConfigError);
}

TEST(EccentricityCsv, RoundTrip) {
  const auto rc = test::random_corpus(5, 10, 200);
  const auto rs = replay(rc.corpus, rc.vectors);
  test::TempDir dir("ecc");
  {
    std::ofstream out(dir / "e.csv");
    write_eccentricity_csv(out, rs);
  }
  EXPECT_EQ(load_eccentricity_csv(dir / "e.csv"), rs);
}

TEST(EccentricityCsv, InconsistentRowsAreRejected) {
  test::TempDir dir("ecc");
  const std::string header = std::string(kEccentricityHeader) + "\n";
  EXPECT_THROW(load_eccentricity_csv(test::write_text(dir / "a.csv", header + "p,a,0,0,1.5,,0,0\n")), InputError);
  EXPECT_THROW(load_eccentricity_csv(test::write_text(dir / "b.csv", header + "p,a,0,0,x,,1,0\n")), InputError);
  EXPECT_THROW(load_eccentricity_csv(test::write_text(dir / "c.csv", "wrong\n")), InputError);
  EXPECT_EQ(load_eccentricity_csv(test::write_text(dir / "d.csv", header)).size(), 0u);
}
