#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "ecc/embed.hpp"
#include "ecc/random.hpp"
#include "test_support.hpp"

using namespace ecc;
using test::TempDir;
using test::write_text;

TEST(Hash, FrozenValues) {
  // Values from an independent implementation of the same byte hash.
  EXPECT_EQ(hash64("", 0), 6566800829925814604ULL);
  EXPECT_EQ(hash64("abc", 0), 3949867740538847546ULL);
  EXPECT_EQ(hash64("abc", 1), 545413165968348661ULL);
  EXPECT_EQ(hash64("caf\xc3\xa9", 42), 10560211452396898959ULL);
  EXPECT_EQ(derive_seed(0, 1), 18032406582538019046ULL);
  EXPECT_EQ(derive_seed(7, 3), 14655875397442714480ULL);
}

TEST(Rng, EngineSequenceIsStandard) {
  // First output of the 64-bit Mersenne Twister for its default seed.
  EXPECT_EQ(Rng(5489).next(), 14514284786278117030ULL);
}

TEST(FitVectorizer, MinCountFiltersVocabulary) {
  const auto m = fit_vectorizer({{"a", "b"}, {"a", "c"}}, 16, 2);
  ASSERT_EQ(m.idf.size(), 1u);
  EXPECT_TRUE(m.in_vocabulary("a"));
}

TEST(FitVectorizer, IdfClosedForm) {
  const auto m = fit_vectorizer({{"a", "b"}, {"a", "c"}}, 16, 1);
  EXPECT_DOUBLE_EQ(m.idf.at("a"), 1.0);
  EXPECT_DOUBLE_EQ(m.idf.at("b"), std::log(3.0 / 2.0) + 1.0);
  EXPECT_DOUBLE_EQ(m.idf.at("c"), std::log(3.0 / 2.0) + 1.0);
}

TEST(FitVectorizer, RepeatsCountTowardMinCountButNotDocumentFrequency) {
  const auto m = fit_vectorizer({{"x", "x", "x"}, {"y"}}, 8, 3);
  ASSERT_TRUE(m.in_vocabulary("x"));
  EXPECT_FALSE(m.in_vocabulary("y"));
  EXPECT_DOUBLE_EQ(m.idf.at("x"), std::log(3.0 / 2.0) + 1.0);
}

TEST(FitVectorizer, EmptyCorpus) {
  EXPECT_TRUE(fit_vectorizer({}, 8, 1).idf.empty());
  EXPECT_TRUE(fit_vectorizer({{}, {}}, 8, 1).idf.empty());
}

TEST(FitVectorizer, BadParametersAreFatal) {
  EXPECT_THROW(fit_vectorizer({}, 0, 1), ConfigError);
  EXPECT_THROW(fit_vectorizer({}, 8, 0), ConfigError);
}

TEST(FitVectorizer, DocumentOrderDoesNotMatter) {
  Rng rng(2);
  std::vector<TokenList> docs;
  for (int d = 0; d < 60; ++d) {
    TokenList doc;
    for (std::size_t i = 0, n = rng.below(10); i < n; ++i) doc.push_back("w" + std::to_string(rng.below(25)));
    docs.push_back(doc);
  }
  const auto a = fit_vectorizer(docs, 32, 3);
  rng.shuffle(std::span<TokenList>(docs));
  const auto b = fit_vectorizer(docs, 32, 3);
  EXPECT_EQ(a.idf, b.idf);
}

TEST(Embed, OutOfVocabularyGivesZeroVector) {
  const auto m = fit_vectorizer({{"a"}}, 8, 1);
  EXPECT_EQ(embed(m, {"zzz", "q"}), IdeaVector::Zero(8));
  EXPECT_EQ(embed(m, {}), IdeaVector::Zero(8));
}

TEST(Embed, DeterministicAcrossCalls) {
  const auto m = fit_vectorizer({{"a", "b", "c"}, {"a", "d"}}, 4, 1, 99);
  const IdeaVector x = embed(m, {"a", "b", "d", "a"});
  const IdeaVector y = embed(m, {"a", "b", "d", "a"});
  ASSERT_EQ(x.size(), y.size());
  EXPECT_EQ(std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())), 0);
}

TEST(Embed, SingleTokenIsSignedUnitVector) {
  const auto m = fit_vectorizer({{"dog"}}, 1000, 1, 0);
  const IdeaVector v = embed(m, {"dog"});
  // Bucket and sign worked out by hand from the hash definition.
  IdeaVector expected = IdeaVector::Zero(1000);
  expected(47) = -1.0;
  EXPECT_EQ(v, expected);
  EXPECT_EQ(hash_feature(m, "dog"), (std::pair<std::size_t, double>{47, -1.0}));
}

TEST(Embed, TfIdfWeightsBeforeNormalization) {
  auto m = fit_vectorizer({{"a", "b"}, {"a"}}, 1 << 16, 1, 3);
  const auto [ba, sa] = hash_feature(m, "a");
  const auto [bb, sb] = hash_feature(m, "b");
  ASSERT_NE(ba, bb);
  const IdeaVector v = embed(m, {"a", "a", "b"});
  const double wa = 2.0 * m.idf.at("a"), wb = 1.0 * m.idf.at("b");
  const double norm = std::hypot(wa, wb);
  EXPECT_NEAR(v(static_cast<Eigen::Index>(ba)), sa * wa / norm, 1e-15);
  EXPECT_NEAR(v(static_cast<Eigen::Index>(bb)), sb * wb / norm, 1e-15);
}

TEST(Embed, NormIsZeroOrOne) {
  Rng rng(8);
  std::vector<TokenList> docs;
  for (int d = 0; d < 200; ++d) {
    TokenList doc;
    for (std::size_t i = 0, n = rng.below(12); i < n; ++i) doc.push_back("t" + std::to_string(rng.below(80)));
    docs.push_back(doc);
  }
  const auto m = fit_vectorizer(docs, 16, 2, 5);
  for (const auto& doc : docs) {
    const double n = embed(m, doc).norm();
    EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) <= 1e-12) << n;
  }
}

TEST(Embed, HashSeedChangesVectorsNotNorms) {
  const auto a = fit_vectorizer({{"p", "q", "r", "s"}}, 8, 1, 1);
  const auto b = fit_vectorizer({{"p", "q", "r", "s"}}, 8, 1, 2);
  const TokenList doc{"p", "q", "r", "s"};
  EXPECT_NE(embed(a, doc), embed(b, doc));
  EXPECT_NEAR(embed(b, doc).norm(), 1.0, 1e-12);
}

TEST(ExternalVectors, LoadsAndRecordsDimension) {
  TempDir dir("vec");
  const auto s = load_external_vectors(write_text(dir / "v.jsonl", R"({"id":"p1","vec":[1.0,0.0]})" "\n"));
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.dim(), 2u);
  EXPECT_EQ(s.at("p1"), (IdeaVector(2) << 1.0, 0.0).finished());
}

TEST(ExternalVectors, InconsistentDimensionIsFatal) {
  TempDir dir("vec");
  const auto p = write_text(dir / "v.jsonl", R"({"id":"p1","vec":[1,0]})" "\n" R"({"id":"p2","vec":[1,0,0]})" "\n");
  EXPECT_THROW(load_external_vectors(p), InputError);
}

TEST(ExternalVectors, DuplicateAndMalformedAreFatal) {
  TempDir dir("vec");
  EXPECT_THROW(load_external_vectors(write_text(dir / "a.jsonl", R"({"id":"p","vec":[1]})" "\n" R"({"id":"p","vec":[2]})" "\n")),
               InputError);
  EXPECT_THROW(load_external_vectors(write_text(dir / "b.jsonl", R"({"id":"p","vec":["x"]})" "\n")), InputError);
  EXPECT_THROW(load_external_vectors(write_text(dir / "c.jsonl", "{\n")), InputError);
  EXPECT_THROW(load_external_vectors(write_text(dir / "d.jsonl", R"({"id":"p","vec":[1e999]})" "\n")), InputError);
}

TEST(ExternalVectors, EmptyFile) {
  TempDir dir("vec");
  const auto s = load_external_vectors(write_text(dir / "v.jsonl", ""));
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.dim(), 0u);
}

TEST(ExternalVectors, RoundTripIsExact) {
  TempDir dir("vec");
  VectorStore s;
  Rng rng(4);
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) {
    IdeaVector v(5);
    for (int k = 0; k < 5; ++k) v(k) = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(30)) - 15.0);
    ids.push_back("p" + std::to_string(i));
    s.insert(ids.back(), v);
  }
  {
    std::ofstream out(dir / "v.jsonl");
    write_vectors(out, s, ids);
  }
  const auto back = load_external_vectors(dir / "v.jsonl");
  for (const auto& id : ids) EXPECT_EQ(back.at(id), s.at(id)) << id;
}
