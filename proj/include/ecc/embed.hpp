#pragma once

// Idea vectors: a deterministic signed-hashing TF-IDF vectorizer, plus import
// and export of externally computed vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ecc/error.hpp"
#include "ecc/io.hpp"
#include "ecc/textprep.hpp"

namespace ecc {

using IdeaVector = Eigen::VectorXd;

/// Post id -> vector, all of one dimension.
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::size_t dim) : dim_(dim) {}

  void insert(const std::string& id, IdeaVector v) {
    if (dim_ == 0) dim_ = static_cast<std::size_t>(v.size());
    if (static_cast<std::size_t>(v.size()) != dim_)
      throw InputError("vector for " + id + " has dimension " + std::to_string(v.size()) +
                       ", expected " + std::to_string(dim_));
    if (!v.allFinite()) throw InputError("non-finite vector component for " + id);
    if (!vectors_.emplace(id, std::move(v)).second) throw InputError("duplicate vector id: " + id);
  }

  /// 0 until the first vector is inserted.
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }
  bool contains(const std::string& id) const { return vectors_.contains(id); }

  const IdeaVector& at(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw InputError("no vector for post " + id);
    return it->second;
  }

  std::vector<std::string> sorted_ids() const {
    std::vector<std::string> ids;
    ids.reserve(vectors_.size());
    for (const auto& [id, v] : vectors_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, IdeaVector> vectors_;
};

inline VectorStore load_external_vectors(const std::filesystem::path& path) {
  VectorStore store;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("vec") || !j["vec"].is_array())
      throw InputError(where + ": expected {\"id\": string, \"vec\": [numbers]}");
    const auto& arr = j["vec"];
    IdeaVector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw InputError(where + ": non-numeric vector component");
      v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    if (v.size() == 0) throw InputError(where + ": empty vector");
    store.insert(j["id"].get<std::string>(), std::move(v));
  });
  return store;
}

/// Writes vectors in the order of `ids`.
inline void write_vectors(std::ostream& out, const VectorStore& store,
                          const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    const IdeaVector& v = store.at(id);
    nlohmann::ordered_json j;
    j["id"] = id;
    j["vec"] = std::vector<double>(v.data(), v.data() + v.size());
    out << j.dump() << '\n';
  }
}

struct VectorizerModel {
  std::size_t dim = 300;
  std::size_t min_count = 10;
  std::uint64_t hash_seed = 0;
  std::size_t n_docs = 0;
  std::map<std::string, double> idf;  // keys are the vocabulary

  bool in_vocabulary(const std::string& token) const { return idf.contains(token); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["dim"] = dim;
    j["min_count"] = min_count;
    j["hash_seed"] = hash_seed;
    j["n_docs"] = n_docs;
    j["idf"] = idf;
    return j;
  }
};

/// Vocabulary = tokens occurring at least `min_count` times in total;
/// idf(w) = ln((1 + N) / (1 + df(w))) + 1.
inline VectorizerModel fit_vectorizer(const std::vector<TokenList>& docs, std::size_t dim,
                                      std::size_t min_count, std::uint64_t hash_seed = 0) {
  if (dim < 1) throw ConfigError("vector dimension must be >= 1");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts;  // total, df
  for (const TokenList& doc : docs) {
    for (const auto& tok : doc) ++counts[tok].first;
    std::vector<std::string> uniq(doc.begin(), doc.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& tok : uniq) ++counts[tok].second;
  }
  VectorizerModel model;
  model.dim = dim;
  model.min_count = min_count;
  model.hash_seed = hash_seed;
  model.n_docs = docs.size();
  const double n = static_cast<double>(docs.size());
  for (const auto& [tok, c] : counts) {
    if (c.first < min_count) continue;
    model.idf.emplace(tok, std::log((1.0 + n) / (1.0 + static_cast<double>(c.second))) + 1.0);
  }
  return model;
}

/// Bucket and sign of a token under the model's hash seed. The sign comes
/// from a second hash stream so it is independent of the bucket.
inline std::pair<std::size_t, double> hash_feature(const VectorizerModel& model,
                                                   std::string_view token) {
  const std::uint64_t h = hash64(token, model.hash_seed);
  const std::uint64_t s = hash64(token, derive_seed(model.hash_seed, 1));
  return {static_cast<std::size_t>(h % model.dim), (s & 1U) ? 1.0 : -1.0};
}

/// Signed hashed tf-idf, L2-normalized; out-of-vocabulary tokens are ignored.
inline IdeaVector embed(const VectorizerModel& model, const TokenList& tokens) {
  std::map<std::string_view, std::size_t> tf;  // sorted, so accumulation order is fixed
  for (const auto& tok : tokens)
    if (model.in_vocabulary(tok)) ++tf[tok];
  IdeaVector v = IdeaVector::Zero(static_cast<Eigen::Index>(model.dim));
  for (const auto& [tok, count] : tf) {
    const auto [bucket, sign] = hash_feature(model, tok);
    v(static_cast<Eigen::Index>(bucket)) +=
        static_cast<double>(count) * model.idf.at(std::string(tok)) * sign;
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

}  // namespace ecc
