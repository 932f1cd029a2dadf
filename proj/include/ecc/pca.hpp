#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "ecc/embed.hpp"
#include "ecc/error.hpp"

namespace ecc {

/// Principal axes of a point cloud. `components` holds one unit axis per row;
/// `explained_variance` uses the 1/(n-1) covariance normalization.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x D
  Eigen::VectorXd explained_variance;
  double total_variance = 0.0;

  Eigen::Index k() const { return components.rows(); }
  Eigen::Index input_dim() const { return mean.size(); }

  IdeaVector transform(const IdeaVector& v) const {
    if (v.size() != mean.size())
      throw InputError("pca: vector dimension " + std::to_string(v.size()) + " != model dimension " +
                       std::to_string(mean.size()));
    return components * (v - mean);
  }

  IdeaVector inverse_transform(const IdeaVector& z) const {
    return mean + components.transpose() * z;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < components.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(components.cols()));
      for (Eigen::Index c = 0; c < components.cols(); ++c) row[static_cast<std::size_t>(c)] = components(r, c);
      rows.push_back(row);
    }
    j["components"] = rows;
    j["explained_variance"] =
        std::vector<double>(explained_variance.data(), explained_variance.data() + explained_variance.size());
    j["total_variance"] = total_variance;
    return j;
  }

  static PcaModel from_json(const nlohmann::json& j) {
    PcaModel m;
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto rows = j.at("components").get<std::vector<std::vector<double>>>();
    const auto ev = j.at("explained_variance").get<std::vector<double>>();
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.components.resize(static_cast<Eigen::Index>(rows.size()), m.mean.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != mean.size()) throw InputError("pca model: component row has wrong length");
      for (std::size_t c = 0; c < mean.size(); ++c)
        m.components(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    m.explained_variance = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    m.total_variance = j.value("total_variance", m.explained_variance.sum());
    return m;
  }
};

namespace detail {

// Flip so the largest-magnitude entry is positive (first such entry on ties).
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> axis) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < axis.size(); ++i)
    if (std::abs(axis(i)) > std::abs(axis(arg))) arg = i;
  if (axis(arg) < 0) axis = -axis;
}

}  // namespace detail

/// Fits on the rows of `data` (n x D) and keeps the smallest number of axes
/// whose cumulative explained variance reaches `variance_fraction`.
inline PcaModel fit_pca(const Eigen::MatrixXd& data, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw ConfigError("variance fraction must be in (0, 1]");
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw InputError("pca needs at least 2 vectors, got " + std::to_string(n));
  if (d < 1) throw InputError("pca needs vectors of dimension >= 1");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  Eigen::MatrixXd axes = svd.matrixV();  // D x r, r = min(n, D)
  const Eigen::Index r = sv.size();

  Eigen::VectorXd var(r);
  for (Eigen::Index i = 0; i < r; ++i) var(i) = sv(i) * sv(i) / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < r; ++i) detail::fix_sign(axes.col(i));

  // Order by variance, then lexicographically by the sign-fixed axis so equal
  // eigenvalues come out in a reproducible order.
  const double scale = var.size() ? var.maxCoeff() : 0.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(var(a) - var(b)) > 1e-12 * scale) return var(a) > var(b);
    for (Eigen::Index i = 0; i < d; ++i)
      if (axes(i, a) != axes(i, b)) return axes(i, a) > axes(i, b);
    return false;
  });

  const double total = var.sum();
  model.total_variance = total;
  Eigen::Index k = 1;
  if (total > 0.0) {
    const double target = variance_fraction * total * (1.0 - 1e-12);
    double cum = 0.0;
    for (k = 0; k < r;) {
      cum += var(order[static_cast<std::size_t>(k)]);
      ++k;
      if (cum >= target) break;
    }
  }

  model.components.resize(k, d);
  model.explained_variance.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    model.components.row(i) = axes.col(src).transpose();
    model.explained_variance(i) = total > 0.0 ? var(src) : 0.0;
  }
  return model;
}

}  // namespace ecc
