#pragma once

// File-based pipeline stages. Every stage reads declared input files, writes
// its outputs into one directory and records a manifest.json with the input
// and output hashes and the effective configuration. Outputs depend only on
// inputs and configuration, never on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ecc/cloud.hpp"
#include "ecc/corpus.hpp"
#include "ecc/dynamics.hpp"
#include "ecc/embed.hpp"
#include "ecc/error.hpp"
#include "ecc/io.hpp"
#include "ecc/pca.hpp"
#include "ecc/stats.hpp"
#include "ecc/synth.hpp"
#include "ecc/textprep.hpp"

namespace ecc {

inline constexpr const char* kVersion = "1.0.0";

namespace fs = std::filesystem;

/// Collects what a stage read and wrote, then writes manifest.json.
class Manifest {
 public:
  Manifest(std::string stage, fs::path out_dir) : out_dir_(std::move(out_dir)) {
    json_["stage"] = std::move(stage);
    json_["version"] = kVersion;
    json_["inputs"] = nlohmann::ordered_json::object();
    json_["config"] = nlohmann::ordered_json::object();
    json_["outputs"] = nlohmann::ordered_json::object();
    json_["counts"] = nlohmann::ordered_json::object();
  }

  // Inputs are keyed by role and recorded by file name and hash so that a
  // rerun from another directory produces the same manifest.
  void input(const std::string& role, const fs::path& path) {
    json_["inputs"][role] = {{"file", path.filename().string()}, {"hash", hash_file(path)}};
  }

  nlohmann::ordered_json& config() { return json_["config"]; }
  nlohmann::ordered_json& counts() { return json_["counts"]; }

  fs::path path(const std::string& name) const { return out_dir_ / name; }

  void output(const std::string& name) { json_["outputs"][name] = hash_file(out_dir_ / name); }

  const nlohmann::ordered_json& json() const { return json_; }

  void write() const {
    OutputFile f(out_dir_ / "manifest.json");
    f.stream() << json_.dump(2) << '\n';
    f.close();
  }

 private:
  fs::path out_dir_;
  nlohmann::ordered_json json_;
};

namespace detail {

inline void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InputError("missing input file: " + p.string());
}

inline Corpus load_corpus(const fs::path& posts, const fs::path& edges, Manifest& m) {
  require_file(posts);
  require_file(edges);
  auto pl = load_posts(posts);
  auto el = load_edges(edges);
  m.input("posts", posts);
  m.input("edges", edges);
  m.counts()["skipped_post_lines"] = pl.skipped;
  m.counts()["skipped_edge_lines"] = el.skipped;
  return Corpus(std::move(pl.posts), el.graph);
}

inline void write_corpus(const Corpus& c, Manifest& m) {
  {
    OutputFile f(m.path("posts.jsonl"));
    write_posts(f.stream(), c.posts());
    f.close();
  }
  {
    OutputFile f(m.path("edges.jsonl"));
    write_edges(f.stream(), c.graph());
    f.close();
  }
  m.output("posts.jsonl");
  m.output("edges.jsonl");
  m.counts()["posts"] = c.posts().size();
  m.counts()["users"] = c.graph().user_count();
  m.counts()["edges"] = c.graph().edge_count();
}

inline VectorStore load_vectors(const fs::path& path, Manifest& m) {
  require_file(path);
  auto v = load_external_vectors(path);
  m.input("vectors", path);
  return v;
}

template <typename Write>
void write_output(Manifest& m, const std::string& name, Write&& write) {
  OutputFile f(m.path(name));
  write(f.stream());
  f.close();
  m.output(name);
}

}  // namespace detail

// --- corpus stages ------------------------------------------------------------------

/// Validates and normalizes raw posts and edges.
inline Manifest run_ingest(const fs::path& posts, const fs::path& edges, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("ingest", out);
  const Corpus c = detail::load_corpus(posts, edges, m);
  detail::write_corpus(c, m);
  m.write();
  return m;
}

inline Manifest run_lcc(const fs::path& posts, const fs::path& edges, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("lcc", out);
  const Corpus c = detail::load_corpus(posts, edges, m);
  const Corpus kept = c.restricted_to(largest_connected_component(c.graph()));
  detail::write_corpus(kept, m);
  m.write();
  return m;
}

inline Manifest run_sample(const fs::path& posts, const fs::path& edges, double fraction,
                           std::uint64_t seed, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("sample", out);
  m.config()["fraction"] = fraction;
  m.config()["seed"] = seed;
  const Corpus c = detail::load_corpus(posts, edges, m);
  const Corpus kept = c.restricted_to(sample_users(c.graph(), fraction, seed));
  detail::write_corpus(kept, m);
  m.write();
  return m;
}

// --- vectors --------------------------------------------------------------------------

struct EmbedConfig {
  std::size_t dim = 300;
  std::size_t min_count = 10;
  std::uint64_t hash_seed = 0;
  std::optional<fs::path> stopwords;
};

inline Manifest run_embed(const fs::path& posts, const EmbedConfig& cfg, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("embed", out);
  detail::require_file(posts);
  auto pl = load_posts(posts);
  m.input("posts", posts);
  StopwordSet stop = default_stopwords();
  if (cfg.stopwords) {
    detail::require_file(*cfg.stopwords);
    stop = load_stopwords(*cfg.stopwords);
    m.input("stopwords", *cfg.stopwords);
  }
  m.config()["dim"] = cfg.dim;
  m.config()["min_count"] = cfg.min_count;
  m.config()["hash_seed"] = cfg.hash_seed;

  std::vector<TokenList> docs;
  docs.reserve(pl.posts.size());
  for (const Post& p : pl.posts) docs.push_back(clean(p.text, stop));
  const VectorizerModel model = fit_vectorizer(docs, cfg.dim, cfg.min_count, cfg.hash_seed);

  VectorStore store(cfg.dim);
  std::vector<std::string> ids;
  ids.reserve(pl.posts.size());
  std::size_t zero = 0;
  for (std::size_t i = 0; i < pl.posts.size(); ++i) {
    IdeaVector v = embed(model, docs[i]);
    if (v.squaredNorm() == 0.0) ++zero;
    store.insert(pl.posts[i].id, std::move(v));
    ids.push_back(pl.posts[i].id);
  }
  detail::write_output(m, "vectors.jsonl", [&](std::ostream& o) { write_vectors(o, store, ids); });
  detail::write_output(m, "vectorizer.json", [&](std::ostream& o) { o << model.to_json().dump(2) << '\n'; });
  m.counts()["vectors"] = ids.size();
  m.counts()["vocabulary"] = model.idf.size();
  m.counts()["zero_vectors"] = zero;
  if (zero > 0) log_warn(std::to_string(zero) + " posts have no in-vocabulary tokens (zero vectors)");
  m.write();
  return m;
}

inline Manifest run_pca(const fs::path& vectors, double variance_fraction, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("pca", out);
  m.config()["variance"] = variance_fraction;
  const VectorStore in = detail::load_vectors(vectors, m);
  const auto ids = in.sorted_ids();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(in.dim()));
  for (std::size_t i = 0; i < ids.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = in.at(ids[i]).transpose();
  const PcaModel model = fit_pca(data, variance_fraction);
  data.resize(0, 0);

  VectorStore reduced(static_cast<std::size_t>(model.k()));
  for (const auto& id : ids) reduced.insert(id, model.transform(in.at(id)));
  detail::write_output(m, "vectors.jsonl", [&](std::ostream& o) { write_vectors(o, reduced, ids); });
  detail::write_output(m, "pca_model.json", [&](std::ostream& o) { o << model.to_json().dump(2) << '\n'; });
  m.counts()["vectors"] = ids.size();
  m.counts()["input_dim"] = in.dim();
  m.counts()["k"] = model.k();
  m.write();
  return m;
}

// --- eccentricity and dynamics -----------------------------------------------------

inline Manifest run_eccentricity(const fs::path& posts, const fs::path& edges, const fs::path& vectors,
                                 const ReplayOptions& opts, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("eccentricity", out);
  m.config()["window_seconds"] = opts.window_seconds;
  const Corpus c = detail::load_corpus(posts, edges, m);
  const VectorStore v = detail::load_vectors(vectors, m);
  const auto records = replay(c, v, opts);
  detail::write_output(m, "eccentricity.csv", [&](std::ostream& o) { write_eccentricity_csv(o, records); });
  std::size_t defined = 0, self_defined = 0;
  for (const auto& r : records) {
    defined += r.eccentricity.has_value();
    self_defined += r.self_eccentricity.has_value();
  }
  m.counts()["posts"] = records.size();
  m.counts()["eccentricity_defined"] = defined;
  m.counts()["self_eccentricity_defined"] = self_defined;
  m.write();
  return m;
}

inline Manifest run_dynamics(const fs::path& eccentricity, const DynamicsOptions& opts, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("dynamics", out);
  m.config()["fg_weighting"] = std::string(to_string(opts.weighting));
  m.config()["min_gap_seconds"] = opts.min_gap_seconds;
  detail::require_file(eccentricity);
  const auto records = load_eccentricity_csv(eccentricity);
  m.input("eccentricity", eccentricity);
  const auto rows = user_dynamics(records, opts);
  detail::write_output(m, "dynamics.csv", [&](std::ostream& o) { write_dynamics_csv(o, rows); });
  std::size_t ecc = 0, self = 0;
  for (const auto& d : rows) {
    ecc += d.ecc.has_value();
    self += d.self.has_value();
  }
  m.counts()["users"] = rows.size();
  m.counts()["ecc_scores_defined"] = ecc;
  m.counts()["self_scores_defined"] = self;
  m.write();
  return m;
}

// --- distributions -----------------------------------------------------------------

struct DistributionConfig {
  std::vector<std::int64_t> thresholds{10, 100};
  SummaryOptions summary;
};

inline nlohmann::ordered_json summary_to_json(const BinSummary& s) {
  nlohmann::ordered_json j;
  j["bandwidth"] = s.bandwidth;
  j["bins"] = nlohmann::ordered_json::array();
  for (const auto& b : s.bins) {
    nlohmann::ordered_json e;
    e["label"] = b.label;
    e["n"] = b.n;
    e["mean"] = b.mean ? nlohmann::ordered_json(*b.mean) : nlohmann::ordered_json(nullptr);
    j["bins"].push_back(std::move(e));
  }
  j["tests"] = nlohmann::ordered_json::array();
  for (const auto& t : s.tests) {
    nlohmann::ordered_json e;
    e["a"] = t.a;
    e["b"] = t.b;
    e["A2"] = t.ad.a2;
    e["standardized"] = t.ad.standardized;
    e["p_raw"] = t.ad.p;
    e["p_bonferroni"] = t.p_bonferroni;
    e["p_source"] = t.ad.p_source;
    j["tests"].push_back(std::move(e));
  }
  j["notices"] = s.notices;
  return j;
}

inline void write_distribution_csv(std::ostream& out, const BinSummary& s) {
  out << "bin,grid_x,density\n";
  for (const auto& b : s.bins) {
    if (!b.density) continue;
    for (std::size_t i = 0; i < b.density->grid.size(); ++i)
      write_csv_row(out, {b.label, format_double(b.density->grid[i]), format_double(b.density->density[i])});
  }
}

inline Manifest run_distributions(const fs::path& eccentricity, const DistributionConfig& cfg,
                                  const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("distributions", out);
  m.config()["bins"] = cfg.thresholds;
  m.config()["bandwidth"] = cfg.summary.bandwidth;
  m.config()["grid_points"] = cfg.summary.grid_points;
  m.config()["p_method"] = std::string(to_string(cfg.summary.ad.method));
  m.config()["n_perm"] = cfg.summary.ad.n_perm;
  m.config()["seed"] = cfg.summary.ad.seed;
  detail::require_file(eccentricity);
  const auto records = load_eccentricity_csv(eccentricity);
  m.input("eccentricity", eccentricity);
  const auto binning = PopularityBinning::from_thresholds(cfg.thresholds);
  const BinSummary s = bin_summary(bin_by_popularity(records, binning), cfg.summary);
  for (const auto& n : s.notices) log_warn(n);
  detail::write_output(m, "distribution.csv", [&](std::ostream& o) { write_distribution_csv(o, s); });
  detail::write_output(m, "summary.json", [&](std::ostream& o) { o << summary_to_json(s).dump(2) << '\n'; });
  m.counts()["bins"] = s.bins.size();
  m.counts()["tests"] = s.tests.size();
  m.write();
  return m;
}

// --- synthetic corpora -------------------------------------------------------------

inline nlohmann::ordered_json synth_config_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["users"] = c.n_users;
  j["follow_prob"] = c.follow_prob;
  j["days"] = c.n_days;
  j["rate"] = c.posts_per_user_per_day;
  j["dim"] = c.dim;
  j["seed"] = c.seed;
  j["effect"] = std::string(to_string(c.effect));
  j["strength"] = c.effect_strength;
  j["user_spread"] = c.user_spread;
  j["post_noise"] = c.post_noise;
  j["like_log_mean"] = c.like_log_mean;
  j["like_log_sd"] = c.like_log_sd;
  j["max_likes"] = c.max_likes;
  j["start_time"] = c.start_time;
  j["text"] = c.emit_text;
  return j;
}

inline Manifest run_synth(const SynthConfig& cfg, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("synth", out);
  m.config() = synth_config_json(cfg);
  const SynthCorpus s = gen_corpus(cfg);
  detail::write_corpus(s.corpus, m);
  std::vector<std::string> ids;
  ids.reserve(s.corpus.posts().size());
  for (const Post& p : s.corpus.posts()) ids.push_back(p.id);
  detail::write_output(m, "vectors.jsonl", [&](std::ostream& o) { write_vectors(o, s.vectors, ids); });
  detail::write_output(m, "planted.csv", [&](std::ostream& o) {
    o << "post_id,deviation\n";
    for (std::size_t i = 0; i < ids.size(); ++i) write_csv_row(o, {ids[i], format_double(s.planted_deviation[i])});
  });
  m.write();
  return m;
}

// --- report ------------------------------------------------------------------------

struct ReportInputs {
  fs::path summary;       // summary.json from distributions
  fs::path distribution;  // distribution.csv from distributions
  fs::path dynamics;      // dynamics.csv
};

namespace detail {

inline nlohmann::ordered_json describe(std::vector<double> v) {
  nlohmann::ordered_json j;
  j["n"] = v.size();
  if (v.empty()) {
    j["mean"] = nullptr;
    j["median"] = nullptr;
    return j;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  j["mean"] = sum / static_cast<double>(v.size());
  j["median"] = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return j;
}

}  // namespace detail

/// Combines a distributions run and a dynamics run into report.json plus
/// plot-ready tables: per-bin densities and means, F/G coordinates per user
/// and the two G-score samples compared by Mann-Whitney.
inline Manifest run_report(const ReportInputs& in, const fs::path& out) {
  detail::prepare_dir(out);
  Manifest m("report", out);
  for (const auto& p : {in.summary, in.distribution, in.dynamics}) detail::require_file(p);
  m.input("summary", in.summary);
  m.input("distribution", in.distribution);
  m.input("dynamics", in.dynamics);

  const auto summary = nlohmann::ordered_json::parse(read_file(in.summary), nullptr, false);
  if (summary.is_discarded() || !summary.contains("bins") || !summary.contains("tests"))
    throw InputError(in.summary.string() + ": not a distributions summary");
  const auto rows = load_dynamics_csv(in.dynamics);

  // Bin densities are passed through; bin means become a separate table.
  detail::write_output(m, "bin_density.csv", [&](std::ostream& o) { o << read_file(in.distribution); });
  detail::write_output(m, "bin_means.csv", [&](std::ostream& o) {
    o << "bin,n,mean\n";
    for (const auto& b : summary["bins"])
      write_csv_row(o, {b["label"].get<std::string>(), std::to_string(b["n"].get<std::size_t>()),
                        b["mean"].is_null() ? std::string{} : format_double(b["mean"].get<double>())});
  });

  // F/G coordinates per user, and the G comparison over users scored both ways.
  std::vector<double> g_ecc, g_self, f_ecc, f_self;
  detail::write_output(m, "fg_scatter.csv", [&](std::ostream& o) {
    o << "user,series,f,g\n";
    for (const auto& d : rows) {
      if (d.ecc) write_csv_row(o, {d.user, "neighborhood", format_double(d.ecc->f), format_double(d.ecc->g)});
      if (d.self) write_csv_row(o, {d.user, "self", format_double(d.self->f), format_double(d.self->g)});
    }
  });
  detail::write_output(m, "g_scores.csv", [&](std::ostream& o) {
    o << "user,g_ecc,g_self\n";
    for (const auto& d : rows) {
      if (!d.ecc || !d.self) continue;
      g_ecc.push_back(d.ecc->g);
      g_self.push_back(d.self->g);
      f_ecc.push_back(d.ecc->f);
      f_self.push_back(d.self->f);
      write_csv_row(o, {d.user, format_double(d.ecc->g), format_double(d.self->g)});
    }
  });

  nlohmann::ordered_json report;
  report["distributions"] = summary;
  nlohmann::ordered_json dyn;
  dyn["users"] = rows.size();
  dyn["users_scored_both"] = g_ecc.size();
  dyn["g_ecc"] = detail::describe(g_ecc);
  dyn["g_self"] = detail::describe(g_self);
  dyn["f_ecc"] = detail::describe(f_ecc);
  dyn["f_self"] = detail::describe(f_self);
  if (!g_ecc.empty()) {
    const MwResult mw = mann_whitney(g_self, g_ecc);
    dyn["mann_whitney"] = {{"U", mw.u}, {"p", mw.p}, {"exact", mw.exact}};
  } else {
    dyn["mann_whitney"] = nullptr;
  }
  report["dynamics"] = dyn;
  detail::write_output(m, "report.json", [&](std::ostream& o) { o << report.dump(2) << '\n'; });
  m.counts()["bins"] = summary["bins"].size();
  m.counts()["tests"] = summary["tests"].size();
  m.counts()["users_scored_both"] = g_ecc.size();
  m.write();
  return m;
}

}  // namespace ecc
