// Command-line driver for the eccentricity pipeline.
//
// Usage: ecc <subcommand> [options]; `ecc <subcommand> --help` lists options.
// Any subcommand accepts --config FILE.json. Top-level keys apply to every
// subcommand that has an option of that name and are ignored otherwise; an
// object keyed by the subcommand name applies only there and must not contain
// unknown keys. Command-line flags override the file.
//
// Exit codes: 0 success, 2 bad input or configuration, 3 internal error.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecc/ecc.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char c : key) out += c == '_' ? '-' : c;
  return out;
}

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return ecc::format_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      if (!out.empty()) out += ',';
      out += scalar_text(e, key);
    }
    return out;
  }
  throw ecc::ConfigError("config key '" + key + "' has an unsupported value");
}

// Arguments derived from the config file for one subcommand.
std::vector<std::string> config_args(const std::filesystem::path& path, CLI::App& sub) {
  const auto j = nlohmann::json::parse(ecc::read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ecc::ConfigError(path.string() + ": expected a JSON object");
  std::vector<std::string> args;
  auto add = [&](const std::string& key, const nlohmann::json& v, bool strict) {
    const std::string flag = flag_name(key);
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option(flag);
    } catch (const CLI::OptionNotFound&) {
      if (strict) throw ecc::ConfigError(path.string() + ": unknown key '" + key + "' for " + sub.get_name());
      return;
    }
    if (opt->get_expected_min() == 0) {
      if (!v.is_boolean()) throw ecc::ConfigError(path.string() + ": key '" + key + "' must be boolean");
      if (v.get<bool>()) args.push_back(flag);
      return;
    }
    args.push_back(flag + "=" + scalar_text(v, key));
  };
  for (const auto& [key, v] : j.items()) {
    if (v.is_object()) continue;
    if (key == "config") continue;
    add(key, v, false);
  }
  if (j.contains(sub.get_name())) {
    const auto& own = j[sub.get_name()];
    if (!own.is_object()) throw ecc::ConfigError(path.string() + ": '" + sub.get_name() + "' must be an object");
    for (const auto& [key, v] : own.items()) add(key, v, true);
  }
  return args;
}

struct Options {
  std::string posts, edges, vectors, eccentricity, dynamics, summary, distribution, out, stopwords;
  double window_days = 5.0;
  std::size_t dim = 300;
  std::size_t min_count = 10;
  std::uint64_t hash_seed = 0;
  double variance = 0.9;
  double bandwidth = 5.0;
  std::size_t grid_points = 512;
  std::string bins = "10,100";
  std::string p_method = "table";
  std::size_t n_perm = 999;
  std::uint64_t seed = 0;
  std::string fg_weighting = std::string(ecc::to_string(ecc::kDefaultFgWeighting));
  double min_gap = 1.0;
  unsigned threads = 0;
  double fraction = 0.1;
  ecc::SynthConfig synth;
  std::string effect = "null";
};

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

std::int64_t window_seconds(double days) {
  if (!(days > 0.0) || !std::isfinite(days)) throw ecc::ConfigError("--window-days must be positive");
  const double s = std::round(days * static_cast<double>(ecc::kSecondsPerDay));
  if (s < 1.0) throw ecc::ConfigError("--window-days is shorter than one second");
  return static_cast<std::int64_t>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Idea eccentricity pipeline"};
  app.set_version_flag("--version", ecc::kVersion);
  app.require_subcommand(1);
  Options o;

  auto out_opt = [&](CLI::App* s) { s->add_option("--out", o.out, "Output directory")->required(); };
  auto corpus_in = [&](CLI::App* s) {
    s->add_option("--posts", o.posts, "posts.jsonl")->required();
    s->add_option("--edges", o.edges, "edges.jsonl")->required();
  };
  auto threads = [&](CLI::App* s) {
    s->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize posts and edges");
  corpus_in(ingest);
  out_opt(ingest);

  auto* lcc = app.add_subcommand("lcc", "Keep the largest weakly connected component");
  corpus_in(lcc);
  out_opt(lcc);

  auto* sample = app.add_subcommand("sample", "Seeded induced subgraph on a fraction of users");
  corpus_in(sample);
  out_opt(sample);
  sample->add_option("--fraction", o.fraction, "Fraction of users in (0, 1]")->capture_default_str();
  sample->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();

  auto* embed = app.add_subcommand("embed", "Clean post text and embed it with hashed tf-idf");
  embed->add_option("--posts", o.posts, "posts.jsonl")->required();
  out_opt(embed);
  embed->add_option("--dim", o.dim, "Vector dimension")->capture_default_str();
  embed->add_option("--min-count", o.min_count, "Minimum corpus frequency of a token")->capture_default_str();
  embed->add_option("--hash-seed", o.hash_seed, "Feature hashing seed")->capture_default_str();
  embed->add_option("--stopwords", o.stopwords, "Stopword file, one word per line");

  auto* pca = app.add_subcommand("pca", "Project vectors onto principal axes");
  pca->add_option("--vectors", o.vectors, "vectors.jsonl")->required();
  out_opt(pca);
  pca->add_option("--variance", o.variance, "Variance fraction to keep")->capture_default_str();

  auto* eccentricity = app.add_subcommand("eccentricity", "Replay the post log and score every post");
  corpus_in(eccentricity);
  eccentricity->add_option("--vectors", o.vectors, "vectors.jsonl")->required();
  out_opt(eccentricity);
  eccentricity->add_option("--window-days", o.window_days, "Knowledge base window in days")->capture_default_str();
  threads(eccentricity);

  auto* dynamics = app.add_subcommand("dynamics", "Per-user F and G scores");
  dynamics->add_option("--eccentricity", o.eccentricity, "eccentricity.csv")->required();
  out_opt(dynamics);
  dynamics->add_option("--fg-weighting", o.fg_weighting, "inverse-gap | proportional-gap | uniform")
      ->capture_default_str();
  dynamics->add_option("--min-gap", o.min_gap, "Smallest gap between posts, seconds")->capture_default_str();

  auto* distributions = app.add_subcommand("distributions", "Popularity bins, densities and pairwise tests");
  distributions->add_option("--eccentricity", o.eccentricity, "eccentricity.csv")->required();
  out_opt(distributions);
  distributions->add_option("--bins", o.bins, "Like-count thresholds, e.g. 10,100 or 2; empty for one bin")
      ->capture_default_str();
  distributions->add_option("--bandwidth", o.bandwidth, "Gaussian kernel bandwidth")->capture_default_str();
  distributions->add_option("--grid-points", o.grid_points, "Density grid size")->capture_default_str();
  distributions->add_option("--p-method", o.p_method, "table | permutation")->capture_default_str();
  distributions->add_option("--n-perm", o.n_perm, "Permutations for Monte Carlo p-values")->capture_default_str();
  distributions->add_option("--seed", o.seed, "Permutation seed")->capture_default_str();
  threads(distributions);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with a planted effect");
  out_opt(synth);
  synth->add_option("--users", o.synth.n_users, "Number of users")->capture_default_str();
  synth->add_option("--follow-prob", o.synth.follow_prob, "Follow edge probability")->capture_default_str();
  synth->add_option("--days", o.synth.n_days, "Days covered")->capture_default_str();
  synth->add_option("--rate", o.synth.posts_per_user_per_day, "Posts per user per day")->capture_default_str();
  synth->add_option("--dim", o.synth.dim, "Vector dimension")->capture_default_str();
  synth->add_option("--seed", o.synth.seed, "Generator seed")->capture_default_str();
  synth->add_option("--effect", o.effect, "null | attention-coupling | elevator-drift")->capture_default_str();
  synth->add_option("--strength", o.synth.effect_strength, "Effect strength")->capture_default_str();
  synth->add_option("--user-spread", o.synth.user_spread, "Spread of user means")->capture_default_str();
  synth->add_option("--post-noise", o.synth.post_noise, "Spread of posts around their user mean")
      ->capture_default_str();
  synth->add_option("--start-time", o.synth.start_time, "First possible timestamp")->capture_default_str();
  synth->add_flag("--text", o.synth.emit_text, "Also emit pseudo-word post text");

  auto* report = app.add_subcommand("report", "Aggregate distributions and dynamics for plotting");
  report->add_option("--summary", o.summary, "summary.json from distributions")->required();
  report->add_option("--distribution", o.distribution, "distribution.csv from distributions")->required();
  report->add_option("--dynamics", o.dynamics, "dynamics.csv")->required();
  out_opt(report);

  for (auto* s : app.get_subcommands({})) {
    s->add_option("--config", "JSON file with option values; flags override it");
    for (auto* opt : s->get_options()) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  try {
    // Splice config values in right after the subcommand so later flags win.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (path.empty() || args.empty()) continue;
      CLI::App* sub = nullptr;
      for (auto* s : app.get_subcommands({}))
        if (s->get_name() == args[0]) sub = s;
      if (sub == nullptr) break;
      if (!std::filesystem::is_regular_file(path)) throw ecc::InputError("missing config file: " + path);
      auto extra = config_args(path, *sub);
      args.insert(args.begin() + 1, extra.begin(), extra.end());
      break;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  } catch (const ecc::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ecc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (*ingest) {
      ecc::run_ingest(o.posts, o.edges, o.out);
    } else if (*lcc) {
      ecc::run_lcc(o.posts, o.edges, o.out);
    } else if (*sample) {
      ecc::run_sample(o.posts, o.edges, o.fraction, o.seed, o.out);
    } else if (*embed) {
      ecc::EmbedConfig cfg;
      cfg.dim = o.dim;
      cfg.min_count = o.min_count;
      cfg.hash_seed = o.hash_seed;
      if (!o.stopwords.empty()) cfg.stopwords = o.stopwords;
      ecc::run_embed(o.posts, cfg, o.out);
    } else if (*pca) {
      ecc::run_pca(o.vectors, o.variance, o.out);
    } else if (*eccentricity) {
      ecc::ReplayOptions opts;
      opts.window_seconds = window_seconds(o.window_days);
      opts.threads = worker_count(o.threads);
      ecc::run_eccentricity(o.posts, o.edges, o.vectors, opts, o.out);
    } else if (*dynamics) {
      ecc::DynamicsOptions opts;
      opts.weighting = ecc::parse_fg_weighting(o.fg_weighting);
      opts.min_gap_seconds = o.min_gap;
      if (!(o.min_gap > 0.0)) throw ecc::ConfigError("--min-gap must be positive");
      ecc::run_dynamics(o.eccentricity, opts, o.out);
    } else if (*distributions) {
      ecc::DistributionConfig cfg;
      cfg.thresholds = ecc::parse_thresholds(o.bins);
      if (!(o.bandwidth > 0.0)) throw ecc::ConfigError("--bandwidth must be positive");
      cfg.summary.bandwidth = o.bandwidth;
      cfg.summary.grid_points = o.grid_points;
      cfg.summary.ad.method = ecc::parse_p_method(o.p_method);
      cfg.summary.ad.n_perm = o.n_perm;
      cfg.summary.ad.seed = o.seed;
      cfg.summary.ad.threads = worker_count(o.threads);
      ecc::run_distributions(o.eccentricity, cfg, o.out);
    } else if (*synth) {
      o.synth.effect = ecc::parse_synth_effect(o.effect);
      ecc::run_synth(o.synth, o.out);
    } else if (*report) {
      ecc::run_report({o.summary, o.distribution, o.dynamics}, o.out);
    }
  } catch (const ecc::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ecc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
