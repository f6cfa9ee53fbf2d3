#include "mdsrecover/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "mdsrecover/clustering.hpp"
#include "mdsrecover/cmds.hpp"
#include "mdsrecover/datagen.hpp"
#include "mdsrecover/diagnostics.hpp"
#include "mdsrecover/error.hpp"
#include "mdsrecover/io.hpp"
#include "mdsrecover/phase.hpp"
#include "mdsrecover/rng.hpp"

namespace mdsr::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

/// Files are staged in memory and written together once every computation
/// has succeeded; a failed write removes whatever was already written.
class OutputSet {
 public:
  void add(fs::path path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

  void commit() {
    std::vector<fs::path> written;
    for (const auto& [path, content] : files_) {
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      os << content;
      os.close();
      if (!os) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        fs::remove(path, ec);
        fail(ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
      }
      written.push_back(path);
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

fs::path with_suffix(const std::string& prefix, const std::string& suffix) { return fs::path(prefix + suffix); }

struct RankChoice {
  bool automatic = true;
  int value = 0;
};

RankChoice parse_rank(const std::string& text) {
  if (text == "auto") return {};
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size() && v >= 1) return {false, v};
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidInput, "--rank must be a positive integer or 'auto'");
}

struct EmbedInputs {
  std::string input;
  bool coords = false;
  bool squared = false;
  bool psd = false;
  std::string rank = "auto";
  double floor = kDefaultEigenratioFloor;
  std::optional<double> debias_trace;
};

struct EmbedOutcome {
  Embedding embedding;
  double discarded_mass = 0.0;
  bool rank_auto = false;
};

EmbedOutcome run_embedding(const EmbedInputs& in) {
  const io::CsvTable table = io::read_csv(in.input);
  const DissimilarityMatrix d = in.coords ? DissimilarityMatrix::from_coordinates(table.values)
                                          : DissimilarityMatrix(table.values, in.squared, !in.psd);
  EmbedOutcome out;
  SymmetricMatrix b = SymmetricMatrix::zeros(1);
  if (in.psd) {
    PsdProjection proj = psd_project(d);
    out.discarded_mass = proj.discarded_mass;
    b = std::move(proj.gram);
  } else {
    b = double_center(d);
  }
  const RankChoice rank = parse_rank(in.rank);
  out.rank_auto = rank.automatic;
  int r = rank.value;
  if (rank.automatic) r = select_rank_eigenratio(sym_eigenvalues_desc(b), in.floor);
  out.embedding = embed(b, r);
  if (in.debias_trace) out.embedding = debias(out.embedding, *in.debias_trace);
  return out;
}

void add_embed_options(CLI::App* cmd, EmbedInputs& in) {
  cmd->add_option("input", in.input, "Dissimilarity CSV (or coordinates with --coords)")->required();
  cmd->add_flag("--coords", in.coords, "Input rows are coordinates; Euclidean distances are computed first");
  cmd->add_flag("--squared", in.squared, "Input already holds squared dissimilarities");
  cmd->add_flag("--psd-project", in.psd, "Clip negative eigenvalues of the double-centered matrix");
  cmd->add_option("--rank", in.rank, "Embedding dimension, or 'auto' for the eigenratio rule");
  cmd->add_option("--eigenratio-floor", in.floor, "Eigenvalue floor for --rank auto");
}

// ---------------------------------------------------------------------------

int cmd_embed(const EmbedInputs& in, const std::string& out_path, std::ostream& out) {
  const EmbedOutcome res = run_embedding(in);
  OutputSet files;
  files.add(out_path, io::format_csv(res.embedding.coordinates));
  Json side{{"schema_version", io::kSchemaVersion},
            {"rank", res.embedding.rank},
            {"rank_mode", res.rank_auto ? "auto" : "fixed"},
            {"eigenvalues", io::to_json(res.embedding.all_eigenvalues)},
            {"kept_eigenvalues", io::to_json(res.embedding.kept_eigenvalues)},
            {"discarded_mass", res.discarded_mass},
            {"debiased", res.embedding.debiased},
            {"debias_trace", in.debias_trace ? Json(*in.debias_trace) : Json(nullptr)}};
  files.add(out_path + ".json", dump(side));
  files.commit();
  out << "rank " << res.embedding.rank << "\n";
  return kExitOk;
}

int cmd_cluster(const EmbedInputs& in, int k, const std::string& algo, const std::string& labels_path,
                std::uint64_t seed, int restarts, const std::string& out_path, std::ostream& out) {
  std::optional<LabelVector> truth;
  if (!labels_path.empty()) truth = LabelVector::infer(io::read_labels(labels_path));

  const EmbedOutcome res = run_embedding(in);
  const Matrix& y = res.embedding.coordinates;
  LabelVector predicted = algo == "kmeans" ? kmeans(y, k, KMeansOptions{seed, 300, restarts}).labels
                                           : hierarchical(y, k, linkage_from_string(algo));

  Json report;
  if (truth) {
    require(truth->size() == predicted.size(), "labels file length does not match the input");
    const RecoveryCertificate cert = pgr_check(y, *truth);
    report = Json{{"agreement", agreement(*truth, predicted)},
                  {"d_in", cert.d_in},
                  {"d_btw", cert.d_btw},
                  {"is_pgr", cert.is_pgr},
                  {"rank", res.embedding.rank}};
  }
  OutputSet files;
  files.add(out_path, io::format_labels(predicted.labels()));
  files.commit();
  if (truth) out << report.dump() << "\n";
  return kExitOk;
}

struct SimulateInputs {
  std::string preset;
  std::string config;
  std::optional<int> n;
  std::optional<int> d;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  std::uint64_t knn_seed = 0;
  std::optional<int> rank;
  std::string prefix;
};

int cmd_simulate(SimulateInputs in, std::ostream& out) {
  ClusterModel model;
  std::string preset_name = in.preset;
  if (!in.config.empty()) {
    Json j;
    try {
      j = Json::parse(io::read_text(in.config));
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::InvalidInput, std::string("malformed config JSON: ") + e.what());
    }
    require(j.is_object(), "simulate config must be a JSON object");
    for (const auto& item : j.items()) {
      static const char* known[] = {"schema_version", "preset", "N", "d", "sigma", "seed", "knn_seed", "rank", "model"};
      if (std::find(std::begin(known), std::end(known), item.key()) == std::end(known))
        fail(ErrorKind::InvalidInput, "simulate config: unknown key '" + item.key() + "'");
    }
    if (j.contains("preset")) preset_name = j["preset"].get<std::string>();
    if (j.contains("N") && !in.n) in.n = j["N"].get<int>();
    if (j.contains("d") && !in.d) in.d = j["d"].get<int>();
    if (j.contains("sigma") && !in.sigma) in.sigma = j["sigma"].get<double>();
    if (j.contains("seed")) in.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("knn_seed")) in.knn_seed = j["knn_seed"].get<std::uint64_t>();
    if (j.contains("rank") && !in.rank) in.rank = j["rank"].get<int>();
    if (j.contains("model")) {
      require(preset_name.empty(), "simulate config takes either a preset or a model");
      model = io::model_from_json(j["model"]);
    }
  }
  if (model.means.size() == 0) {
    require(!preset_name.empty(), "simulate needs --preset or --config");
    const SimulationPreset& p = simulation_preset(preset_name);
    const double default_sigma = preset_name == "toy" ? std::sqrt(0.3) : 1.0;
    model = build_simulation_model(preset_name, in.n.value_or(p.default_n), in.d.value_or(p.default_d),
                                   in.sigma.value_or(default_sigma), in.knn_seed);
  } else if (in.sigma) {
    model.covariance.sigma = *in.sigma;
  }
  validate(model);

  const SampleSet data = sample(model, in.seed);
  const int s = positive_eigenvalue_count(ideal_spectrum(model).eigenvalues);
  int r = in.rank.value_or(preset_name.empty() ? s : std::min(simulation_preset(preset_name).listed_rank, s));
  r = std::max(1, std::min(r, std::max(s, 1)));

  Json truth{{"schema_version", io::kSchemaVersion},
             {"preset", preset_name.empty() ? Json(nullptr) : Json(preset_name)},
             {"seed", in.seed},
             {"covariance_kind", to_string(model.covariance.kind)},
             {"sigma", model.covariance.sigma},
             {"model", io::to_json(model)}};
  if (s >= 1) truth["stats"] = io::to_json(model_stats(model, r));

  OutputSet files;
  files.add(with_suffix(in.prefix, "_X.csv"), io::format_csv(data.x));
  files.add(with_suffix(in.prefix, "_labels.csv"), io::format_labels(data.labels));
  files.add(with_suffix(in.prefix, "_truth.json"), dump(truth));
  files.commit();
  out << "wrote " << in.prefix << "_X.csv (" << data.x.rows() << "x" << data.x.cols() << ")\n";
  return kExitOk;
}

int resolve_threads(const std::string& text) {
  std::string value = text;
  if (value.empty()) {
    const char* env = std::getenv("MDS_RECOVER_THREADS");
    value = env ? env : "1";
  }
  if (value == "auto") return 0;
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used == value.size() && v >= 1) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidInput, "--threads must be a positive integer or 'auto'");
}

int cmd_phase(const std::string& config_path, const std::string& prefix, const std::string& threads,
              const std::string& replay, std::ostream& out, std::ostream& err) {
  Json j;
  try {
    j = Json::parse(io::read_text(config_path));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::InvalidInput, std::string("malformed phase config JSON: ") + e.what());
  }
  PhaseGridConfig config = io::phase_config_from_json(j);
  config.threads = resolve_threads(threads.empty() && j.contains("threads") ? std::to_string(config.threads) : threads);

  PhaseGridResult result = replay.empty() ? run_phase(config) : io::fractions_from_csv(io::read_csv(replay), config);

  Json fit_json;
  std::string summary;
  try {
    const BoundaryFit fit = fit_boundary(result);
    fit_json = io::to_json(fit);
    summary = "slope=" + io::format_double(fit.slope) + " intercept=" + io::format_double(fit.intercept) +
              " r_squared=" + io::format_double(fit.r_squared) + " columns=" + std::to_string(fit.crossings.size());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientCrossings) throw;
    fit_json = Json{{"schema_version", io::kSchemaVersion}, {"slope", nullptr}, {"intercept", nullptr},
                    {"r_squared", nullptr}, {"transform", config.axis == SweepAxis::N ? "loglogN" : "logd"},
                    {"crossing_points", Json::array()}, {"warning", e.what()}};
    err << "warning: " << e.what() << "\n";
    summary = "slope=null intercept=null";
  }

  Json full = io::to_json(result);
  full["boundary"] = fit_json;
  OutputSet files;
  files.add(with_suffix(prefix, "_fractions.csv"), io::format_fractions_csv(result));
  files.add(with_suffix(prefix, "_result.json"), dump(full));
  files.add(with_suffix(prefix, "_boundary.json"), dump(fit_json));
  files.commit();
  if (result.unreliable) err << "warning: more than 10% numerical failures in at least one cell\n";
  out << summary << "\n";
  return kExitOk;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int cmd_audit(const std::string& prefix, const std::string& rank_text, int reps, std::uint64_t seed_override,
              bool has_seed, const std::vector<double>& sigma_sweep, const std::string& out_path, std::ostream& out) {
  const fs::path truth_path = with_suffix(prefix, "_truth.json");
  if (!fs::exists(truth_path)) fail(ErrorKind::InvalidInput, "missing truth file '" + truth_path.string() + "'");
  Json truth;
  try {
    truth = Json::parse(io::read_text(truth_path));
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::InvalidInput, std::string("malformed truth JSON: ") + e.what());
  }
  require(truth.contains("model"), "truth JSON has no model");
  const ClusterModel base = io::model_from_json(truth["model"]);
  const std::uint64_t seed = has_seed ? seed_override : truth.value("seed", std::uint64_t{0});
  const int s = positive_eigenvalue_count(ideal_spectrum(base).eigenvalues);
  int r = s;
  if (!rank_text.empty() && rank_text != "auto") r = parse_rank(rank_text).value;

  std::vector<double> sigmas = sigma_sweep;
  if (sigmas.empty()) sigmas.push_back(base.covariance.sigma);

  Json levels = Json::array();
  std::vector<double> medians;
  for (std::size_t level = 0; level < sigmas.size(); ++level) {
    ClusterModel model = base;
    model.covariance.sigma = sigmas[level];
    const GaussianNoise noise(model);
    Json runs = Json::array();
    std::vector<double> embed_err, eigvec_err, weyl_slack;
    for (int rep = 0; rep < reps; ++rep) {
      const SampleSet data = sample(model, noise, derive_seed(seed, "audit", {level, static_cast<std::uint64_t>(rep)}));
      const PerturbationReport rp = perturbation_audit(data, model, r);
      embed_err.push_back(rp.embed_err_max);
      eigvec_err.push_back(rp.eigvec_err_max);
      weyl_slack.push_back(rp.spec_norm_P + 1e-8 - rp.weyl_max_dev);
      runs.push_back(io::to_json(rp));
    }
    medians.push_back(median(embed_err));
    levels.push_back(Json{{"sigma", sigmas[level]},
                          {"replicates", runs},
                          {"median_embed_err_max", median(embed_err)},
                          {"median_eigvec_err_max", median(eigvec_err)},
                          {"weyl_holds", std::all_of(weyl_slack.begin(), weyl_slack.end(), [](double x) { return x >= 0; })}});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < medians.size(); ++i)
    if (sigmas[i] > sigmas[i - 1] && medians[i] < medians[i - 1]) monotone = false;

  Json report{{"schema_version", io::kSchemaVersion},
              {"truth", truth_path.string()},
              {"rank", r},
              {"seed", seed},
              {"levels", levels},
              {"median_embed_err_monotone_in_sigma", monotone}};
  OutputSet files;
  files.add(out_path.empty() ? with_suffix(prefix, "_audit.json") : fs::path(out_path), dump(report));
  files.commit();
  out << "median_embed_err_max";
  for (double m : medians) out << " " << io::format_double(m);
  out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classical multidimensional scaling with exact cluster recovery diagnostics", "mds-recover"};
  app.require_subcommand(1);

  EmbedInputs embed_in;
  std::string embed_out;
  double debias_trace = 0.0;
  auto* embed_cmd = app.add_subcommand("embed", "Embed a dissimilarity matrix with classical MDS");
  add_embed_options(embed_cmd, embed_in);
  auto* debias_opt = embed_cmd->add_option("--debias-trace", debias_trace, "Subtract this tr(Sigma) from kept eigenvalues")
                         ->check(CLI::NonNegativeNumber);
  embed_cmd->add_option("--out", embed_out, "Embedding CSV path (a .json sidecar is written next to it)")->required();

  EmbedInputs cluster_in;
  int k = 0;
  std::string algo = "kmeans", labels_path, cluster_out;
  std::uint64_t cluster_seed = 0;
  int restarts = 1;
  auto* cluster_cmd = app.add_subcommand("cluster", "Embed, then cluster with a known number of clusters");
  add_embed_options(cluster_cmd, cluster_in);
  cluster_cmd->add_option("--k", k, "Number of clusters")->required()->check(CLI::PositiveNumber);
  cluster_cmd->add_option("--algo", algo, "kmeans|single|complete|average|energy")
      ->check(CLI::IsMember({"kmeans", "single", "complete", "average", "energy"}));
  cluster_cmd->add_option("--labels", labels_path, "Ground-truth labels; prints agreement and the PGR certificate");
  cluster_cmd->add_option("--seed", cluster_seed, "k-means seed");
  cluster_cmd->add_option("--restarts", restarts, "k-means restarts")->check(CLI::PositiveNumber);
  cluster_cmd->add_option("--out", cluster_out, "Predicted labels path")->required();

  SimulateInputs sim;
  int sim_n = 0, sim_d = 0, sim_rank = 0;
  double sim_sigma = 0.0;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample a preset or configured cluster model");
  sim_cmd->add_option("--preset", sim.preset, "1a|1b|1c|2a|2b|2c|2d|2e|2f|toy");
  sim_cmd->add_option("--config", sim.config, "JSON config");
  auto* n_opt = sim_cmd->add_option("--N", sim_n, "Sample size")->check(CLI::PositiveNumber);
  auto* d_opt = sim_cmd->add_option("--d", sim_d, "Dimension")->check(CLI::PositiveNumber);
  auto* sigma_opt = sim_cmd->add_option("--sigma", sim_sigma, "Noise scale sigma_max")->check(CLI::NonNegativeNumber);
  auto* rank_opt = sim_cmd->add_option("--rank", sim_rank, "Rank used for the reported model stats")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed, "Sampling seed");
  sim_cmd->add_option("--knn-seed", sim.knn_seed, "Seed for the KNN covariance points");
  sim_cmd->add_option("--out-prefix", sim.prefix, "Output prefix")->required();

  std::string phase_config, phase_prefix, phase_threads, phase_replay;
  auto* phase_cmd = app.add_subcommand("phase", "Monte Carlo exact-recovery grid and boundary fit");
  phase_cmd->add_option("config", phase_config, "Phase grid JSON config")->required();
  phase_cmd->add_option("--out-prefix", phase_prefix, "Output prefix")->required();
  phase_cmd->add_option("--threads", phase_threads, "Worker threads, integer or 'auto' (default $MDS_RECOVER_THREADS or 1)");
  phase_cmd->add_option("--replay", phase_replay, "Fit the boundary of an existing fractions CSV instead of simulating");

  std::string audit_prefix, audit_rank, audit_out;
  int audit_reps = 20;
  std::uint64_t audit_seed = 0;
  std::vector<double> audit_sigmas;
  auto* audit_cmd = app.add_subcommand("audit", "Perturbation audit against a simulated truth");
  audit_cmd->add_option("prefix", audit_prefix, "Prefix used with simulate (reads <prefix>_truth.json)")->required();
  audit_cmd->add_option("--rank", audit_rank, "Embedding rank (default: rank of M M^T)");
  audit_cmd->add_option("--reps", audit_reps, "Replicates per noise level")->check(CLI::PositiveNumber);
  auto* audit_seed_opt = audit_cmd->add_option("--seed", audit_seed, "Base seed (default: the truth seed)");
  audit_cmd->add_option("--sigmas", audit_sigmas, "Noise levels to sweep (default: the truth sigma)")->delimiter(',');
  audit_cmd->add_option("--out", audit_out, "Report path (default <prefix>_audit.json)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*embed_cmd) {
      if (*debias_opt) embed_in.debias_trace = debias_trace;
      return cmd_embed(embed_in, embed_out, out);
    }
    if (*cluster_cmd) return cmd_cluster(cluster_in, k, algo, labels_path, cluster_seed, restarts, cluster_out, out);
    if (*sim_cmd) {
      if (*n_opt) sim.n = sim_n;
      if (*d_opt) sim.d = sim_d;
      if (*sigma_opt) sim.sigma = sim_sigma;
      if (*rank_opt) sim.rank = sim_rank;
      return cmd_simulate(sim, out);
    }
    if (*phase_cmd) return cmd_phase(phase_config, phase_prefix, phase_threads, phase_replay, out, err);
    if (*audit_cmd)
      return cmd_audit(audit_prefix, audit_rank, audit_reps, audit_seed, static_cast<bool>(*audit_seed_opt), audit_sigmas,
                       audit_out, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.kind() == ErrorKind::InvalidInput ? kExitUsage : kExitDomain;
  } catch (const std::exception& e) {
    err << "InvalidInput: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mdsr::cli
