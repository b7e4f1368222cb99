#include "rhythm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "rhythm/archive.hpp"
#include "rhythm/baselines.hpp"
#include "rhythm/csv.hpp"
#include "rhythm/diagnostics.hpp"
#include "rhythm/errors.hpp"
#include "rhythm/io.hpp"
#include "rhythm/priors.hpp"
#include "rhythm/sampler.hpp"
#include "rhythm/summaries.hpp"
#include "rhythm/synth.hpp"

namespace rhythm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

}  // namespace

void cmd_simulate(const SimulateOptions& o, std::ostream& log) {
  SynthConfig config = synth_config_from_json(read_text(o.config));
  const Mode mode = mode_from_string(o.mode);
  ensure_dir(o.out_dir);
  Xoshiro256 rng(config.seed);
  const SynthResult r = mode == Mode::kDependent ? generate_dependent(config, rng) : generate_independent(config, rng);
  write_dataset_csv(join(o.out_dir, "data.csv"), Dataset{r.y, r.probe_ids, r.times_hours});
  write_truth_json(join(o.out_dir, "truth.json"), r, config);
  auto os = open_output(join(o.out_dir, "config.json"));
  os << config_to_json(config) << '\n';
  log << "simulated " << r.y.rows() << " x " << r.y.cols() << " (" << o.mode << "): " << r.truth.n_periodic()
      << " simply periodic, " << r.truth.n_circadian() << " circadian\n";
}

void cmd_fit(const FitOptions& o, std::ostream& log) {
  const Dataset raw = read_dataset_csv(o.data);
  FitSettings settings = fit_settings_from_json(read_text(o.config));
  if (o.mode) settings.mode = mode_from_string(*o.mode);
  if (o.threads) settings.chain.n_threads = *o.threads;
  const PreparedFit prep = prepare_fit(raw, settings);
  ensure_dir(o.out_dir);
  const std::string ckpt = o.checkpoint.empty() ? join(o.out_dir, "checkpoint.bin") : o.checkpoint;

  std::optional<ChainRunner> runner;
  if (o.resume) {
    require(fs::exists(ckpt), "no checkpoint at " + ckpt + " to resume from");
    runner.emplace(ChainRunner::resume(ckpt, prep.data, prep.designs, settings.hyper, settings.chain, settings.mode,
                                       settings.periods));
    log << "resumed at sweep " << runner->completed_sweeps() << '\n';
  } else {
    runner.emplace(prep.data, prep.designs, settings.hyper, settings.chain, settings.mode, settings.periods);
  }
  runner->set_checkpointing(ckpt, settings.checkpoint_every);
  const long last = o.stop_after ? std::min(*o.stop_after, settings.chain.n_iter) : settings.chain.n_iter;
  runner->run_until(
      last,
      [&](const ProgressReport& r) {
        log << "sweep " << r.sweep << '/' << r.n_iter << "  theta_accept " << fmt_double(r.theta_accept_rate, 4)
            << "  gamma_accept " << fmt_double(r.gamma_accept_rate, 4) << "  k " << r.k << '\n';
      },
      o.progress_every);
  runner->save_checkpoint(ckpt);
  if (!runner->finished()) {
    log << "stopped at sweep " << runner->completed_sweeps() << "; checkpoint " << ckpt << '\n';
    return;
  }
  write_archive_dir(runner->archive(), o.out_dir, settings.to_json());
  log << "archive with " << runner->archive().n_samples << " samples written to " << o.out_dir << '\n';
}

void cmd_summarize(const SummarizeOptions& o, std::ostream& log) {
  const PosteriorArchive a = read_archive_dir(o.archive);
  const auto it = std::find(a.periods.begin(), a.periods.end(), o.target_period);
  require(it != a.periods.end(), "target period " + fmt_double(o.target_period) + " h is not among the fitted periods");
  const auto target = static_cast<std::int64_t>(it - a.periods.begin());
  ensure_dir(o.out_dir);
  write_summary_csv(join(o.out_dir, "summary.csv"), a, target);
  const auto scores = rhythm_scores(a, target);
  std::vector<double> betas;
  for (const auto& s : scores) betas.push_back(s.beta);
  const DiscoveryList list = fdr_select(betas, o.k_star);
  write_discoveries_csv(join(o.out_dir, "discoveries.csv"), list, scores);
  const auto corr = posterior_correlation(a, o.per_sample_corr);
  const auto edges = correlation_edges(corr, o.corr_threshold);
  write_edges_csv(join(o.out_dir, "edges.csv"), edges, a.probe_ids);

  ScoreFile periodic{"model_" + a.mode + "_periodic", true, a.probe_ids, {}};
  ScoreFile circadian{"model_" + a.mode + "_circadian", true, a.probe_ids, {}};
  for (const auto& s : scores) {
    periodic.scores.push_back(s.prob_periodic);
    circadian.scores.push_back(s.prob_circadian);
  }
  write_score_file(join(o.out_dir, "scores_periodic.csv"), periodic);
  write_score_file(join(o.out_dir, "scores_circadian.csv"), circadian);
  log << list.selected.size() << " discoveries at k* = " << fmt_double(o.k_star, 6) << " (kappa "
      << fmt_double(list.kappa, 6) << "), " << edges.size() << " edges at |corr| >= " << fmt_double(o.corr_threshold, 6)
      << '\n';
}

void cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
  require(o.label == "periodic" || o.label == "circadian", "label must be periodic or circadian");
  require(!o.scores.empty(), "at least one score file is required");
  json truth;
  try {
    truth = json::parse(read_text(o.truth));
  } catch (const json::exception& e) {
    throw InvalidInput(o.truth + ": " + e.what());
  }
  std::map<std::string, bool> label;
  try {
    for (const auto& pr : truth.at("probes")) label[pr.at("id").get<std::string>()] = pr.at(o.label).get<bool>();
  } catch (const json::exception& e) {
    throw InvalidInput(o.truth + ": " + e.what());
  }
  ensure_dir(o.out_dir);
  auto table = open_output(join(o.out_dir, "auc.csv"));
  table << "method,auc,n_positive,n_negative\n";
  for (const auto& path : o.scores) {
    const ScoreFile f = read_score_file(path);
    std::vector<bool> t;
    for (const auto& id : f.probe_ids) {
      const auto hit = label.find(id);
      require(hit != label.end(), path + ": probe '" + id + "' is not in the truth file");
      t.push_back(hit->second);
    }
    const RocResult roc = roc_and_fdr_curves(f.oriented(), t);
    write_roc_csv(join(o.out_dir, "roc_" + file_safe(f.method) + ".csv"), roc);
    const auto pos = std::count(t.begin(), t.end(), true);
    table << f.method << ',' << fmt_double(roc.auc) << ',' << pos << ',' << static_cast<long>(t.size()) - pos << '\n';
    log << f.method << " AUC " << fmt_double(roc.auc, 6) << '\n';
  }
}

void cmd_gtest(const GtestOptions& o, std::ostream& log) {
  const Dataset d = read_dataset_csv(o.data);
  ScoreFile f{"fisher_g", false, d.probe_ids, {}};
  for (Index i = 0; i < d.values.rows(); ++i) f.scores.push_back(fisher_g_test(d.values.row(i).transpose()).p_value);
  write_score_file(o.out, f);
  if (!o.qvalues.empty()) {
    ScoreFile q = f;
    q.method = "fisher_g_qvalue";
    q.scores = fdr_adjust(f.scores);
    write_score_file(o.qvalues, q);
  }
  log << "g-test on " << d.values.rows() << " series\n";
}

void cmd_sparsity(const SparsityOptions& o, std::ostream& log) {
  require(o.seed_given, "--seed is required (reproducibility policy)");
  require(o.bins >= 1, "--bins must be positive");
  Xoshiro256 rng(o.seed);
  const auto nonshrink = marginal_sparsity_distribution(o.a, o.b, o.draws, rng);
  std::vector<long> counts(static_cast<std::size_t>(o.bins), 0);
  double sum = 0, sq = 0;
  for (const double v : nonshrink) {
    const double sp = 1.0 - v;
    sum += sp;
    sq += sp * sp;
    const auto bin = std::min(static_cast<std::size_t>(sp * o.bins), counts.size() - 1);
    ++counts[bin];
  }
  const double n = static_cast<double>(nonshrink.size());
  const double mean = sum / n;
  const double se = std::sqrt(std::max(0.0, sq / n - mean * mean) / n);
  auto os = open_output(o.out);
  os << "# a=" << fmt_double(o.a) << " b=" << fmt_double(o.b) << " draws=" << o.draws
     << " mean_sparsity=" << fmt_double(mean, 10) << " se=" << fmt_double(se, 6) << '\n';
  os << "bin_lo,bin_hi,count,density\n";
  for (int b = 0; b < o.bins; ++b) {
    const double lo = static_cast<double>(b) / o.bins;
    const double hi = static_cast<double>(b + 1) / o.bins;
    os << fmt_double(lo, 10) << ',' << fmt_double(hi, 10) << ',' << counts[static_cast<std::size_t>(b)] << ','
       << fmt_double(static_cast<double>(counts[static_cast<std::size_t>(b)]) / (n * (hi - lo)), 10) << '\n';
  }
  log << "mean sparsity " << fmt_double(mean, 6) << " (se " << fmt_double(se, 3) << ")\n";
}

void cmd_geweke(const GewekeOptions& o, std::ostream& log) {
  GewekeConfig c = GewekeConfig::tiny(mode_from_string(o.mode));
  c.n_outer = o.n_outer;
  c.n_chains = o.n_chains;
  c.seed = o.seed;
  c.sigma_rate_scale = o.sigma_rate_scale;
  const GewekeReport r = geweke_joint_test(c);
  write_geweke_csv(o.out, r);
  log << "max |z| = " << fmt_double(r.max_abs_z(), 4) << " over " << r.stats.size() << " functions\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian detection of periodic expression with latent factors"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
  s->add_option("--config", sim.config, "Synthetic-data JSON (seed required)")->required();
  s->add_option("--out", sim.out_dir, "Output directory")->required();
  s->add_option("--mode", sim.mode, "dependent or independent")->check(CLI::IsMember({"dependent", "independent"}));

  FitOptions fit;
  auto* f = app.add_subcommand("fit", "Run the Gibbs sampler");
  f->add_option("--data", fit.data, "Dataset CSV")->required();
  f->add_option("--config", fit.config, "Fit JSON (seed required)")->required();
  f->add_option("--out", fit.out_dir, "Archive directory")->required();
  f->add_option("--mode", fit.mode, "dependent or independent (overrides config)")
      ->check(CLI::IsMember({"dependent", "independent"}));
  f->add_option("--threads", fit.threads, "Worker threads; results do not depend on it");
  f->add_option("--checkpoint", fit.checkpoint, "Checkpoint path (default <out>/checkpoint.bin)");
  f->add_flag("--resume", fit.resume, "Continue from the checkpoint");
  f->add_option("--progress-every", fit.progress_every, "Sweeps between progress lines (0 = quiet)");
  f->add_option("--stop-after", fit.stop_after, "Stop after this sweep, leaving a checkpoint");

  SummarizeOptions sum;
  auto* m = app.add_subcommand("summarize", "Posterior summaries, discovery list and correlation edges");
  m->add_option("--archive", sum.archive, "Archive directory")->required();
  m->add_option("--out", sum.out_dir, "Output directory")->required();
  m->add_option("--target-period", sum.target_period, "Circadian period in hours");
  m->add_option("--k-star", sum.k_star, "Target expected FDR");
  m->add_option("--corr-threshold", sum.corr_threshold, "Absolute correlation for edges");
  m->add_flag("--per-sample-corr", sum.per_sample_corr, "Average per-sample correlations");

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "ROC, FDR curves and AUC against ground truth");
  e->add_option("--truth", ev.truth, "truth.json from simulate")->required();
  e->add_option("--scores", ev.scores, "Score files")->required();
  e->add_option("--out", ev.out_dir, "Output directory")->required();
  e->add_option("--label", ev.label, "periodic or circadian")->check(CLI::IsMember({"periodic", "circadian"}));

  GtestOptions gt;
  auto* g = app.add_subcommand("gtest", "Fisher's g-test score file");
  g->add_option("--data", gt.data, "Dataset CSV")->required();
  g->add_option("--out", gt.out, "Score file of p-values")->required();
  g->add_option("--qvalues", gt.qvalues, "Also write step-up adjusted values");

  SparsityOptions sp;
  auto* y = app.add_subcommand("sparsity", "Prior sparsity probability histogram");
  y->add_option("--a", sp.a, "Pareto shape");
  y->add_option("--b", sp.b, "Pareto scale");
  y->add_option("--draws", sp.draws, "Monte Carlo draws");
  auto* seed_opt = y->add_option("--seed", sp.seed, "RNG seed");
  y->add_option("--out", sp.out, "Histogram CSV")->required();
  y->add_option("--bins", sp.bins, "Histogram bins");

  GewekeOptions gw;
  auto* w = app.add_subcommand("geweke", "Joint-distribution test of the sampler");
  w->add_option("--mode", gw.mode)->check(CLI::IsMember({"dependent", "independent"}));
  w->add_option("--n-outer", gw.n_outer, "Replications per simulator");
  w->add_option("--n-chains", gw.n_chains, "Successive-conditional chains sharing the replications");
  w->add_option("--seed", gw.seed);
  w->add_option("--sigma-rate-scale", gw.sigma_rate_scale, "Fault injection; 1 = correct sampler");
  w->add_option("--out", gw.out, "Report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (*s) cmd_simulate(sim, std::cerr);
    else if (*f) cmd_fit(fit, std::cerr);
    else if (*m) cmd_summarize(sum, std::cerr);
    else if (*e) cmd_evaluate(ev, std::cerr);
    else if (*g) cmd_gtest(gt, std::cerr);
    else if (*y) {
      sp.seed_given = seed_opt->count() > 0;
      cmd_sparsity(sp, std::cerr);
    } else if (*w) cmd_geweke(gw, std::cerr);
  } catch (const ResumeMismatch& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kResumeMismatch;
  } catch (const NumericalFailure& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumericalFailure;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kInvalidInput;
  }
  return kOk;
}

}  // namespace rhythm::cli
