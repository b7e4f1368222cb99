#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rhythm::cli {

enum ExitCode : int { kOk = 0, kInvalidInput = 2, kNumericalFailure = 3, kResumeMismatch = 4 };

struct SimulateOptions {
  std::string config;
  std::string out_dir;
  std::string mode = "dependent";  // dependent | independent
};
void cmd_simulate(const SimulateOptions& o, std::ostream& log);

struct FitOptions {
  std::string data;
  std::string config;
  std::string out_dir;
  std::optional<std::string> mode;  // overrides the config
  std::optional<int> threads;
  std::string checkpoint;  // default <out_dir>/checkpoint.bin
  bool resume = false;
  long progress_every = 500;
  /// Stop after this many sweeps, leaving a checkpoint (for tests of resume).
  std::optional<long> stop_after;
};
void cmd_fit(const FitOptions& o, std::ostream& log);

struct SummarizeOptions {
  std::string archive;
  std::string out_dir;
  double target_period = 24;
  double k_star = 0.05;
  double corr_threshold = 0.30;
  bool per_sample_corr = false;
};
void cmd_summarize(const SummarizeOptions& o, std::ostream& log);

struct EvaluateOptions {
  std::string truth;
  std::vector<std::string> scores;
  std::string out_dir;
  std::string label = "periodic";  // periodic | circadian
};
void cmd_evaluate(const EvaluateOptions& o, std::ostream& log);

struct GtestOptions {
  std::string data;
  std::string out;
  std::string qvalues;
};
void cmd_gtest(const GtestOptions& o, std::ostream& log);

struct SparsityOptions {
  double a = 1;
  double b = 10;
  std::size_t draws = 100000;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  int bins = 50;
};
void cmd_sparsity(const SparsityOptions& o, std::ostream& log);

struct GewekeOptions {
  std::string mode = "dependent";
  long n_outer = 20000;
  long n_chains = 200;
  std::uint64_t seed = 1;
  double sigma_rate_scale = 1.0;
  std::string out;
};
void cmd_geweke(const GewekeOptions& o, std::ostream& log);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

}  // namespace rhythm::cli
