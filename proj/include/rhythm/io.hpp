#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhythm/basis.hpp"
#include "rhythm/model_state.hpp"
#include "rhythm/sampler.hpp"

namespace rhythm {

/// Raw (uncentred) values as stored on disk.
struct Dataset {
  MatrixXd values;
  std::vector<std::string> probe_ids;
  std::vector<double> times_hours;
};

/// Header "probe_id,t=<hours>,...", one probe per row.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& d);

/// Everything `fit` needs besides the data.
struct FitSettings {
  HyperParams hyper;
  ChainConfig chain;
  std::vector<double> periods{4, 6, 8, 12, 24};
  Index n_local = 10;
  KernelKind kernel = KernelKind::kGaussian;
  double bandwidth = 25;
  Mode mode = Mode::kDependent;
  long checkpoint_every = 1000;

  std::string to_json() const;
};

/// Unknown fields are rejected by name; the seed must be explicit.
FitSettings fit_settings_from_json(const std::string& text);

struct PreparedFit {
  ExpressionMatrix data;  // centred
  DesignPair<double> designs;
};

PreparedFit prepare_fit(const Dataset& raw, const FitSettings& settings);

std::string read_text(const std::string& path);

}  // namespace rhythm
