#include "rhythm/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rhythm/binary_io.hpp"
#include "rhythm/csv.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InvalidInput(where + ": cannot parse number '" + s + "'");
  }
}

}  // namespace

std::string read_text(const std::string& path) { return bin::read_file(path); }

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot read " + path);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  require(header.size() >= 2 && header[0] == "probe_id", path + ": header must start with probe_id");
  Dataset d;
  for (std::size_t c = 1; c < header.size(); ++c) {
    require(header[c].rfind("t=", 0) == 0, path + ": column " + std::to_string(c + 1) + " header must be t=<hours>");
    d.times_hours.push_back(parse_number(header[c].substr(2), path + ": header"));
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    require(cells.size() == header.size(), where + ": expected " + std::to_string(header.size()) + " fields");
    d.probe_ids.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double v = parse_number(cells[c], where);
      require(std::isfinite(v), where + ": non-finite value");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), path + ": no probes");
  d.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(d.times_hours.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) d.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return d;
}

void write_dataset_csv(const std::string& path, const Dataset& d) {
  require(d.values.rows() == static_cast<Index>(d.probe_ids.size()), "dataset ids and rows differ");
  require(d.values.cols() == static_cast<Index>(d.times_hours.size()), "dataset times and columns differ");
  auto os = open_output(path);
  os << "probe_id";
  for (const double t : d.times_hours) os << ",t=" << fmt_double(t);
  os << '\n';
  for (Index i = 0; i < d.values.rows(); ++i) {
    os << d.probe_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < d.values.cols(); ++j) os << ',' << fmt_double(d.values(i, j));
    os << '\n';
  }
}

std::string FitSettings::to_json() const {
  json j;
  j["seed"] = chain.seed;
  j["n_iter"] = chain.n_iter;
  j["burn_in"] = chain.burn_in;
  j["thin"] = chain.thin;
  j["record_lambda_every"] = chain.record_lambda_every;
  j["adapt"] = chain.adapt.enabled;
  j["adapt_start"] = chain.adapt.start;
  j["adapt_epsilon"] = chain.adapt.epsilon;
  j["min_k"] = chain.adapt.min_k;
  j["max_k"] = chain.adapt.max_k;
  j["zero_thresholds"] = chain.zero_thresholds;
  j["a_sigma"] = hyper.a_sigma;
  j["b_sigma"] = hyper.b_sigma;
  j["rho"] = hyper.rho;
  j["a1"] = hyper.a1;
  j["a2"] = hyper.a2;
  j["a_theta"] = hyper.a_theta;
  j["b_theta"] = hyper.b_theta;
  j["a_gamma"] = hyper.a_gamma;
  j["b_gamma"] = hyper.b_gamma;
  j["k_init"] = hyper.k_init;
  j["periods"] = periods;
  j["n_local"] = n_local;
  j["kernel"] = to_string(kernel);
  j["bandwidth"] = bandwidth;
  j["mode"] = to_string(mode);
  j["checkpoint_every"] = checkpoint_every;
  return j.dump(2);
}

FitSettings fit_settings_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  require(j.contains("seed"), "config field 'seed' is required: set an explicit seed");
  FitSettings s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto get = [&]<typename T>(T& out) {
      try {
        out = it->get<T>();
      } catch (const json::exception& e) {
        throw InvalidInput("config field '" + key + "': " + e.what());
      }
    };
    if (key == "seed") get(s.chain.seed);
    else if (key == "n_iter") get(s.chain.n_iter);
    else if (key == "burn_in") get(s.chain.burn_in);
    else if (key == "thin") get(s.chain.thin);
    else if (key == "record_lambda_every") get(s.chain.record_lambda_every);
    else if (key == "adapt") get(s.chain.adapt.enabled);
    else if (key == "adapt_start") get(s.chain.adapt.start);
    else if (key == "adapt_epsilon") get(s.chain.adapt.epsilon);
    else if (key == "min_k") get(s.chain.adapt.min_k);
    else if (key == "max_k") get(s.chain.adapt.max_k);
    else if (key == "threads") get(s.chain.n_threads);
    else if (key == "zero_thresholds") get(s.chain.zero_thresholds);
    else if (key == "a_sigma") get(s.hyper.a_sigma);
    else if (key == "b_sigma") get(s.hyper.b_sigma);
    else if (key == "rho") get(s.hyper.rho);
    else if (key == "a1") get(s.hyper.a1);
    else if (key == "a2") get(s.hyper.a2);
    else if (key == "a_theta") get(s.hyper.a_theta);
    else if (key == "b_theta") get(s.hyper.b_theta);
    else if (key == "a_gamma") get(s.hyper.a_gamma);
    else if (key == "b_gamma") get(s.hyper.b_gamma);
    else if (key == "k_init") get(s.hyper.k_init);
    else if (key == "periods") get(s.periods);
    else if (key == "n_local" || key == "T_tilde") get(s.n_local);
    else if (key == "kernel") {
      std::string k;
      get(k);
      s.kernel = kernel_kind_from_string(k);
    } else if (key == "bandwidth") get(s.bandwidth);
    else if (key == "mode") {
      std::string m;
      get(m);
      s.mode = mode_from_string(m);
    } else if (key == "checkpoint_every") get(s.checkpoint_every);
    else throw InvalidInput("unknown config field '" + key + "'");
  }
  s.hyper.validate();
  s.chain.validate();
  require(s.n_local > 0, "config field 'n_local' must be positive");
  require(s.bandwidth > 0, "config field 'bandwidth' must be positive");
  require(s.checkpoint_every >= 0, "config field 'checkpoint_every' must be nonnegative");
  return s;
}

PreparedFit prepare_fit(const Dataset& raw, const FitSettings& settings) {
  const TimeGrid<double> grid = standardize_times(raw.times_hours);
  const PeriodSet<double> periods{settings.periods};
  validate_periods(grid, periods);
  PreparedFit out{center_rows(raw.values, raw.probe_ids, grid),
                  make_designs(grid, periods, settings.n_local, settings.kernel, settings.bandwidth)};
  return out;
}

}  // namespace rhythm
