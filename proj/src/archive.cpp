#include "rhythm/archive.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "rhythm/binary_io.hpp"
#include "rhythm/errors.hpp"

namespace rhythm {

using json = nlohmann::json;

BitVector BitVector::from_words(std::vector<std::uint64_t> words, std::size_t size) {
  if (words.size() != (size + 63) / 64) throw InvalidInput("bit vector length does not match its word count");
  BitVector b;
  b.words_ = std::move(words);
  b.size_ = size;
  return b;
}

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool FactorSnapshot::operator==(const FactorSnapshot& o) const {
  return sample == o.sample && same_matrix(Lambda, o.Lambda) && same_matrix(Eta, o.Eta);
}

bool PosteriorArchive::operator==(const PosteriorArchive& o) const {
  return p == o.p && q == o.q && n_local == o.n_local && T == o.T && mode == o.mode && periods == o.periods &&
         probe_ids == o.probe_ids && time_hours == o.time_hours && n_samples == o.n_samples &&
         theta_mask == o.theta_mask && theta_values == o.theta_values && theta_offsets == o.theta_offsets &&
         gamma_mask == o.gamma_mask && sigma2 == o.sigma2 && k == o.k && K_theta == o.K_theta &&
         K_gamma == o.K_gamma && theta_accept_rate == o.theta_accept_rate &&
         gamma_accept_rate == o.gamma_accept_rate && snapshots == o.snapshots &&
         same_matrix(factor_sum, o.factor_sum) && same_matrix(factor_sq_sum, o.factor_sq_sum) &&
         same_matrix(fitted_sum, o.fitted_sum);
}

Eigen::MatrixXd PosteriorArchive::theta(std::uint64_t sample) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, 2 * q);
  std::uint64_t v = theta_offsets.at(sample);
  for (std::int64_t i = 0; i < p; ++i) {
    for (std::int64_t m = 0; m < q; ++m) {
      if (theta_active(sample, i, m)) {
        out(i, 2 * m) = theta_values[v++];
        out(i, 2 * m + 1) = theta_values[v++];
      }
    }
  }
  return out;
}

Eigen::Vector2d PosteriorArchive::theta_pair(std::uint64_t sample, std::int64_t i, std::int64_t m) const {
  std::uint64_t v = theta_offsets.at(sample);
  for (std::int64_t r = 0; r < p; ++r) {
    for (std::int64_t c = 0; c < q; ++c) {
      const bool on = theta_active(sample, r, c);
      if (r == i && c == m) {
        return on ? Eigen::Vector2d(theta_values[v], theta_values[v + 1]) : Eigen::Vector2d::Zero();
      }
      if (on) v += 2;
    }
  }
  throw InvalidInput("theta pair index out of range");
}

void PosteriorArchive::append(const Eigen::MatrixXd& theta_draw, const Eigen::MatrixXd& gamma_draw,
                              const Eigen::VectorXd& sigma2_draw, std::int64_t rank, double k_theta,
                              double k_gamma, double theta_rate, double gamma_rate) {
  theta_offsets.push_back(theta_values.size());
  for (std::int64_t i = 0; i < p; ++i) {
    for (std::int64_t m = 0; m < q; ++m) {
      const double a = theta_draw(i, 2 * m);
      const double b = theta_draw(i, 2 * m + 1);
      const bool on = a != 0.0 || b != 0.0;
      theta_mask.push_back(on);
      if (on) {
        theta_values.push_back(a);
        theta_values.push_back(b);
      }
    }
  }
  for (std::int64_t i = 0; i < p; ++i) {
    for (std::int64_t l = 0; l < n_local; ++l) gamma_mask.push_back(gamma_draw(i, l) != 0.0);
  }
  for (std::int64_t i = 0; i < p; ++i) sigma2.push_back(sigma2_draw[i]);
  k.push_back(rank);
  K_theta.push_back(k_theta);
  K_gamma.push_back(k_gamma);
  theta_accept_rate.push_back(theta_rate);
  gamma_accept_rate.push_back(gamma_rate);
  ++n_samples;
}

bool PosteriorArchive::masks_consistent() const {
  if (theta_offsets.size() != n_samples) return false;
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    std::uint64_t v = theta_offsets[s];
    for (std::int64_t i = 0; i < p; ++i) {
      for (std::int64_t m = 0; m < q; ++m) {
        if (!theta_active(s, i, m)) continue;
        if (v + 1 >= theta_values.size()) return false;
        // An active pair is never (0, 0); a shrunk one is never stored.
        if (theta_values[v] == 0.0 && theta_values[v + 1] == 0.0) return false;
        v += 2;
      }
    }
    const std::uint64_t next = s + 1 < n_samples ? theta_offsets[s + 1] : theta_values.size();
    if (v != next) return false;
  }
  return true;
}

namespace {

constexpr char kArchiveMagic[8] = {'R', 'H', 'Y', 'A', 'R', 'C', 'H', '1'};

void put_bits(std::ostream& os, const BitVector& b) {
  bin::put<std::uint64_t>(os, b.size());
  bin::put_vector(os, b.words());
}

BitVector get_bits(std::istream& is) {
  const auto n = bin::get<std::uint64_t>(is);
  return BitVector::from_words(bin::get_vector<std::uint64_t>(is), n);
}

}  // namespace

void PosteriorArchive::serialize(std::ostream& os) const {
  os.write(kArchiveMagic, sizeof(kArchiveMagic));
  bin::put(os, p);
  bin::put(os, q);
  bin::put(os, n_local);
  bin::put(os, T);
  bin::put_string(os, mode);
  bin::put_vector(os, periods);
  bin::put<std::uint64_t>(os, probe_ids.size());
  for (const auto& id : probe_ids) bin::put_string(os, id);
  bin::put_vector(os, time_hours);
  bin::put(os, n_samples);
  put_bits(os, theta_mask);
  bin::put_vector(os, theta_values);
  bin::put_vector(os, theta_offsets);
  put_bits(os, gamma_mask);
  bin::put_vector(os, sigma2);
  bin::put_vector(os, k);
  bin::put_vector(os, K_theta);
  bin::put_vector(os, K_gamma);
  bin::put_vector(os, theta_accept_rate);
  bin::put_vector(os, gamma_accept_rate);
  bin::put<std::uint64_t>(os, snapshots.size());
  for (const auto& s : snapshots) {
    bin::put(os, s.sample);
    bin::put_matrix(os, s.Lambda);
    bin::put_matrix(os, s.Eta);
  }
  bin::put_matrix(os, factor_sum);
  bin::put_matrix(os, factor_sq_sum);
  bin::put_matrix(os, fitted_sum);
}

PosteriorArchive PosteriorArchive::deserialize(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kArchiveMagic, 8)) throw InvalidInput("not an archive container");
  PosteriorArchive a;
  a.p = bin::get<std::int64_t>(is);
  a.q = bin::get<std::int64_t>(is);
  a.n_local = bin::get<std::int64_t>(is);
  a.T = bin::get<std::int64_t>(is);
  a.mode = bin::get_string(is);
  a.periods = bin::get_vector<double>(is);
  const auto n_ids = bin::get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_ids; ++i) a.probe_ids.push_back(bin::get_string(is));
  a.time_hours = bin::get_vector<double>(is);
  a.n_samples = bin::get<std::uint64_t>(is);
  a.theta_mask = get_bits(is);
  a.theta_values = bin::get_vector<double>(is);
  a.theta_offsets = bin::get_vector<std::uint64_t>(is);
  a.gamma_mask = get_bits(is);
  a.sigma2 = bin::get_vector<double>(is);
  a.k = bin::get_vector<std::int64_t>(is);
  a.K_theta = bin::get_vector<double>(is);
  a.K_gamma = bin::get_vector<double>(is);
  a.theta_accept_rate = bin::get_vector<double>(is);
  a.gamma_accept_rate = bin::get_vector<double>(is);
  const auto n_snap = bin::get<std::uint64_t>(is);
  for (std::uint64_t s = 0; s < n_snap; ++s) {
    FactorSnapshot f;
    f.sample = bin::get<std::uint64_t>(is);
    f.Lambda = bin::get_matrix(is);
    f.Eta = bin::get_matrix(is);
    a.snapshots.push_back(std::move(f));
  }
  a.factor_sum = bin::get_matrix(is);
  a.factor_sq_sum = bin::get_matrix(is);
  a.fitted_sum = bin::get_matrix(is);
  return a;
}

namespace {

template <typename T>
std::string raw_bytes(const std::vector<T>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
}

template <typename T>
std::vector<T> from_raw(const std::string& bytes) {
  if (bytes.size() % sizeof(T) != 0) throw InvalidInput("column file has a partial element");
  std::vector<T> v(bytes.size() / sizeof(T));
  if (!v.empty()) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

std::string matrix_bytes(const Eigen::MatrixXd& m) {
  return std::string(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

Eigen::MatrixXd matrix_from(const std::string& bytes, std::int64_t rows, std::int64_t cols, std::size_t offset) {
  Eigen::MatrixXd m(rows, cols);
  const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
  if (offset + n > bytes.size()) throw InvalidInput("column file too short");
  std::memcpy(m.data(), bytes.data() + offset, n);
  return m;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

void write_archive_dir(const PosteriorArchive& a, const std::string& dir, const std::string& config_json) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create archive directory " + dir + ": " + ec.message());

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("theta_mask.bits", raw_bytes(a.theta_mask.words()));
  files.emplace_back("theta_values.f64", raw_bytes(a.theta_values));
  files.emplace_back("theta_offsets.u64", raw_bytes(a.theta_offsets));
  files.emplace_back("gamma_mask.bits", raw_bytes(a.gamma_mask.words()));
  files.emplace_back("sigma2.f64", raw_bytes(a.sigma2));
  files.emplace_back("rank.i64", raw_bytes(a.k));
  files.emplace_back("k_theta.f64", raw_bytes(a.K_theta));
  files.emplace_back("k_gamma.f64", raw_bytes(a.K_gamma));
  files.emplace_back("theta_accept.f64", raw_bytes(a.theta_accept_rate));
  files.emplace_back("gamma_accept.f64", raw_bytes(a.gamma_accept_rate));
  std::string lambda_bytes;
  std::string eta_bytes;
  json snaps = json::array();
  for (const auto& s : a.snapshots) {
    lambda_bytes += matrix_bytes(s.Lambda);
    eta_bytes += matrix_bytes(s.Eta);
    snaps.push_back({{"sample", s.sample}, {"k", s.Lambda.cols()}});
  }
  files.emplace_back("lambda_snapshots.f64", lambda_bytes);
  files.emplace_back("eta_snapshots.f64", eta_bytes);
  files.emplace_back("factor_sum.f64", matrix_bytes(a.factor_sum));
  files.emplace_back("factor_sq_sum.f64", matrix_bytes(a.factor_sq_sum));
  files.emplace_back("fitted_sum.f64", matrix_bytes(a.fitted_sum));

  json manifest;
  manifest["format"] = "rhythm-archive";
  manifest["version"] = 1;
  manifest["mode"] = a.mode;
  manifest["p"] = a.p;
  manifest["q"] = a.q;
  manifest["n_local"] = a.n_local;
  manifest["T"] = a.T;
  manifest["periods"] = a.periods;
  manifest["time_hours"] = a.time_hours;
  manifest["probe_ids"] = a.probe_ids;
  manifest["n_samples"] = a.n_samples;
  manifest["theta_mask_bits"] = a.theta_mask.size();
  manifest["gamma_mask_bits"] = a.gamma_mask.size();
  manifest["snapshots"] = snaps;
  manifest["layout"] = {{"masks", "(sample, probe, basis) row-major bits, LSB first"},
                        {"matrices", "column-major float64"},
                        {"theta_values", "active (sin, cos) pairs in mask order"}};
  json listing = json::array();
  for (const auto& [name, bytes] : files) {
    bin::Fnv1a h;
    h.update(bytes.data(), bytes.size());
    listing.push_back({{"name", name}, {"bytes", bytes.size()}, {"fnv1a", hex64(h.digest())}});
    bin::write_atomically((fs::path(dir) / name).string(), bytes);
  }
  manifest["files"] = listing;
  if (!config_json.empty()) manifest["config"] = json::parse(config_json);
  bin::write_atomically((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

PosteriorArchive read_archive_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const json manifest = json::parse(bin::read_file((fs::path(dir) / "manifest.json").string()));
  if (manifest.value("format", "") != "rhythm-archive") throw InvalidInput(dir + " is not an archive directory");
  const auto col = [&](const char* name) {
    const std::string bytes = bin::read_file((fs::path(dir) / name).string());
    for (const auto& f : manifest.at("files")) {
      if (f.at("name") == name) {
        bin::Fnv1a h;
        h.update(bytes.data(), bytes.size());
        if (f.at("fnv1a").get<std::string>() != hex64(h.digest())) {
          throw InvalidInput(std::string("checksum mismatch in ") + name);
        }
      }
    }
    return bytes;
  };
  PosteriorArchive a;
  a.mode = manifest.at("mode");
  a.p = manifest.at("p");
  a.q = manifest.at("q");
  a.n_local = manifest.at("n_local");
  a.T = manifest.at("T");
  a.periods = manifest.at("periods").get<std::vector<double>>();
  a.time_hours = manifest.at("time_hours").get<std::vector<double>>();
  a.probe_ids = manifest.at("probe_ids").get<std::vector<std::string>>();
  a.n_samples = manifest.at("n_samples");
  a.theta_mask = BitVector::from_words(from_raw<std::uint64_t>(col("theta_mask.bits")), manifest.at("theta_mask_bits"));
  a.theta_values = from_raw<double>(col("theta_values.f64"));
  a.theta_offsets = from_raw<std::uint64_t>(col("theta_offsets.u64"));
  a.gamma_mask = BitVector::from_words(from_raw<std::uint64_t>(col("gamma_mask.bits")), manifest.at("gamma_mask_bits"));
  a.sigma2 = from_raw<double>(col("sigma2.f64"));
  a.k = from_raw<std::int64_t>(col("rank.i64"));
  a.K_theta = from_raw<double>(col("k_theta.f64"));
  a.K_gamma = from_raw<double>(col("k_gamma.f64"));
  a.theta_accept_rate = from_raw<double>(col("theta_accept.f64"));
  a.gamma_accept_rate = from_raw<double>(col("gamma_accept.f64"));
  const std::string lambda_bytes = col("lambda_snapshots.f64");
  const std::string eta_bytes = col("eta_snapshots.f64");
  std::size_t lo = 0;
  std::size_t eo = 0;
  for (const auto& s : manifest.at("snapshots")) {
    FactorSnapshot f;
    f.sample = s.at("sample");
    const std::int64_t k = s.at("k");
    f.Lambda = matrix_from(lambda_bytes, a.p, k, lo);
    f.Eta = matrix_from(eta_bytes, a.T, k, eo);
    lo += static_cast<std::size_t>(a.p * k) * sizeof(double);
    eo += static_cast<std::size_t>(a.T * k) * sizeof(double);
    a.snapshots.push_back(std::move(f));
  }
  a.factor_sum = matrix_from(col("factor_sum.f64"), a.p, a.T, 0);
  a.factor_sq_sum = matrix_from(col("factor_sq_sum.f64"), a.p, a.T, 0);
  a.fitted_sum = matrix_from(col("fitted_sum.f64"), a.p, a.T, 0);
  if (a.sigma2.size() != a.n_samples * static_cast<std::uint64_t>(a.p) || a.k.size() != a.n_samples ||
      a.theta_offsets.size() != a.n_samples) {
    throw InvalidInput("archive columns disagree with the manifest sample count");
  }
  return a;
}

namespace bin {

void write_atomically(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInput("cannot write " + tmp);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os) throw InvalidInput("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InvalidInput("cannot move " + tmp + " into place: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace bin

}  // namespace rhythm
