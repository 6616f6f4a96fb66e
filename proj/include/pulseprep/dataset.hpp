#pragma once

// Supervised data for the policy network: greedy one-step labels on rollouts from
// random (initial, target) pairs, with local optima excluded. Also the fixed
// evaluation suites and the on-disk dataset format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "pulseprep/control.hpp"
#include "pulseprep/quantum.hpp"
#include "pulseprep/random.hpp"

namespace pulseprep {

enum class Encoding { Pure, Density };

inline std::string_view to_string(Encoding e) { return e == Encoding::Pure ? "pure-v1" : "density-v1"; }

inline Encoding parse_encoding(std::string_view s) {
  if (s == "pure-v1") return Encoding::Pure;
  if (s == "density-v1") return Encoding::Density;
  throw FormatError("unknown encoding '" + std::string(s) + "'");
}

inline int feature_size(Encoding e, int dim) { return e == Encoding::Pure ? 4 * dim : 2 * dim * dim + 2 * dim; }

namespace detail {

inline void append_amplitudes(std::vector<double>& out, const PureState& s) {
  for (int i = 0; i < s.dim(); ++i) {
    out.push_back(s[i].real());
    out.push_back(s[i].imag());
  }
}

}  // namespace detail

// (Re, Im) per amplitude of the phase-fixed current state, then of the phase-fixed target.
inline std::vector<double> encode_pure_pair(const PureState& current, const PureState& target) {
  require_same_dim(current.dim(), target.dim(), "encode_pure_pair");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(4 * current.dim()));
  detail::append_amplitudes(out, phase_fix(current));
  detail::append_amplitudes(out, phase_fix(target));
  return out;
}

// (Re, Im) of every entry of rho in row-major order, then the phase-fixed target.
inline std::vector<double> encode_density_pair(const DensityMatrix& rho, const PureState& target) {
  require_same_dim(rho.dim(), target.dim(), "encode_density_pair");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(feature_size(Encoding::Density, rho.dim())));
  for (int i = 0; i < rho.dim(); ++i) {
    for (int j = 0; j < rho.dim(); ++j) {
      out.push_back(rho(i, j).real());
      out.push_back(rho(i, j).imag());
    }
  }
  detail::append_amplitudes(out, phase_fix(target));
  return out;
}

struct OracleChoice {
  int action = 0;
  double next_fidelity = 0.0;
};

// Exhaustive one-step search; ties go to the lowest index.
inline OracleChoice best_action_oracle(const PureState& current, const PureState& target, const ActionSet& aset,
                                       const ControlConfig& cfg) {
  require_same_dim(current.dim(), target.dim(), "best_action_oracle");
  OracleChoice best{0, -1.0};
  for (int a = 0; a < aset.size(); ++a) {
    const double f = fidelity(step_pure(current, a, aset, cfg), target);
    if (f > best.next_fidelity) best = {a, f};
  }
  return best;
}

// Density-matrix variant: each candidate is evolved for dt and then passed through the channel.
inline OracleChoice best_action_oracle(const DensityMatrix& current, const PureState& target, const ActionSet& aset,
                                       const ControlConfig& cfg, const NoiseModel* noise) {
  require_same_dim(current.dim(), target.dim(), "best_action_oracle");
  OracleChoice best{0, -1.0};
  for (int a = 0; a < aset.size(); ++a) {
    const double f = fidelity_mixed(step_density(current, a, aset, cfg, noise), target);
    if (f > best.next_fidelity) best = {a, f};
  }
  return best;
}

// True when no action strictly improves on the current fidelity.
inline bool is_local_optimum(const PureState& current, const PureState& target, const ActionSet& aset,
                             const ControlConfig& cfg) {
  return best_action_oracle(current, target, aset, cfg).next_fidelity <= fidelity(current, target);
}

inline bool is_local_optimum(const DensityMatrix& current, const PureState& target, const ActionSet& aset,
                             const ControlConfig& cfg, const NoiseModel* noise) {
  return best_action_oracle(current, target, aset, cfg, noise).next_fidelity <= fidelity_mixed(current, target);
}

// Normalized vector of d standard complex Gaussians.
inline PureState sample_haar_state(int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CVector v(dim);
  for (int i = 0; i < dim; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = Complex(re, im);
  }
  return PureState::normalized(v);
}

struct Sample {
  std::vector<double> features;
  int label = 0;
  double fidelity_before = 0.0;
  double fidelity_after = 0.0;

  bool operator==(const Sample&) const = default;
};

struct DatasetConfig {
  int qubits = 1;
  std::size_t sample_count = 200000;
  std::uint64_t rng_seed = 0;
  bool noisy = false;
  ChannelKind channel = ChannelKind::BitFlip;
  double p = 0.0;
  int rollout_cap = 20;
  // Shards with fixed substreams; the output depends on this count but not on scheduling.
  int workers = 1;

  static std::size_t default_sample_count(int qubits) { return qubits == 1 ? 200000 : 500000; }

  void validate() const {
    if (qubits != 1 && qubits != 2) throw TaskError("dataset qubit count must be 1 or 2");
    if (sample_count == 0) throw TaskError("dataset sample_count must be positive");
    if (rollout_cap < 1) throw TaskError("rollout cap must be positive");
    if (workers < 1) throw TaskError("worker count must be positive");
    if (noisy && !(p >= 0.0 && p <= 1.0)) throw TaskError("channel parameter p must lie in [0, 1]");
  }
};

struct DatasetHeader {
  int qubits = 1;
  std::string action_set;
  double dt = 0.0;
  Encoding encoding = Encoding::Pure;
  std::uint64_t seed = 0;
  bool noisy = false;
  ChannelKind channel = ChannelKind::BitFlip;
  double p = 0.0;
  int features = 0;

  bool operator==(const DatasetHeader&) const = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset&) const = default;

  std::vector<std::size_t> label_histogram(int action_count) const {
    std::vector<std::size_t> hist(static_cast<std::size_t>(action_count), 0);
    for (const auto& s : samples) ++hist.at(static_cast<std::size_t>(s.label));
    return hist;
  }
};

namespace detail {

inline void generate_pure_shard(std::size_t count, std::uint64_t seed, const DatasetConfig& dc,
                                const ControlConfig& cfg, const ActionSet& aset, std::vector<Sample>& out) {
  Rng rng(seed);
  const int d = cfg.dim();
  while (out.size() < count) {
    PureState state = sample_haar_state(d, rng);
    const PureState target = sample_haar_state(d, rng);
    double f = fidelity(state, target);
    for (int step = 0; step < dc.rollout_cap && out.size() < count; ++step) {
      if (f > cfg.fidelity_threshold) break;
      const OracleChoice best = best_action_oracle(state, target, aset, cfg);
      if (best.next_fidelity <= f) break;
      out.push_back({encode_pure_pair(state, target), best.action, f, best.next_fidelity});
      state = step_pure(state, best.action, aset, cfg);
      f = fidelity(state, target);
    }
  }
}

inline void generate_density_shard(std::size_t count, std::uint64_t seed, const DatasetConfig& dc,
                                   const ControlConfig& cfg, const ActionSet& aset, std::vector<Sample>& out) {
  Rng rng(seed);
  const int d = cfg.dim();
  const NoiseModel noise = make_noise(dc.channel, dc.p, dc.qubits);
  while (out.size() < count) {
    DensityMatrix rho = DensityMatrix::from_pure(sample_haar_state(d, rng));
    const PureState target = sample_haar_state(d, rng);
    double f = fidelity_mixed(rho, target);
    for (int step = 0; step < dc.rollout_cap && out.size() < count; ++step) {
      if (f > cfg.fidelity_threshold) break;
      const OracleChoice best = best_action_oracle(rho, target, aset, cfg, &noise);
      if (best.next_fidelity <= f) break;
      out.push_back({encode_density_pair(rho, target), best.action, f, best.next_fidelity});
      rho = step_density(rho, best.action, aset, cfg, &noise);
      f = fidelity_mixed(rho, target);
    }
  }
}

}  // namespace detail

inline DatasetHeader make_dataset_header(const DatasetConfig& dc, const ControlConfig& cfg, const ActionSet& aset) {
  DatasetHeader h;
  h.qubits = dc.qubits;
  h.action_set = aset.id();
  h.dt = cfg.dt;
  h.encoding = dc.noisy ? Encoding::Density : Encoding::Pure;
  h.seed = dc.rng_seed;
  h.noisy = dc.noisy;
  h.channel = dc.channel;
  h.p = dc.noisy ? dc.p : 0.0;
  h.features = feature_size(h.encoding, cfg.dim());
  return h;
}

// Rollouts from Haar-random pairs labelled by the one-step oracle. A rollout stops at the
// threshold, at the rollout cap or at the first local optimum, so every sample strictly
// improves fidelity. Shard i draws from substream_seed(seed, i) and shards are concatenated
// in index order.
inline Dataset generate_dataset(const DatasetConfig& dc, const ControlConfig& cfg, const ActionSet& aset) {
  dc.validate();
  cfg.validate();
  if (dc.qubits != cfg.qubits || aset.qubits() != cfg.qubits) {
    throw MismatchError("dataset, control config and action set disagree on qubit count");
  }
  const auto shards = static_cast<std::size_t>(dc.workers);
  std::vector<std::vector<Sample>> parts(shards);
  auto run = [&](std::size_t i) {
    const std::size_t quota = dc.sample_count / shards + (i < dc.sample_count % shards ? 1 : 0);
    parts[i].reserve(quota);
    const std::uint64_t seed = substream_seed(dc.rng_seed, i);
    if (dc.noisy) {
      detail::generate_density_shard(quota, seed, dc, cfg, aset, parts[i]);
    } else {
      detail::generate_pure_shard(quota, seed, dc, cfg, aset, parts[i]);
    }
  };
  if (shards == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < shards; ++i) threads.emplace_back(run, i);
  }
  Dataset ds{make_dataset_header(dc, cfg, aset), {}};
  ds.samples.reserve(dc.sample_count);
  for (auto& part : parts) {
    for (auto& s : part) ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Recover the states encoded in a pure-encoding feature vector.
inline std::pair<PureState, PureState> decode_pure_pair(const std::vector<double>& features) {
  if (features.size() != 8 && features.size() != 16) throw FormatError("pure feature vector has wrong length");
  const int d = static_cast<int>(features.size() / 4);
  CVector cur(d), tar(d);
  for (int i = 0; i < d; ++i) {
    cur(i) = Complex(features[2 * i], features[2 * i + 1]);
    tar(i) = Complex(features[2 * d + 2 * i], features[2 * d + 2 * i + 1]);
  }
  return {PureState::normalized(cur), PureState::normalized(tar)};
}

inline std::pair<DensityMatrix, PureState> decode_density_pair(const std::vector<double>& features) {
  int d = 0;
  if (features.size() == static_cast<std::size_t>(feature_size(Encoding::Density, 2))) d = 2;
  if (features.size() == static_cast<std::size_t>(feature_size(Encoding::Density, 4))) d = 4;
  if (d == 0) throw FormatError("density feature vector has wrong length");
  CMatrix rho(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const std::size_t k = static_cast<std::size_t>(2 * (i * d + j));
      rho(i, j) = Complex(features[k], features[k + 1]);
    }
  }
  CVector tar(d);
  const std::size_t off = static_cast<std::size_t>(2 * d * d);
  for (int i = 0; i < d; ++i) tar(i) = Complex(features[off + 2 * i], features[off + 2 * i + 1]);
  return {DensityMatrix(rho), PureState::normalized(tar)};
}

// ---------------------------------------------------------------------------
// Evaluation suites

struct TestSuite {
  std::string description;
  std::uint64_t rng_seed = 0;
  std::vector<PureState> states;

  std::size_t size() const { return states.size(); }
  int dim() const { return states.empty() ? 0 : states.front().dim(); }
};

inline PureState bloch_state(double theta, double phi) {
  CVector v(2);
  v << std::cos(theta / 2.0), std::polar(1.0, phi) * std::sin(theta / 2.0);
  return PureState::normalized(v);
}

// 8 polar rings at (j + 1/2) pi / 8 times 16 azimuths k pi / 8.
inline TestSuite bloch_grid_128() {
  TestSuite suite{"bloch128", 0, {}};
  for (int j = 0; j < 8; ++j) {
    const double theta = (j + 0.5) * std::numbers::pi / 8.0;
    for (int k = 0; k < 16; ++k) suite.states.push_back(bloch_state(theta, k * std::numbers::pi / 8.0));
  }
  return suite;
}

// Amplitudes on the unit 3-sphere from three angles.
inline std::array<double, 4> hypersphere_point(double t1, double t2, double t3) {
  return {std::cos(t1), std::sin(t1) * std::cos(t2), std::sin(t1) * std::sin(t2) * std::cos(t3),
          std::sin(t1) * std::sin(t2) * std::sin(t3)};
}

// All 27 angle combinations from {pi/8, pi/4, 3pi/8}, each component given a phase from
// {0, pi/2, pi, 3pi/2} with the first component's phase fixed at 0 (1728 candidates).
inline std::vector<PureState> hypersphere_candidates() {
  const double angles[3] = {std::numbers::pi / 8.0, std::numbers::pi / 4.0, 3.0 * std::numbers::pi / 8.0};
  const Complex phases[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  std::vector<PureState> out;
  for (double t1 : angles) {
    for (double t2 : angles) {
      for (double t3 : angles) {
        const auto c = hypersphere_point(t1, t2, t3);
        for (int p2 = 0; p2 < 4; ++p2) {
          for (int p3 = 0; p3 < 4; ++p3) {
            for (int p4 = 0; p4 < 4; ++p4) {
              CVector v(4);
              v << c[0], phases[p2] * c[1], phases[p3] * c[2], phases[p4] * c[3];
              out.push_back(PureState::normalized(v));
            }
          }
        }
      }
    }
  }
  return out;
}

inline TestSuite hypersphere_testset_256(std::uint64_t seed, std::size_t count = 256) {
  std::vector<PureState> pool = hypersphere_candidates();
  if (count > pool.size()) throw TaskError("hypersphere test set larger than the candidate pool");
  Rng rng(seed);
  // Partial Fisher-Yates: the first `count` entries become a uniform sample without replacement.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(count), pool.end());
  return TestSuite{"hypersphere" + std::to_string(count), seed, std::move(pool)};
}

inline TestSuite suite_by_name(std::string_view name, std::uint64_t seed) {
  if (name == "bloch128") return bloch_grid_128();
  if (name == "hypersphere256") return hypersphere_testset_256(seed);
  throw TaskError("unknown suite '" + std::string(name) + "' (expected bloch128 or hypersphere256)");
}

// One state per line: "index re0 im0 re1 im1 ...".
inline void write_suite_table(std::ostream& os, const TestSuite& suite) {
  os << "# suite " << suite.description << " seed " << suite.rng_seed << " count " << suite.size() << '\n';
  os << "index";
  for (int i = 0; i < suite.dim(); ++i) os << " re" << i << " im" << i;
  os << '\n';
  os.precision(17);
  for (std::size_t k = 0; k < suite.size(); ++k) {
    os << k;
    for (int i = 0; i < suite.dim(); ++i) os << ' ' << suite.states[k][i].real() << ' ' << suite.states[k][i].imag();
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dataset file: one plain-text header line followed by length-prefixed binary records
// (uint32 byte count, then int32 label, f64 fidelity_before, f64 fidelity_after, f64 features[]).
// Integers and doubles are stored in host (little-endian) byte order.

inline constexpr std::string_view kDatasetMagic = "pulseprep-dataset";
inline constexpr int kDatasetVersion = 1;

namespace detail {

inline std::map<std::string, std::string> parse_header_fields(const std::string& line, std::string_view magic) {
  std::istringstream is(line);
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != magic) throw FormatError("not a " + std::string(magic) + " file");
  if (version != kDatasetVersion) throw FormatError("unsupported " + std::string(magic) + " version");
  std::map<std::string, std::string> fields;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header token '" + tok + "'");
    fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return fields;
}

inline const std::string& require_field(const std::map<std::string, std::string>& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end()) throw FormatError("header is missing '" + key + "'");
  return it->second;
}

template <class T>
void put(std::string& buf, const T& v) {
  const auto* bytes = reinterpret_cast<const char*>(&v);
  buf.append(bytes, sizeof(T));
}

template <class T>
T get(const char*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::string dataset_header_line(const DatasetHeader& h, std::size_t count, std::string_view digest = {}) {
  std::ostringstream os;
  os << kDatasetMagic << ' ' << kDatasetVersion << " qubits=" << h.qubits << " actions=" << h.action_set
     << " dt=" << detail::format_double(h.dt) << " encoding=" << to_string(h.encoding) << " seed=" << h.seed
     << " noisy=" << (h.noisy ? 1 : 0) << " channel=" << (h.noisy ? to_string(h.channel) : "none")
     << " p=" << detail::format_double(h.p) << " features=" << h.features << " count=" << count;
  if (!digest.empty()) os << " config_digest=" << digest;
  return os.str();
}

inline void save_dataset(const std::string& path, const Dataset& ds, std::string_view digest = {}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << dataset_header_line(ds.header, ds.size(), digest) << '\n';
  std::string buf;
  for (const auto& s : ds.samples) {
    if (static_cast<int>(s.features.size()) != ds.header.features) {
      throw FormatError("sample feature length disagrees with the dataset header");
    }
    buf.clear();
    const auto payload = static_cast<std::uint32_t>(sizeof(std::int32_t) + sizeof(double) * (2 + s.features.size()));
    detail::put(buf, payload);
    detail::put(buf, static_cast<std::int32_t>(s.label));
    detail::put(buf, s.fidelity_before);
    detail::put(buf, s.fidelity_after);
    for (double f : s.features) detail::put(buf, f);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw FormatError("write to '" + path + "' failed");
}

inline Dataset load_dataset(const std::string& path, int action_count = -1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset '" + path + "' is empty");
  const auto fields = detail::parse_header_fields(line, kDatasetMagic);
  Dataset ds;
  DatasetHeader& h = ds.header;
  std::size_t count = 0;
  try {
    h.qubits = std::stoi(detail::require_field(fields, "qubits"));
    h.action_set = detail::require_field(fields, "actions");
    h.dt = std::stod(detail::require_field(fields, "dt"));
    h.encoding = parse_encoding(detail::require_field(fields, "encoding"));
    h.seed = std::stoull(detail::require_field(fields, "seed"));
    h.noisy = detail::require_field(fields, "noisy") == "1";
    if (h.noisy) h.channel = parse_channel_kind(detail::require_field(fields, "channel"));
    h.p = std::stod(detail::require_field(fields, "p"));
    h.features = std::stoi(detail::require_field(fields, "features"));
    count = std::stoull(detail::require_field(fields, "count"));
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  if (h.qubits != 1 && h.qubits != 2) throw FormatError("dataset header has invalid qubit count");
  if (h.features != feature_size(h.encoding, h.qubits == 1 ? 2 : 4)) {
    throw FormatError("dataset header feature length disagrees with its encoding");
  }
  const std::uint32_t expected =
      static_cast<std::uint32_t>(sizeof(std::int32_t) + sizeof(double) * (2 + static_cast<std::size_t>(h.features)));
  ds.samples.reserve(count);
  std::string payload;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof len)) {
      throw FormatError("dataset record " + std::to_string(i) + ": truncated file");
    }
    if (len != expected) throw FormatError("dataset record " + std::to_string(i) + ": bad record length");
    payload.resize(len);
    if (!in.read(payload.data(), len)) throw FormatError("dataset record " + std::to_string(i) + ": truncated record");
    const char* p = payload.data();
    Sample s;
    s.label = detail::get<std::int32_t>(p);
    s.fidelity_before = detail::get<double>(p);
    s.fidelity_after = detail::get<double>(p);
    s.features.resize(static_cast<std::size_t>(h.features));
    for (auto& f : s.features) f = detail::get<double>(p);
    const bool finite = std::all_of(s.features.begin(), s.features.end(), [](double v) { return std::isfinite(v); });
    if (s.label < 0 || (action_count > 0 && s.label >= action_count) || !finite ||
        !(s.fidelity_after > s.fidelity_before)) {
      throw FormatError("dataset record " + std::to_string(i) + ": invalid contents");
    }
    ds.samples.push_back(std::move(s));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("dataset has trailing bytes after the last record");
  return ds;
}

// Rejects a dataset whose header does not match the expected system.
inline void check_dataset_matches(const DatasetHeader& h, int qubits, const ActionSet& aset) {
  if (h.qubits != qubits) {
    throw MismatchError("dataset is for " + std::to_string(h.qubits) + " qubit(s), expected " +
                        std::to_string(qubits));
  }
  if (h.action_set != aset.id()) throw MismatchError("dataset action set '" + h.action_set + "' differs from '" +
                                                     aset.id() + "'");
}

}  // namespace pulseprep
