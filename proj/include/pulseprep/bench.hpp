#pragma once

// Method x suite experiments: per-task records, means, histograms, noise sweeps and
// Bloch-sphere trajectories.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pulseprep/baselines.hpp"
#include "pulseprep/dataset.hpp"
#include "pulseprep/mlp.hpp"
#include "pulseprep/policy.hpp"
#include "pulseprep/random.hpp"

namespace pulseprep {

// A pulse designer: (init, target, per-task seed) -> result.
struct Method {
  std::string id;
  std::function<PrepResult(const PureState&, const PureState&, std::uint64_t)> design;
};

inline Method sp_method(const MlpModel& model, const ActionSet& aset, const ControlConfig& cfg) {
  return {"sp", [&model, aset, cfg](const PureState& a, const PureState& b, std::uint64_t) {
            return prepare(model, a, b, aset, cfg);
          }};
}

inline Method greedy_method(const ActionSet& aset, const ControlConfig& cfg) {
  return {"ga", [aset, cfg](const PureState& a, const PureState& b, std::uint64_t) {
            return greedy_prepare(a, b, aset, cfg);
          }};
}

inline Method revised_greedy_method(const ActionSet& aset, const ControlConfig& cfg) {
  return {"rg", [aset, cfg](const PureState& a, const PureState& b, std::uint64_t seed) {
            Rng rng(seed);
            return revised_greedy_prepare(a, b, aset, cfg, rng);
          }};
}

inline Method grape_method(const ActionSet& aset, const ControlConfig& cfg, const GrapeConfig& gcfg) {
  return {"grape", [aset, cfg, gcfg](const PureState& a, const PureState& b, std::uint64_t) {
            return grape_prepare(a, b, aset, cfg, gcfg);
          }};
}

inline Method crab_method(const ActionSet& aset, const ControlConfig& cfg, CrabConfig ccfg) {
  return {"crab", [aset, cfg, ccfg](const PureState& a, const PureState& b, std::uint64_t seed) {
            CrabConfig c = ccfg;
            c.rng_seed = seed;
            return crab_prepare(a, b, aset, cfg, c);
          }};
}

enum class PairingMode { FixedInitial, AllOrderedPairs };

struct Pairing {
  PairingMode mode = PairingMode::FixedInitial;
  std::optional<PureState> initial;
  std::string initial_id = "0";

  static Pairing fixed(PureState s, std::string id = "0") {
    return {PairingMode::FixedInitial, std::move(s), std::move(id)};
  }
  static Pairing all_pairs() { return {PairingMode::AllOrderedPairs, std::nullopt, ""}; }

  std::string name() const { return mode == PairingMode::FixedInitial ? "fixed-initial" : "all-ordered-pairs"; }
};

struct Task {
  std::string init_id;
  std::string target_id;
  PureState init;
  PureState target;
};

// Fixed initial: one task per suite member as target. All ordered pairs: every (i, j), i != j,
// in row-major order.
inline std::vector<Task> make_tasks(const TestSuite& suite, const Pairing& pairing) {
  std::vector<Task> tasks;
  if (pairing.mode == PairingMode::FixedInitial) {
    if (!pairing.initial) throw TaskError("fixed-initial pairing needs an initial state");
    require_same_dim(pairing.initial->dim(), suite.dim(), "fixed-initial pairing");
    for (std::size_t j = 0; j < suite.size(); ++j) {
      tasks.push_back({pairing.initial_id, std::to_string(j), *pairing.initial, suite.states[j]});
    }
  } else {
    for (std::size_t i = 0; i < suite.size(); ++i) {
      for (std::size_t j = 0; j < suite.size(); ++j) {
        if (i != j) tasks.push_back({std::to_string(i), std::to_string(j), suite.states[i], suite.states[j]});
      }
    }
  }
  return tasks;
}

struct TaskRecord {
  std::string method;
  std::string init_id;
  std::string target_id;
  double f_max = 0.0;
  int steps_used = 0;
  double design_time = 0.0;
};

struct BenchReport {
  std::string method;
  std::string suite;
  std::string pairing;
  std::uint64_t seed = 0;
  std::vector<TaskRecord> records;
  double mean_fidelity = 0.0;
  double mean_design_time = 0.0;
  std::string environment;

  void recompute_means() {
    double f = 0.0, t = 0.0;
    for (const auto& r : records) {
      f += r.f_max;
      t += r.design_time;
    }
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    mean_fidelity = f / n;
    mean_design_time = t / n;
  }

  std::vector<double> fidelities() const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.f_max);
    return v;
  }
};

// Compiler, CPU model and thread count; timings are only comparable within one descriptor.
inline std::string environment_descriptor() {
  std::string cpu = "unknown-cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      cpu = line.substr(line.find(':') + 2);
      break;
    }
  }
  std::string compiler =
#if defined(__clang__)
      "clang " __clang_version__;
#elif defined(__GNUC__)
      "gcc " __VERSION__;
#else
      "unknown-compiler";
#endif
  return cpu + "; " + compiler + "; threads=" + std::to_string(std::thread::hardware_concurrency());
}

namespace detail {

// Runs fn(i) for i in [0, n). With one worker (or when timing) tasks run serially in order.
inline void for_each_task(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace detail

struct RunOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  // Timed runs are forced serial so concurrent tasks do not inflate design times.
  bool timing = true;
};

// Runs the method on every task of the suite under the pairing. Task i gets the seed
// substream_seed(seed, i) and the wall-clock time of its design call.
inline BenchReport run_suite(const Method& method, const TestSuite& suite, const Pairing& pairing,
                             const ControlConfig& cfg, const RunOptions& opt = {}) {
  if (suite.dim() != cfg.dim()) {
    throw MismatchError("suite '" + suite.description + "' has dimension " + std::to_string(suite.dim()) +
                        " but the control system has dimension " + std::to_string(cfg.dim()));
  }
  const std::vector<Task> tasks = make_tasks(suite, pairing);
  BenchReport rep;
  rep.method = method.id;
  rep.suite = suite.description;
  rep.pairing = pairing.name();
  rep.seed = opt.seed;
  rep.environment = environment_descriptor();
  rep.records.resize(tasks.size());
  detail::for_each_task(tasks.size(), opt.timing ? 1 : opt.workers, [&](std::size_t i) {
    const Task& t = tasks[i];
    const auto start = std::chrono::steady_clock::now();
    const PrepResult r = method.design(t.init, t.target, substream_seed(opt.seed, i));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rep.records[i] = {method.id, t.init_id, t.target_id, r.f_max, r.steps_used, elapsed};
  });
  rep.recompute_means();
  return rep;
}

inline void write_report_table(std::ostream& os, const BenchReport& rep) {
  os.precision(12);
  os << "method,init,target,f_max,steps_used,design_time\n";
  for (const auto& r : rep.records) {
    os << r.method << ',' << r.init_id << ',' << r.target_id << ',' << r.f_max << ',' << r.steps_used << ','
       << r.design_time << '\n';
  }
}

inline nlohmann::json report_summary(const BenchReport& rep, std::string_view digest = {}) {
  nlohmann::json j;
  j["method"] = rep.method;
  j["suite"] = rep.suite;
  j["pairing"] = rep.pairing;
  j["tasks"] = rep.records.size();
  j["mean_fidelity"] = rep.mean_fidelity;
  j["mean_design_time"] = rep.mean_design_time;
  j["seed"] = rep.seed;
  j["environment"] = rep.environment;
  if (!digest.empty()) j["config_digest"] = digest;
  return j;
}

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

// Equal-width bins over [0, 1]; a fidelity of exactly 1 falls in the top bin.
inline std::vector<HistogramBin> frequency_histogram(std::span<const double> fidelities, double bin_width = 0.05) {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw TaskError("histogram bin width must lie in (0, 1]");
  const auto bins = static_cast<std::size_t>(std::llround(std::ceil(1.0 / bin_width - 1e-9)));
  std::vector<HistogramBin> h(bins);
  for (std::size_t b = 0; b < bins; ++b) h[b] = {b * bin_width, std::min(1.0, (b + 1) * bin_width), 0};
  for (double f : fidelities) {
    auto b = static_cast<std::size_t>(std::clamp(f, 0.0, 1.0) / bin_width);
    ++h[std::min(b, bins - 1)].count;
  }
  return h;
}

inline std::vector<HistogramBin> frequency_histogram(const BenchReport& rep, double bin_width = 0.05) {
  const auto f = rep.fidelities();
  return frequency_histogram(std::span<const double>(f), bin_width);
}

inline void write_histogram(std::ostream& os, const std::vector<HistogramBin>& h, std::string_view method = "") {
  os << "method,lower,upper,count\n";
  for (const auto& b : h) os << method << ',' << b.lower << ',' << b.upper << ',' << b.count << '\n';
}

// ---------------------------------------------------------------------------
// Noise sweeps

enum class NoiseMode { IdealPulsesReplayed, NoiseTrainedModel };

inline std::string_view to_string(NoiseMode m) {
  return m == NoiseMode::IdealPulsesReplayed ? "ideal-replayed" : "noise-trained";
}

struct SweepPoint {
  double p = 0.0;
  double mean_fidelity = 0.0;
  std::vector<double> fidelities;
};

struct SweepReport {
  NoiseMode mode = NoiseMode::IdealPulsesReplayed;
  ChannelKind channel = ChannelKind::BitFlip;
  std::vector<SweepPoint> points;
};

// Supplies the model used at a given channel parameter (one shared model, or one per p).
using ModelForP = std::function<const MlpModel&(double)>;

// Ideal mode: each task's pulse sequence is designed once by the pure-state policy and replayed
// through the channel at every p. Noise-trained mode: the density-encoded model designs under
// the channel at every p.
inline SweepReport noise_sweep(NoiseMode mode, ChannelKind kind, std::span<const double> p_values,
                               const std::vector<Task>& tasks, const ModelForP& model_for, const ActionSet& aset,
                               const ControlConfig& cfg) {
  SweepReport rep{mode, kind, {}};
  std::vector<std::vector<int>> ideal;
  if (mode == NoiseMode::IdealPulsesReplayed) {
    const MlpModel& model = model_for(0.0);
    for (const auto& t : tasks) ideal.push_back(prepare(model, t.init, t.target, aset, cfg).pulse_sequence());
  }
  for (double p : p_values) {
    const NoiseModel noise = make_noise(kind, p, cfg.qubits);
    SweepPoint pt{p, 0.0, {}};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const DensityMatrix rho = DensityMatrix::from_pure(tasks[i].init);
      const PrepResult r = mode == NoiseMode::IdealPulsesReplayed
                               ? replay_noisy(ideal[i], rho, tasks[i].target, aset, cfg, noise)
                               : prepare_noisy(model_for(p), rho, tasks[i].target, aset, cfg, noise);
      pt.fidelities.push_back(r.f_max);
    }
    pt.mean_fidelity = std::accumulate(pt.fidelities.begin(), pt.fidelities.end(), 0.0) /
                       static_cast<double>(std::max<std::size_t>(1, pt.fidelities.size()));
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

inline void write_sweep_table(std::ostream& os, const SweepReport& rep) {
  os.precision(12);
  os << "mode,channel,p,mean_fidelity,tasks\n";
  for (const auto& pt : rep.points) {
    os << to_string(rep.mode) << ',' << to_string(rep.channel) << ',' << pt.p << ',' << pt.mean_fidelity << ','
       << pt.fidelities.size() << '\n';
  }
}

// "start:stop:step" (inclusive of stop within half a step) or a comma-separated list.
inline std::vector<double> parse_p_range(std::string_view spec) {
  std::vector<double> out;
  const std::string s(spec);
  try {
    if (s.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::istringstream is(s);
      for (std::string tok; std::getline(is, tok, ':');) parts.push_back(std::stod(tok));
      if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) throw TaskError("bad range");
      const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 0.5));
      for (long k = 0; k <= n; ++k) out.push_back(parts[0] + static_cast<double>(k) * parts[2]);
    } else {
      std::istringstream is(s);
      for (std::string tok; std::getline(is, tok, ',');) out.push_back(std::stod(tok));
    }
  } catch (const std::logic_error&) {
    throw TaskError("cannot parse p values '" + s + "' (use start:stop:step or a comma-separated list)");
  }
  for (double p : out) {
    if (!(p >= 0.0 && p <= 1.0)) throw TaskError("p values must lie in [0, 1]");
  }
  if (out.empty()) throw TaskError("no p values given");
  return out;
}

// ---------------------------------------------------------------------------
// Bloch trajectories

// Replays the designed pulse sequence from the initial state, one row per step; row 0 is the
// initial state. With a noise model, coordinates come from the density matrix.
inline std::vector<BlochVector> trajectory_export(const PrepResult& result, const PureState& init,
                                                  const ActionSet& aset, const ControlConfig& cfg,
                                                  const NoiseModel* noise = nullptr) {
  if (init.dim() != 2) throw TaskError("trajectories are exported for single-qubit tasks only");
  std::vector<BlochVector> rows;
  const std::vector<int> pulses = result.pulse_sequence();
  if (noise == nullptr || noise->empty()) {
    PureState s = init;
    rows.push_back(bloch_coordinates(s));
    for (int a : pulses) {
      s = step_pure(s, a, aset, cfg);
      rows.push_back(bloch_coordinates(s));
    }
  } else {
    DensityMatrix rho = DensityMatrix::from_pure(init);
    rows.push_back(bloch_coordinates(rho));
    for (int a : pulses) {
      rho = step_density(rho, a, aset, cfg, noise);
      rows.push_back(bloch_coordinates(rho));
    }
  }
  return rows;
}

inline void write_trajectory(std::ostream& os, const std::vector<BlochVector>& rows) {
  os.precision(12);
  os << "x,y,z\n";
  for (const auto& r : rows) os << r.x << ',' << r.y << ',' << r.z << '\n';
}

}  // namespace pulseprep
