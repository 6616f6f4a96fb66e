#pragma once

// Run configuration: one INI document with a section per module, flags layered on top,
// a digest over the merged values, and the per-stage seed split.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pulseprep/baselines.hpp"
#include "pulseprep/control.hpp"
#include "pulseprep/dataset.hpp"
#include "pulseprep/error.hpp"
#include "pulseprep/mlp.hpp"
#include "pulseprep/random.hpp"

namespace pulseprep {

inline constexpr const char* kOutDirEnv = "PULSEPREP_OUT_DIR";

struct RunConfig {
  ControlConfig control;
  DatasetConfig dataset;
  TrainConfig train;
  GrapeConfig grape;
  CrabConfig crab;
  std::string suite = "bloch128";
  std::string pairing = "fixed-initial";
  std::uint64_t suite_seed = 1;
  double histogram_bin = 0.05;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int workers = 1;

  static RunConfig defaults(int qubits) {
    RunConfig c;
    c.set_qubits(qubits);
    return c;
  }

  // Switches every qubit-dependent default (schedule, actions, training, sample count, suite).
  void set_qubits(int qubits) {
    control = ControlConfig::defaults(qubits);
    const TrainConfig t = TrainConfig::defaults(qubits);
    train.batch_size = t.batch_size;
    train.learning_rate = t.learning_rate;
    train.epochs = t.epochs;
    dataset.qubits = qubits;
    dataset.sample_count = DatasetConfig::default_sample_count(qubits);
    dataset.rollout_cap = control.max_steps;
    suite = qubits == 1 ? "bloch128" : "hypersphere256";
  }

  // Per-stage seeds. The data stage uses the global seed itself (its shards already draw from
  // substreams); every other stage gets splitmix64(seed ^ fnv1a64(stage)).
  std::uint64_t stage_seed(std::string_view stage) const {
    return stage == "data" ? seed : derive_seed(seed, stage);
  }

  void sync_seeds() {
    dataset.rng_seed = stage_seed("data");
    train.rng_seed = stage_seed("shuffle");
  }

  void validate() const {
    control.validate();
    dataset.validate();
    train.validate();
    grape.validate();
    crab.validate();
    if (dataset.qubits != control.qubits) throw TaskError("[dataset] qubits differs from [control] qubits");
    if (workers < 1) throw TaskError("worker count must be at least 1");
    if (!(histogram_bin > 0.0 && histogram_bin <= 1.0)) throw TaskError("histogram bin must lie in (0, 1]");
    if (pairing != "fixed-initial" && pairing != "all-ordered-pairs") {
      throw TaskError("pairing must be fixed-initial or all-ordered-pairs");
    }
  }
};

namespace detail {

template <class T>
T get_or(const boost::property_tree::ptree& pt, const std::string& key, T fallback) {
  if (!pt.get_optional<std::string>(key)) return fallback;
  try {
    return pt.get<T>(key);
  } catch (const boost::property_tree::ptree_bad_data&) {
    throw TaskError("config key '" + key + "' has a malformed value");
  }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw TaskError("config key '" + key + "' must be a boolean");
}

}  // namespace detail

// Applies every key present in the tree over cfg. Unknown sections or keys are rejected so typos
// surface instead of being ignored.
inline void apply_config_tree(RunConfig& cfg, const boost::property_tree::ptree& pt) {
  static const std::map<std::string, std::vector<std::string>> known = {
      {"run", {"seed", "out_dir", "workers"}},
      {"control", {"qubits", "total_time", "steps", "threshold", "h", "h1", "h2"}},
      {"dataset", {"samples", "noisy", "channel", "p", "rollout_cap"}},
      {"train", {"batch_size", "learning_rate", "epochs", "validation_fraction"}},
      {"grape", {"iterations", "step_size", "epsilon", "max_halvings"}},
      {"crab", {"basis_size", "frequency_jitter", "max_evaluations", "initial_step"}},
      {"bench", {"suite", "pairing", "suite_seed", "histogram_bin"}},
  };
  for (const auto& [section, body] : pt) {
    auto it = known.find(section);
    if (it == known.end()) throw TaskError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
        throw TaskError("unknown config key '" + section + "." + key + "'");
      }
    }
  }
  // Qubit count first: it resets the dependent defaults that later keys may override.
  if (auto q = pt.get_optional<int>("control.qubits")) cfg.set_qubits(*q);

  using detail::get_or;
  cfg.seed = get_or(pt, "run.seed", cfg.seed);
  cfg.out_dir = get_or(pt, "run.out_dir", cfg.out_dir);
  cfg.workers = get_or(pt, "run.workers", cfg.workers);

  const double total = get_or(pt, "control.total_time", cfg.control.total_time);
  const int steps = get_or(pt, "control.steps", cfg.control.max_steps);
  cfg.control.set_schedule(total, steps);
  cfg.control.fidelity_threshold = get_or(pt, "control.threshold", cfg.control.fidelity_threshold);
  cfg.control.h = get_or(pt, "control.h", cfg.control.h);
  cfg.control.h1 = get_or(pt, "control.h1", cfg.control.h1);
  cfg.control.h2 = get_or(pt, "control.h2", cfg.control.h2);

  cfg.dataset.sample_count = get_or(pt, "dataset.samples", cfg.dataset.sample_count);
  if (auto v = pt.get_optional<std::string>("dataset.noisy")) cfg.dataset.noisy = detail::parse_bool(*v, "dataset.noisy");
  if (auto v = pt.get_optional<std::string>("dataset.channel")) cfg.dataset.channel = parse_channel_kind(*v);
  cfg.dataset.p = get_or(pt, "dataset.p", cfg.dataset.p);
  cfg.dataset.rollout_cap = get_or(pt, "dataset.rollout_cap", cfg.control.max_steps);

  cfg.train.batch_size = get_or(pt, "train.batch_size", cfg.train.batch_size);
  cfg.train.learning_rate = get_or(pt, "train.learning_rate", cfg.train.learning_rate);
  cfg.train.epochs = get_or(pt, "train.epochs", cfg.train.epochs);
  cfg.train.validation_fraction = get_or(pt, "train.validation_fraction", cfg.train.validation_fraction);

  cfg.grape.iterations = get_or(pt, "grape.iterations", cfg.grape.iterations);
  cfg.grape.step_size = get_or(pt, "grape.step_size", cfg.grape.step_size);
  cfg.grape.epsilon = get_or(pt, "grape.epsilon", cfg.grape.epsilon);
  cfg.grape.max_halvings = get_or(pt, "grape.max_halvings", cfg.grape.max_halvings);

  cfg.crab.basis_size = get_or(pt, "crab.basis_size", cfg.crab.basis_size);
  cfg.crab.frequency_jitter = get_or(pt, "crab.frequency_jitter", cfg.crab.frequency_jitter);
  cfg.crab.simplex.max_evaluations = get_or(pt, "crab.max_evaluations", cfg.crab.simplex.max_evaluations);
  cfg.crab.simplex.initial_step = get_or(pt, "crab.initial_step", cfg.crab.simplex.initial_step);

  cfg.suite = get_or(pt, "bench.suite", cfg.suite);
  cfg.pairing = get_or(pt, "bench.pairing", cfg.pairing);
  cfg.suite_seed = get_or(pt, "bench.suite_seed", cfg.suite_seed);
  cfg.histogram_bin = get_or(pt, "bench.histogram_bin", cfg.histogram_bin);
}

inline RunConfig load_run_config(const std::string& path, int qubits = 1) {
  RunConfig cfg = RunConfig::defaults(qubits);
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw TaskError("cannot read config '" + path + "': " + e.message());
  }
  apply_config_tree(cfg, pt);
  return cfg;
}

inline RunConfig parse_run_config(const std::string& text, int qubits = 1) {
  RunConfig cfg = RunConfig::defaults(qubits);
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw TaskError("cannot parse config: " + e.message());
  }
  apply_config_tree(cfg, pt);
  return cfg;
}

// The merged configuration as INI text; stable key order, round-trip precision.
inline std::string canonical_config(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "[run]\nseed=" << c.seed << "\n\n";
  os << "[control]\nqubits=" << c.control.qubits << "\ntotal_time=" << format_double(c.control.total_time)
     << "\nsteps=" << c.control.max_steps << "\nthreshold=" << format_double(c.control.fidelity_threshold)
     << "\nh=" << format_double(c.control.h) << "\nh1=" << format_double(c.control.h1)
     << "\nh2=" << format_double(c.control.h2) << "\n\n";
  os << "[dataset]\nsamples=" << c.dataset.sample_count << "\nnoisy=" << (c.dataset.noisy ? "true" : "false")
     << "\nchannel=" << to_string(c.dataset.channel) << "\np=" << format_double(c.dataset.p)
     << "\nrollout_cap=" << c.dataset.rollout_cap << "\n\n";
  os << "[train]\nbatch_size=" << c.train.batch_size << "\nlearning_rate=" << format_double(c.train.learning_rate)
     << "\nepochs=" << c.train.epochs << "\nvalidation_fraction=" << format_double(c.train.validation_fraction)
     << "\n\n";
  os << "[grape]\niterations=" << c.grape.iterations << "\nstep_size=" << format_double(c.grape.step_size)
     << "\nepsilon=" << format_double(c.grape.epsilon) << "\nmax_halvings=" << c.grape.max_halvings << "\n\n";
  os << "[crab]\nbasis_size=" << c.crab.basis_size << "\nfrequency_jitter=" << format_double(c.crab.frequency_jitter)
     << "\nmax_evaluations=" << c.crab.simplex.max_evaluations
     << "\ninitial_step=" << format_double(c.crab.simplex.initial_step) << "\n\n";
  os << "[bench]\nsuite=" << c.suite << "\npairing=" << c.pairing << "\nsuite_seed=" << c.suite_seed
     << "\nhistogram_bin=" << format_double(c.histogram_bin) << '\n';
  return os.str();
}

// Output directory and worker count do not change results, so they stay out of the digest.
inline std::string config_digest(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_config(c))));
  return buf;
}

// Precedence: config file, then the environment variable, then an explicit flag.
inline std::filesystem::path resolve_out_dir(const RunConfig& c, const std::string& flag_value = {}) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return c.out_dir;
}

}  // namespace pulseprep
