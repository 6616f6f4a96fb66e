// pulseprep: dataset generation, training, evaluation, benchmarks, noise sweeps and
// trajectory export for singlet-triplet qubit state preparation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pulseprep/baselines.hpp"
#include "pulseprep/bench.hpp"
#include "pulseprep/config.hpp"
#include "pulseprep/dataset.hpp"
#include "pulseprep/mlp.hpp"
#include "pulseprep/policy.hpp"

namespace fs = std::filesystem;
using namespace pulseprep;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitMismatch = 2;
constexpr int kExitRuntime = 3;

const std::vector<std::string> kMethodNames = {"sp", "ga", "rg", "grape", "crab"};

struct CommonFlags {
  std::string config;
  std::optional<int> qubits;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--qubits", f.qubits, "number of qubits (1 or 2)")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--seed", f.seed, "global seed");
  cmd->add_option("--out", f.out, "output directory (overrides config and $PULSEPREP_OUT_DIR)");
  cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
}

// Defaults for the qubit count, then the config file, then flags.
RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig::defaults(f.qubits.value_or(1))
                                   : load_run_config(f.config, f.qubits.value_or(1));
  if (f.qubits && *f.qubits != cfg.control.qubits) cfg.set_qubits(*f.qubits);
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  cfg.out_dir = resolve_out_dir(cfg, f.out).string();
  cfg.sync_seeds();
  return cfg;
}

fs::path output_path(const RunConfig& cfg, const std::string& explicit_path, const std::string& fallback) {
  fs::path p = explicit_path.empty() ? fs::path(cfg.out_dir) / fallback : fs::path(explicit_path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

std::ofstream open_output(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  return os;
}

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> v;
  std::istringstream is(text);
  for (std::string tok; std::getline(is, tok, ',');) {
    try {
      v.push_back(std::stod(tok));
    } catch (const std::logic_error&) {
      throw TaskError("cannot parse number '" + tok + "'");
    }
  }
  return v;
}

// State specs: a basis index ("0"), Bloch angles ("bloch:theta,phi"), raw amplitudes
// ("amp:re0,im0,re1,im1,...", normalized) or a suite member ("suite:i").
PureState parse_state(const std::string& spec, const RunConfig& cfg) {
  const int d = cfg.control.dim();
  if (spec.rfind("bloch:", 0) == 0) {
    if (d != 2) throw TaskError("bloch: states are single-qubit only");
    const auto v = parse_numbers(spec.substr(6));
    if (v.size() != 2) throw TaskError("bloch: needs theta,phi");
    return bloch_state(v[0], v[1]);
  }
  if (spec.rfind("amp:", 0) == 0) {
    const auto v = parse_numbers(spec.substr(4));
    if (static_cast<int>(v.size()) != 2 * d) throw TaskError("amp: needs " + std::to_string(2 * d) + " numbers");
    CVector a(d);
    for (int i = 0; i < d; ++i) a[i] = Complex(v[2 * i], v[2 * i + 1]);
    if (a.norm() < 1e-12) throw TaskError("amp: state has zero norm");
    return PureState::normalized(a);
  }
  if (spec.rfind("suite:", 0) == 0) {
    const TestSuite suite = suite_by_name(cfg.suite, cfg.suite_seed);
    const auto i = std::stoul(spec.substr(6));
    if (i >= suite.size()) throw TaskError("suite index out of range");
    return suite.states[i];
  }
  int index = -1;
  try {
    std::size_t used = 0;
    index = std::stoi(spec, &used);
    if (used != spec.size()) index = -1;
  } catch (const std::logic_error&) {
  }
  if (index < 0 || index >= d) {
    throw TaskError("state '" + spec + "' is not a basis index in [0, " + std::to_string(d - 1) +
                    "], bloch:theta,phi, amp:... or suite:i");
  }
  return PureState::basis(d, index);
}

MlpModel load_checked_model(const std::string& path, const RunConfig& cfg, const ActionSet& aset,
                            std::optional<Encoding> enc = std::nullopt) {
  if (!fs::exists(path)) throw Error("model file '" + path + "' does not exist");
  MlpModel m = load_model(path);
  check_model_matches(m, cfg.control.qubits, aset, enc);
  return m;
}

void write_digest_line(std::ostream& os, const std::string& digest) { os << "# config_digest " << digest << '\n'; }

Pairing make_pairing(const RunConfig& cfg, const std::string& init_spec) {
  if (cfg.pairing == "all-ordered-pairs") return Pairing::all_pairs();
  const std::string spec = init_spec.empty() ? "0" : init_spec;
  return Pairing::fixed(parse_state(spec, cfg), spec);
}

Method make_method(const std::string& name, const MlpModel* model, const ActionSet& aset, const RunConfig& cfg) {
  if (name == "sp") {
    if (model == nullptr) throw TaskError("method sp needs --model");
    return sp_method(*model, aset, cfg.control);
  }
  if (name == "ga") return greedy_method(aset, cfg.control);
  if (name == "rg") return revised_greedy_method(aset, cfg.control);
  if (name == "grape") return grape_method(aset, cfg.control, cfg.grape);
  if (name == "crab") return crab_method(aset, cfg.control, cfg.crab);
  std::string valid;
  for (const auto& n : kMethodNames) valid += (valid.empty() ? "" : ", ") + n;
  throw TaskError("unknown method '" + name + "' (valid: " + valid + ")");
}

// Per-method task seeds come from the method's own stage so RG and CRAB streams are independent.
std::uint64_t method_seed(const RunConfig& cfg, const std::string& name) { return cfg.stage_seed(name); }

// ---------------------------------------------------------------------------

int cmd_gen_data(const CommonFlags& f, std::optional<std::size_t> samples, bool noisy, const std::string& channel,
                 std::optional<double> p, const std::string& output) {
  RunConfig cfg = build_config(f);
  if (samples) cfg.dataset.sample_count = *samples;
  if (noisy) cfg.dataset.noisy = true;
  if (!channel.empty()) cfg.dataset.channel = parse_channel_kind(channel);
  if (p) cfg.dataset.p = *p;
  cfg.dataset.workers = cfg.workers;
  cfg.validate();
  const ActionSet aset = ActionSet::defaults(cfg.control.qubits);
  const std::string digest = config_digest(cfg);

  const Dataset ds = generate_dataset(cfg.dataset, cfg.control, aset);
  const fs::path path = output_path(cfg, output, "dataset-q" + std::to_string(cfg.control.qubits) + ".bin");
  save_dataset(path.string(), ds, digest);

  nlohmann::json summary;
  summary["samples"] = ds.size();
  summary["seed"] = ds.header.seed;
  summary["qubits"] = ds.header.qubits;
  summary["encoding"] = to_string(ds.header.encoding);
  summary["noisy"] = ds.header.noisy;
  if (ds.header.noisy) {
    summary["channel"] = to_string(ds.header.channel);
    summary["p"] = ds.header.p;
  }
  summary["action_set"] = ds.header.action_set;
  summary["label_histogram"] = ds.label_histogram(aset.size());
  summary["config_digest"] = digest;
  auto os = open_output(path.string() + ".summary.json");
  os << summary.dump(2) << '\n';
  std::cout << "wrote " << ds.size() << " samples to " << path.string() << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& data, const std::string& model_out,
              const std::string& report_out, std::optional<int> epochs, std::optional<int> batch,
              std::optional<double> lr, bool track) {
  RunConfig cfg = build_config(f);
  if (epochs) cfg.train.epochs = *epochs;
  if (batch) cfg.train.batch_size = *batch;
  if (lr) cfg.train.learning_rate = *lr;
  cfg.validate();
  const ActionSet aset = ActionSet::defaults(cfg.control.qubits);
  const std::string digest = config_digest(cfg);

  if (!fs::exists(data)) throw Error("dataset file '" + data + "' does not exist");
  const Dataset ds = load_dataset(data, aset.size());
  check_dataset_matches(ds.header, cfg.control.qubits, aset);
  if (std::abs(ds.header.dt - cfg.control.dt) > 1e-12) {
    throw MismatchError("dataset was generated with dt=" + detail::format_double(ds.header.dt) +
                        " but the configuration uses dt=" + detail::format_double(cfg.control.dt));
  }

  const ModelMetadata meta{cfg.control.qubits, aset.id(), ds.header.encoding, cfg.train.rng_seed, digest};
  MlpModel model = init_model(default_layer_sizes(cfg.control.qubits, ds.header.encoding, aset.size()),
                              cfg.stage_seed("init"), meta);

  EpochHook hook;
  std::vector<Task> tasks;
  if (track && ds.header.encoding == Encoding::Pure) {
    tasks = make_tasks(suite_by_name(cfg.suite, cfg.suite_seed),
                       Pairing::fixed(PureState::basis(cfg.control.dim(), 0)));
  }
  hook = [&](const MlpModel& m, EpochStats& s) {
    if (!tasks.empty()) {
      double sum = 0.0;
      for (const auto& t : tasks) sum += prepare(m, t.init, t.target, aset, cfg.control).f_max;
      s.policy_fidelity = sum / static_cast<double>(tasks.size());
    }
    std::cout << "epoch " << s.epoch << " loss " << s.train_loss << " heldout_accuracy " << s.heldout_accuracy;
    if (s.policy_fidelity) std::cout << " policy_fidelity " << *s.policy_fidelity;
    std::cout << std::endl;
  };
  const TrainReport report = train(model, ds, cfg.train, hook);

  const std::string q = std::to_string(cfg.control.qubits);
  const fs::path mpath = output_path(cfg, model_out, "model-q" + q + ".bin");
  save_model(mpath.string(), model);
  const fs::path rpath = output_path(cfg, report_out, "train-report-q" + q + ".csv");
  auto os = open_output(rpath);
  write_digest_line(os, digest);
  write_train_report(os, report);
  std::cout << "wrote model to " << mpath.string() << " and report to " << rpath.string() << '\n';
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& model_path, const std::string& init_spec,
             const std::string& target_spec, const std::string& suite, const std::string& pairing,
             const std::string& output) {
  RunConfig cfg = build_config(f);
  if (!suite.empty()) cfg.suite = suite;
  if (!pairing.empty()) cfg.pairing = pairing;
  cfg.validate();
  const ActionSet aset = ActionSet::defaults(cfg.control.qubits);
  const std::string digest = config_digest(cfg);
  const MlpModel model = load_checked_model(model_path, cfg, aset, Encoding::Pure);

  if (!target_spec.empty()) {
    const PureState init = parse_state(init_spec.empty() ? "0" : init_spec, cfg);
    const PureState target = parse_state(target_spec, cfg);
    const PrepResult r = prepare(model, init, target, aset, cfg.control);
    const fs::path path = output_path(cfg, output, "eval-trajectory.txt");
    auto os = open_output(path);
    write_digest_line(os, digest);
    write_prep_result(os, r, init, target, aset, cfg.control, "sp");
    std::cout << "f_max " << r.f_max << " steps_used " << r.steps_used << " terminated_by "
              << to_string(r.terminated_by) << '\n';
    return 0;
  }

  const TestSuite s = suite_by_name(cfg.suite, cfg.suite_seed);
  const Method m = sp_method(model, aset, cfg.control);
  const BenchReport rep = run_suite(m, s, make_pairing(cfg, init_spec), cfg.control, {cfg.stage_seed("sp"), 1, true});
  const fs::path path = output_path(cfg, output, "eval-" + cfg.suite + ".csv");
  auto os = open_output(path);
  write_digest_line(os, digest);
  write_report_table(os, rep);
  auto js = open_output(path.string() + ".summary.json");
  js << report_summary(rep, digest).dump(2) << '\n';
  std::cout << "tasks " << rep.records.size() << " mean_fidelity " << rep.mean_fidelity << " mean_design_time "
            << rep.mean_design_time << '\n';
  return 0;
}

int cmd_bench(const CommonFlags& f, const std::string& methods, const std::string& model_path,
              const std::string& suite, const std::string& pairing, const std::string& init_spec) {
  RunConfig cfg = build_config(f);
  if (!suite.empty()) cfg.suite = suite;
  if (!pairing.empty()) cfg.pairing = pairing;
  cfg.validate();
  const ActionSet aset = ActionSet::defaults(cfg.control.qubits);
  const std::string digest = config_digest(cfg);

  std::vector<std::string> names;
  std::istringstream is(methods);
  for (std::string tok; std::getline(is, tok, ',');) {
    if (!tok.empty()) names.push_back(tok);
  }
  if (names.empty()) throw TaskError("no methods given");
  std::optional<MlpModel> model;
  if (std::find(names.begin(), names.end(), "sp") != names.end()) {
    if (model_path.empty()) throw TaskError("method sp needs --model");
    model = load_checked_model(model_path, cfg, aset, Encoding::Pure);
  }
  std::vector<Method> ms;
  for (const auto& n : names) ms.push_back(make_method(n, model ? &*model : nullptr, aset, cfg));

  const TestSuite s = suite_by_name(cfg.suite, cfg.suite_seed);
  const Pairing pair = make_pairing(cfg, init_spec);
  std::vector<BenchReport> reports;
  for (const auto& m : ms) {
    reports.push_back(run_suite(m, s, pair, cfg.control, {method_seed(cfg, m.id), cfg.workers, true}));
  }

  const fs::path dir = output_path(cfg, "", "bench-summary.csv").parent_path();
  {
    auto os = open_output(dir / "bench-summary.csv");
    write_digest_line(os, digest);
    os.precision(12);
    os << "method,tasks,mean_fidelity,mean_design_time\n";
    for (const auto& r : reports) {
      os << r.method << ',' << r.records.size() << ',' << r.mean_fidelity << ',' << r.mean_design_time << '\n';
    }
  }
  {
    auto os = open_output(dir / "bench-records.csv");
    write_digest_line(os, digest);
    BenchReport all;
    for (const auto& r : reports) all.records.insert(all.records.end(), r.records.begin(), r.records.end());
    write_report_table(os, all);
  }
  {
    auto os = open_output(dir / "bench-histogram.csv");
    write_digest_line(os, digest);
    os << "method,lower,upper,count\n";
    for (const auto& r : reports) {
      for (const auto& b : frequency_histogram(r, cfg.histogram_bin)) {
        os << r.method << ',' << b.lower << ',' << b.upper << ',' << b.count << '\n';
      }
    }
  }
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(report_summary(r, digest));
    auto os = open_output(dir / "bench-summary.json");
    os << j.dump(2) << '\n';
  }
  std::cout << "method  tasks  mean_fidelity  mean_design_time\n";
  for (const auto& r : reports) {
    std::cout << r.method << "  " << r.records.size() << "  " << r.mean_fidelity << "  " << r.mean_design_time << '\n';
  }
  return 0;
}

int cmd_noise_sweep(const CommonFlags& f, const std::string& mode_name, const std::string& channel,
                    const std::string& p_spec, const std::string& model_path, const std::string& init_spec,
                    const std::string& target_spec, const std::string& suite, const std::string& output) {
  RunConfig cfg = build_config(f);
  if (!suite.empty()) cfg.suite = suite;
  cfg.validate();
  const ActionSet aset = ActionSet::defaults(cfg.control.qubits);
  const std::string digest = config_digest(cfg);

  NoiseMode mode;
  if (mode_name == "ideal") {
    mode = NoiseMode::IdealPulsesReplayed;
  } else if (mode_name == "noise-trained") {
    mode = NoiseMode::NoiseTrainedModel;
  } else {
    throw TaskError("unknown mode '" + mode_name + "' (valid: ideal, noise-trained)");
  }
  const ChannelKind kind = parse_channel_kind(channel);
  const std::vector<double> ps = parse_p_range(p_spec);
  const MlpModel model = load_checked_model(
      model_path, cfg, aset, mode == NoiseMode::IdealPulsesReplayed ? Encoding::Pure : Encoding::Density);

  std::vector<Task> tasks;
  if (!target_spec.empty()) {
    const std::string is = init_spec.empty() ? "0" : init_spec;
    tasks.push_back({is, target_spec, parse_state(is, cfg), parse_state(target_spec, cfg)});
  } else {
    tasks = make_tasks(suite_by_name(cfg.suite, cfg.suite_seed), make_pairing(cfg, init_spec));
  }
  const SweepReport rep =
      noise_sweep(mode, kind, ps, tasks, [&](double) -> const MlpModel& { return model; }, aset, cfg.control);
  const fs::path path = output_path(cfg, output, "noise-sweep.csv");
  auto os = open_output(path);
  write_digest_line(os, digest);
  write_sweep_table(os, rep);
  write_sweep_table(std::cout, rep);
  return 0;
}

int cmd_trajectory(const CommonFlags& f, const std::string& model_path, const std::string& init_spec,
                   const std::string& target_spec, const std::string& channel, std::optional<double> p,
                   const std::string& output) {
  RunConfig cfg = build_config(f);
  cfg.validate();
  if (cfg.control.qubits != 1) throw TaskError("trajectories are exported for single-qubit tasks only");
  const ActionSet aset = ActionSet::defaults(1);
  const std::string digest = config_digest(cfg);
  const MlpModel model = load_checked_model(model_path, cfg, aset);
  const PureState init = parse_state(init_spec, cfg);
  const PureState target = parse_state(target_spec, cfg);

  std::optional<NoiseModel> noise;
  if (!channel.empty() || p) noise = make_noise(parse_channel_kind(channel.empty() ? "bitflip" : channel), p.value_or(0.0), 1);
  PrepResult r;
  if (noise) {
    r = prepare_noisy(model, DensityMatrix::from_pure(init), target, aset, cfg.control, *noise);
  } else {
    r = prepare(model, init, target, aset, cfg.control);
  }
  const auto rows = trajectory_export(r, init, aset, cfg.control, noise ? &*noise : nullptr);
  const fs::path path = output_path(cfg, output, "trajectory.csv");
  auto os = open_output(path);
  write_digest_line(os, digest);
  write_trajectory(os, rows);
  std::cout << "rows " << rows.size() << " f_max " << r.f_max << " written to " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse design for singlet-triplet qubit state preparation"};
  app.require_subcommand(1);

  CommonFlags common;
  std::optional<std::size_t> samples;
  bool noisy = false;
  std::string channel, output, data, model, report, init, target, suite, pairing, methods = "sp,ga,rg,grape,crab";
  std::string mode = "ideal", p_spec = "0:0.05:0.01";
  std::optional<double> p, lr;
  std::optional<int> epochs, batch;
  bool track = false;

  auto* gen = app.add_subcommand("gen-data", "generate a training dataset");
  add_common(gen, common);
  gen->add_option("--samples", samples, "number of samples")->check(CLI::PositiveNumber);
  gen->add_flag("--noisy", noisy, "generate under a noise channel (density encoding)");
  gen->add_option("--channel", channel, "bitflip, phaseflip or amplitude-damping");
  gen->add_option("--p", p, "channel parameter");
  gen->add_option("-o,--output", output, "dataset path");

  auto* tr = app.add_subcommand("train", "train a policy network");
  add_common(tr, common);
  tr->add_option("--data", data, "dataset file")->required();
  tr->add_option("--model", model, "output model path");
  tr->add_option("--report", report, "output training report path");
  tr->add_option("--epochs", epochs);
  tr->add_option("--batch-size", batch);
  tr->add_option("--lr", lr);
  tr->add_flag("--track-fidelity", track, "evaluate the policy on the configured suite after every epoch");

  auto* ev = app.add_subcommand("eval", "design pulses with a trained model");
  add_common(ev, common);
  ev->add_option("--model", model, "model file")->required();
  ev->add_option("--init", init, "initial state");
  ev->add_option("--target", target, "target state (single task)");
  ev->add_option("--suite", suite, "bloch128 or hypersphere256");
  ev->add_option("--pairing", pairing, "fixed-initial or all-ordered-pairs");
  ev->add_option("-o,--output", output, "output path");

  auto* be = app.add_subcommand("bench", "compare design methods on a suite");
  add_common(be, common);
  be->add_option("--methods", methods, "comma-separated: sp,ga,rg,grape,crab");
  be->add_option("--model", model, "model file (needed for sp)");
  be->add_option("--suite", suite, "bloch128 or hypersphere256");
  be->add_option("--pairing", pairing, "fixed-initial or all-ordered-pairs");
  be->add_option("--init", init, "initial state for fixed-initial pairing");

  auto* ns = app.add_subcommand("noise-sweep", "fidelity versus channel parameter");
  add_common(ns, common);
  ns->add_option("--mode", mode, "ideal or noise-trained");
  ns->add_option("--channel", channel, "bitflip, phaseflip or amplitude-damping")->required();
  ns->add_option("--p", p_spec, "start:stop:step or comma list");
  ns->add_option("--model", model, "model file")->required();
  ns->add_option("--init", init, "initial state");
  ns->add_option("--target", target, "target state (single task; otherwise the suite)");
  ns->add_option("--suite", suite, "bloch128 or hypersphere256");
  ns->add_option("-o,--output", output, "output path");

  auto* tj = app.add_subcommand("trajectory", "Bloch-sphere trajectory of a designed sequence");
  add_common(tj, common);
  tj->add_option("--model", model, "model file")->required();
  tj->add_option("--init", init, "initial state")->required();
  tj->add_option("--target", target, "target state")->required();
  tj->add_option("--channel", channel, "noise channel for a noisy trajectory");
  tj->add_option("--p", p, "channel parameter");
  tj->add_option("-o,--output", output, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common, samples, noisy, channel, p, output);
    if (*tr) return cmd_train(common, data, model, report, epochs, batch, lr, track);
    if (*ev) return cmd_eval(common, model, init, target, suite, pairing, output);
    if (*be) return cmd_bench(common, methods, model, suite, pairing, init);
    if (*ns) return cmd_noise_sweep(common, mode, channel, p_spec, model, init, target, suite, output);
    if (*tj) return cmd_trajectory(common, model, init, target, channel, p, output);
  } catch (const MismatchError& e) {
    std::cerr << "mismatch: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const TaskError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
