#pragma once

// Comparison optimizers over the same discrete action space: greedy, revised greedy,
// and GRAPE / CRAB on continuous controls snapped to the nearest allowed action.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "pulseprep/control.hpp"
#include "pulseprep/dataset.hpp"
#include "pulseprep/policy.hpp"
#include "pulseprep/random.hpp"

namespace pulseprep {

// One-step greedy: take the oracle's best action while it strictly improves fidelity.
inline PrepResult greedy_prepare(const PureState& init, const PureState& target, const ActionSet& aset,
                                 const ControlConfig& cfg) {
  detail::Stopwatch clock;
  PrepResult r;
  PureState state = init;
  double f = fidelity(state, target);
  r.fidelity_trace.push_back(f);
  r.terminated_by = Termination::StepCap;
  for (int step = 0; step < cfg.max_steps; ++step) {
    if (f > cfg.fidelity_threshold) {
      r.terminated_by = Termination::Threshold;
      break;
    }
    const OracleChoice best = best_action_oracle(state, target, aset, cfg);
    if (best.next_fidelity <= f) {
      r.terminated_by = Termination::LocalOptimum;
      break;
    }
    state = step_pure(state, best.action, aset, cfg);
    f = fidelity(state, target);
    r.actions.push_back(best.action);
    r.fidelity_trace.push_back(f);
  }
  if (r.terminated_by == Termination::StepCap && f > cfg.fidelity_threshold) r.terminated_by = Termination::Threshold;
  r.finalize();
  r.design_time = clock.seconds();
  return r;
}

// Greedy with trial and error: when no action improves on the current fidelity, a uniformly
// random action is taken instead and the search carries on.
inline PrepResult revised_greedy_prepare(const PureState& init, const PureState& target, const ActionSet& aset,
                                         const ControlConfig& cfg, Rng& rng) {
  detail::Stopwatch clock;
  std::uniform_int_distribution<int> random_action(0, aset.size() - 1);
  PrepResult r;
  PureState state = init;
  double f = fidelity(state, target);
  double f_max = f;
  r.fidelity_trace.push_back(f);
  r.terminated_by = f_max > cfg.fidelity_threshold ? Termination::Threshold : Termination::StepCap;
  for (int step = 0; step < cfg.max_steps && r.terminated_by != Termination::Threshold; ++step) {
    const OracleChoice best = best_action_oracle(state, target, aset, cfg);
    const int a = best.next_fidelity > f ? best.action : random_action(rng);
    state = step_pure(state, a, aset, cfg);
    f = fidelity(state, target);
    r.actions.push_back(a);
    r.fidelity_trace.push_back(f);
    f_max = std::max(f_max, f);
    if (f_max > cfg.fidelity_threshold) r.terminated_by = Termination::Threshold;
  }
  r.finalize();
  r.design_time = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Piecewise-constant continuous controls: segments x channels, row-major.

class ControlSchedule {
 public:
  ControlSchedule(int segments, int channels, double fill = 0.0)
      : segments_(segments), channels_(channels), values_(static_cast<std::size_t>(segments * channels), fill) {}

  int segments() const { return segments_; }
  int channels() const { return channels_; }
  double& at(int seg, int ch) { return values_[static_cast<std::size_t>(seg * channels_ + ch)]; }
  double at(int seg, int ch) const { return values_[static_cast<std::size_t>(seg * channels_ + ch)]; }
  ActionSet::Value segment(int seg) const {
    ActionSet::Value v{0.0, 0.0};
    for (int c = 0; c < channels_; ++c) v[c] = at(seg, c);
    return v;
  }

 private:
  int segments_;
  int channels_;
  std::vector<double> values_;
};

inline CMatrix segment_propagator(const ActionSet::Value& v, const ControlConfig& cfg) {
  return propagator(control_hamiltonian(v, cfg), cfg.dt);
}

// Fidelity of the final state after all segments.
inline double schedule_fidelity(const ControlSchedule& u, const PureState& init, const PureState& target,
                                const ControlConfig& cfg) {
  CVector psi = init.amplitudes();
  for (int k = 0; k < u.segments(); ++k) psi = segment_propagator(u.segment(k), cfg) * psi;
  return std::norm(target.amplitudes().dot(psi));
}

// Fidelity after each prefix of an action list (initial value first).
inline PrepResult evaluate_actions(const std::vector<int>& actions, const PureState& init, const PureState& target,
                                   const ActionSet& aset, const ControlConfig& cfg) {
  PrepResult r;
  PureState state = init;
  r.fidelity_trace.push_back(fidelity(state, target));
  for (int a : actions) {
    state = step_pure(state, a, aset, cfg);
    r.actions.push_back(a);
    r.fidelity_trace.push_back(fidelity(state, target));
  }
  r.finalize();
  r.terminated_by = r.f_max > cfg.fidelity_threshold ? Termination::Threshold : Termination::StepCap;
  return r;
}

inline std::vector<int> snap_schedule(const ControlSchedule& u, const ActionSet& aset) {
  std::vector<int> actions;
  for (int k = 0; k < u.segments(); ++k) actions.push_back(aset.nearest(u.segment(k)));
  return actions;
}

struct GrapeConfig {
  int iterations = 300;
  double step_size = 0.2;
  int max_halvings = 12;
  double epsilon = 1e-4;
  // Stops early once the continuous fidelity reaches this value.
  double target_fidelity = 1.0 - 1e-9;

  void validate() const {
    if (iterations < 1) throw TaskError("GRAPE iterations must be at least 1");
    if (!(epsilon > 0.0)) throw TaskError("GRAPE epsilon must be positive");
    if (!(step_size > 0.0)) throw TaskError("GRAPE step size must be positive");
  }
};

// dF/du by central differences per segment and channel, using forward states and
// backward-propagated targets so each entry costs two segment propagators.
// Differences are one-sided where a central stencil would leave [lo, hi].
inline ControlSchedule grape_gradient(const ControlSchedule& u, const PureState& init, const PureState& target,
                                      const ControlConfig& cfg, const std::vector<std::pair<double, double>>& bounds,
                                      double eps) {
  const int n = u.segments();
  std::vector<CMatrix> props;
  props.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) props.push_back(segment_propagator(u.segment(k), cfg));
  std::vector<CVector> fwd(static_cast<std::size_t>(n));  // state entering segment k
  CVector psi = init.amplitudes();
  for (int k = 0; k < n; ++k) {
    fwd[static_cast<std::size_t>(k)] = psi;
    psi = props[static_cast<std::size_t>(k)] * psi;
  }
  std::vector<CVector> bwd(static_cast<std::size_t>(n));  // target pulled back through segments after k
  CVector chi = target.amplitudes();
  for (int k = n - 1; k >= 0; --k) {
    bwd[static_cast<std::size_t>(k)] = chi;
    chi = props[static_cast<std::size_t>(k)].adjoint() * chi;
  }
  ControlSchedule grad(n, u.channels());
  for (int k = 0; k < n; ++k) {
    const auto& in = fwd[static_cast<std::size_t>(k)];
    const auto& out = bwd[static_cast<std::size_t>(k)];
    for (int c = 0; c < u.channels(); ++c) {
      const auto [lo, hi] = bounds[static_cast<std::size_t>(c)];
      ActionSet::Value plus = u.segment(k), minus = u.segment(k);
      plus[c] = std::min(hi, plus[c] + eps);
      minus[c] = std::max(lo, minus[c] - eps);
      const double span = plus[c] - minus[c];
      if (span <= 0.0) continue;
      const double fp = std::norm(out.dot(segment_propagator(plus, cfg) * in));
      const double fm = std::norm(out.dot(segment_propagator(minus, cfg) * in));
      grad.at(k, c) = (fp - fm) / span;
    }
  }
  return grad;
}

// Gradient ascent on the final-state fidelity over N piecewise-constant segments, starting from
// the middle of each channel's range, with backtracking step halving and clamping to the range.
// The converged controls are snapped to the nearest allowed action per segment.
inline PrepResult grape_prepare(const PureState& init, const PureState& target, const ActionSet& aset,
                                const ControlConfig& cfg, const GrapeConfig& gcfg) {
  detail::Stopwatch clock;
  gcfg.validate();
  const int channels = aset.channels();
  std::vector<std::pair<double, double>> bounds;
  for (int c = 0; c < channels; ++c) bounds.push_back(aset.channel_range(c));

  ControlSchedule u(cfg.max_steps, channels);
  for (int k = 0; k < cfg.max_steps; ++k) {
    for (int c = 0; c < channels; ++c) u.at(k, c) = 0.5 * (bounds[c].first + bounds[c].second);
  }
  double f = schedule_fidelity(u, init, target, cfg);
  for (int it = 0; it < gcfg.iterations && f < gcfg.target_fidelity; ++it) {
    const ControlSchedule g = grape_gradient(u, init, target, cfg, bounds, gcfg.epsilon);
    double step = gcfg.step_size;
    bool improved = false;
    for (int h = 0; h <= gcfg.max_halvings && !improved; ++h, step *= 0.5) {
      ControlSchedule trial = u;
      for (int k = 0; k < u.segments(); ++k) {
        for (int c = 0; c < channels; ++c) {
          trial.at(k, c) = std::clamp(u.at(k, c) + step * g.at(k, c), bounds[c].first, bounds[c].second);
        }
      }
      const double ft = schedule_fidelity(trial, init, target, cfg);
      if (ft > f) {
        u = std::move(trial);
        f = ft;
        improved = true;
      }
    }
    if (!improved) break;
  }
  PrepResult r = evaluate_actions(snap_schedule(u, aset), init, target, aset, cfg);
  r.continuous_fidelity = f;
  r.design_time = clock.seconds();
  return r;
}

// ---------------------------------------------------------------------------
// Derivative-free simplex minimization.

struct NelderMeadOptions {
  int max_evaluations = 2000;
  double initial_step = 1.0;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  // Stops when the spread of simplex values falls below this.
  double f_tolerance = 1e-12;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
};

inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex{x0};
  for (std::size_t i = 0; i < n; ++i) {
    auto v = x0;
    v[i] += opt.initial_step;
    simplex.push_back(std::move(v));
  }
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };
  std::vector<double> values;
  for (const auto& v : simplex) values.push_back(eval(v));

  std::vector<std::size_t> order(n + 1);
  auto point = [&](const std::vector<double>& centroid, const std::vector<double>& worst, double t) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = centroid[i] + t * (worst[i] - centroid[i]);
    return out;
  };
  while (evals < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (values[worst] - values[best] < opt.f_tolerance) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[order[k]][i] / static_cast<double>(n);
    }
    const auto reflected = point(centroid, simplex[worst], -opt.reflection);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const auto expanded = point(centroid, simplex[worst], -opt.reflection * opt.expansion);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
    } else if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
    } else {
      const bool outside = fr < values[worst];
      const auto contracted =
          outside ? point(centroid, simplex[worst], -opt.reflection * opt.contraction)
                  : point(centroid, simplex[worst], opt.contraction);
      const double fc = eval(contracted);
      if (fc < std::min(fr, values[worst])) {
        simplex[worst] = contracted;
        values[worst] = fc;
      } else {
        for (std::size_t k = 1; k <= n; ++k) {
          auto& v = simplex[order[k]];
          for (std::size_t i = 0; i < n; ++i) v[i] = simplex[best][i] + opt.shrink * (v[i] - simplex[best][i]);
          values[order[k]] = eval(v);
        }
      }
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(it - values.begin());
  return {simplex[idx], values[idx], evals};
}

struct CrabConfig {
  int basis_size = 4;
  double frequency_jitter = 0.5;
  NelderMeadOptions simplex{};
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (basis_size < 1) throw TaskError("CRAB basis size must be at least 1");
    if (simplex.max_evaluations < 1) throw TaskError("CRAB evaluation budget must be positive");
  }
};

// Control c(t) = offset + sum_k a_k sin(w_k t) + b_k cos(w_k t) with randomized frequencies
// w_k = 2 pi k (1 + r_k) / T, r_k uniform in [-jitter, jitter].
class CrabBasis {
 public:
  CrabBasis(int channels, int basis_size, double total_time, double jitter, Rng& rng)
      : channels_(channels), basis_(basis_size) {
    std::uniform_real_distribution<double> r(-jitter, jitter);
    for (int c = 0; c < channels; ++c) {
      for (int k = 1; k <= basis_size; ++k) {
        omegas_.push_back(2.0 * std::numbers::pi * k * (1.0 + r(rng)) / total_time);
      }
    }
  }

  int parameters_per_channel() const { return 1 + 2 * basis_; }
  int parameter_count() const { return channels_ * parameters_per_channel(); }
  double omega(int channel, int k) const { return omegas_[static_cast<std::size_t>(channel * basis_ + k)]; }

  // Samples at segment midpoints, clamped to the channel bounds.
  ControlSchedule schedule(const std::vector<double>& coeffs, const ControlConfig& cfg,
                           const std::vector<std::pair<double, double>>& bounds) const {
    ControlSchedule u(cfg.max_steps, channels_);
    for (int n = 0; n < cfg.max_steps; ++n) {
      const double t = (n + 0.5) * cfg.dt;
      for (int c = 0; c < channels_; ++c) {
        const double* p = coeffs.data() + c * parameters_per_channel();
        double v = p[0];
        for (int k = 0; k < basis_; ++k) {
          v += p[1 + 2 * k] * std::sin(omega(c, k) * t) + p[2 + 2 * k] * std::cos(omega(c, k) * t);
        }
        u.at(n, c) = std::clamp(v, bounds[c].first, bounds[c].second);
      }
    }
    return u;
  }

 private:
  int channels_;
  int basis_;
  std::vector<double> omegas_;
};

// Simplex search over the CRAB coefficients from an all-zero start, then snapping.
inline PrepResult crab_prepare(const PureState& init, const PureState& target, const ActionSet& aset,
                               const ControlConfig& cfg, const CrabConfig& ccfg) {
  detail::Stopwatch clock;
  ccfg.validate();
  Rng rng(ccfg.rng_seed);
  const int channels = aset.channels();
  std::vector<std::pair<double, double>> bounds;
  for (int c = 0; c < channels; ++c) bounds.push_back(aset.channel_range(c));
  const CrabBasis basis(channels, ccfg.basis_size, cfg.total_time, ccfg.frequency_jitter, rng);
  auto infidelity = [&](const std::vector<double>& x) {
    return 1.0 - schedule_fidelity(basis.schedule(x, cfg, bounds), init, target, cfg);
  };
  const NelderMeadResult best =
      nelder_mead(infidelity, std::vector<double>(static_cast<std::size_t>(basis.parameter_count()), 0.0), ccfg.simplex);
  PrepResult r = evaluate_actions(snap_schedule(basis.schedule(best.x, cfg, bounds), aset), init, target, aset, cfg);
  r.continuous_fidelity = 1.0 - best.value;
  r.design_time = clock.seconds();
  return r;
}

}  // namespace pulseprep
