// Copyright 2026 The deeplms Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Multi-tone experiment orchestration: runs the canceler variants side by
// side on identical pilot/noise streams, emits CSV traces and summaries, and
// hosts the two verification suites (SINR bounds and the coefficient-MSE
// recursion oracle).

#ifndef DLMS_EXPERIMENT_HPP
#define DLMS_EXPERIMENT_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlms/canceler.hpp"
#include "dlms/channel.hpp"
#include "dlms/linalg.hpp"
#include "dlms/metrics.hpp"
#include "dlms/parallel.hpp"
#include "dlms/rng.hpp"
#include "dlms/signal.hpp"
#include "dlms/theory.hpp"

namespace dlms {

enum class Algorithm { lms, deep_lms, avg_lms, avg_deep_lms, deep_lms_identity };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::lms: return "lms";
    case Algorithm::deep_lms: return "deep_lms";
    case Algorithm::avg_lms: return "avg_lms";
    case Algorithm::avg_deep_lms: return "avg_deep_lms";
    case Algorithm::deep_lms_identity: return "deep_lms_identity";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "lms") return Algorithm::lms;
  if (s == "deep_lms") return Algorithm::deep_lms;
  if (s == "avg_lms") return Algorithm::avg_lms;
  if (s == "avg_deep_lms") return Algorithm::avg_deep_lms;
  if (s == "deep_lms_identity") return Algorithm::deep_lms_identity;
  throw std::invalid_argument("unknown algorithm: " + s);
}

inline bool algorithm_is_deep(Algorithm a) {
  return a == Algorithm::deep_lms || a == Algorithm::avg_deep_lms ||
         a == Algorithm::deep_lms_identity;
}

inline bool algorithm_is_averaged(Algorithm a) {
  return a == Algorithm::avg_lms || a == Algorithm::avg_deep_lms;
}

struct ExperimentSpec {
  CableConfig cable;
  std::uint64_t channel_seed = 42;  // binder realization, fixed across seeds
  std::string channel_file;         // when set, loaded instead of generating
  int near_count = 0;               // > 0 builds the near-far variant
  PilotKind pilot = PilotKind::complex_gaussian;
  std::vector<Algorithm> algorithms{Algorithm::lms, Algorithm::deep_lms};
  long iterations = 20000;
  double trigger_db = 5.0;
  long n_tilde = 1000;
  double theta = 0.95;
  double b_max = 12.0;
  double tone_bandwidth_hz = 48000.0;
  std::vector<std::uint64_t> seeds{1};
  int mc_trials = 10000;            // oracle suite trials
  int mc_steps = 200;               // oracle suite trajectory length
  std::string out_dir = "out";
  int sinr_stride = 1;              // cadence of trigger/target SINR checks
  // The update trigger compares SINR estimates, which a receiver obtains by
  // averaging over many symbols. Measurements are smoothed with this EMA
  // weight before they reach the trigger (1 = use raw instantaneous values);
  // raw values still drive the iterations-to-target bookkeeping.
  double trigger_sinr_ema = 0.25;
  long trace_full_until = 100;      // full-resolution trace up to here
  double trace_points_per_decade = 24.0;
  double sinr_target_db = 30.0;     // iterations-to-threshold target
  bool stop_at_target = false;      // stop a run once every algorithm hit it
  MuMode mu_mode = MuMode::exact;
  int n_threads = 0;
};

inline void validate(const ExperimentSpec& spec) {
  if (spec.iterations < 1) throw std::invalid_argument("spec: iterations must be >= 1");
  if (spec.algorithms.empty()) throw std::invalid_argument("spec: no algorithms");
  if (spec.seeds.empty()) throw std::invalid_argument("spec: no seeds");
  if (spec.sinr_stride < 1) throw std::invalid_argument("spec: sinr_stride must be >= 1");
  if (!(spec.theta > 0.0 && spec.theta < 1.0))
    throw std::invalid_argument("spec: theta must be in (0,1)");
}

// ---------------------------------------------------------------------------
// JSON config

inline void from_json_into(const nlohmann::json& j, NoiseProfile& p) {
  p.psd_low_dbm_hz = j.value("psd_low_dbm_hz", p.psd_low_dbm_hz);
  p.psd_high_dbm_hz = j.value("psd_high_dbm_hz", p.psd_high_dbm_hz);
  p.break_hz = j.value("break_hz", p.break_hz);
}

inline void from_json_into(const nlohmann::json& j, CableConfig& c) {
  c.n_users = j.value("n_users", c.n_users);
  c.tone_count = j.value("tone_count", c.tone_count);
  c.first_tone_hz = j.value("first_tone_hz", c.first_tone_hz);
  c.tone_spacing_hz = j.value("tone_spacing_hz", c.tone_spacing_hz);
  c.length_m = j.value("length_m", c.length_m);
  c.direct_atten_db_per_m_sqrt_mhz =
      j.value("direct_atten_db_per_m_sqrt_mhz", c.direct_atten_db_per_m_sqrt_mhz);
  c.fext_coupling_strength = j.value("fext_coupling_strength", c.fext_coupling_strength);
  c.fext_growth_exponent = j.value("fext_growth_exponent", c.fext_growth_exponent);
  c.dominance_crossover_hz = j.value("dominance_crossover_hz", c.dominance_crossover_hz);
  c.tx_psd_dbm_hz = j.value("tx_psd_dbm_hz", c.tx_psd_dbm_hz);
  if (j.contains("noise")) from_json_into(j.at("noise"), c.noise);
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  if (j.contains("cable")) from_json_into(j.at("cable"), s.cable);
  s.channel_seed = j.value("channel_seed", s.channel_seed);
  s.channel_file = j.value("channel_file", s.channel_file);
  s.near_count = j.value("near_count", s.near_count);
  if (j.contains("pilot")) {
    std::string p = j.at("pilot").get<std::string>();
    if (p == "gaussian" || p == "complex_gaussian") s.pilot = PilotKind::complex_gaussian;
    else if (p == "qpsk") s.pilot = PilotKind::qpsk;
    else throw std::invalid_argument("unknown pilot kind: " + p);
  }
  if (j.contains("algorithms")) {
    s.algorithms.clear();
    for (const auto& a : j.at("algorithms"))
      s.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  }
  s.iterations = j.value("iterations", s.iterations);
  s.trigger_db = j.value("trigger_db", s.trigger_db);
  s.n_tilde = j.value("n_tilde", s.n_tilde);
  s.theta = j.value("theta", s.theta);
  s.b_max = j.value("b_max", s.b_max);
  s.tone_bandwidth_hz = j.value("tone_bandwidth_hz", s.tone_bandwidth_hz);
  if (j.contains("seeds")) {
    s.seeds.clear();
    for (const auto& v : j.at("seeds")) s.seeds.push_back(v.get<std::uint64_t>());
  }
  s.mc_trials = j.value("mc_trials", s.mc_trials);
  s.mc_steps = j.value("mc_steps", s.mc_steps);
  s.out_dir = j.value("out_dir", s.out_dir);
  s.sinr_stride = j.value("sinr_stride", s.sinr_stride);
  s.trigger_sinr_ema = j.value("trigger_sinr_ema", s.trigger_sinr_ema);
  s.trace_full_until = j.value("trace_full_until", s.trace_full_until);
  s.trace_points_per_decade = j.value("trace_points_per_decade", s.trace_points_per_decade);
  s.sinr_target_db = j.value("sinr_target_db", s.sinr_target_db);
  s.stop_at_target = j.value("stop_at_target", s.stop_at_target);
  if (j.contains("mu_mode")) {
    std::string m = j.at("mu_mode").get<std::string>();
    if (m == "exact") s.mu_mode = MuMode::exact;
    else if (m == "estimated") s.mu_mode = MuMode::estimated;
    else throw std::invalid_argument("unknown mu_mode: " + m);
  }
  s.n_threads = j.value("n_threads", s.n_threads);
  return s;
}

inline ExperimentSpec spec_from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  is >> j;
  return spec_from_json(j);
}

// ---------------------------------------------------------------------------
// Channels and streams

inline std::vector<ToneChannel> resolve_channels(const ExperimentSpec& spec) {
  std::vector<ToneChannel> chans = spec.channel_file.empty()
                                       ? generate_cable(spec.cable, spec.channel_seed)
                                       : load_channels(spec.channel_file);
  if (spec.near_count > 0) chans = make_near_far(chans, spec.near_count);
  return chans;
}

// One pilot stream and one noise stream per (seed, tone); every algorithm in
// a run consumes the identical sequences.
inline std::uint64_t pilot_stream_id(int tone) {
  return derive_stream({0xA110u, static_cast<std::uint64_t>(tone)});
}
inline std::uint64_t noise_stream_id(int tone) {
  return derive_stream({0xA220u, static_cast<std::uint64_t>(tone)});
}

/// Random channel with unit diagonal (already normalized), per-user input
/// SINR drawn log-uniformly in [phi_min, phi_max], and a noise variance that
/// accounts for `noise_share` of the weakest user's denominator. Used by the
/// verification suites that need high-SINR channels with known Phi.
inline ToneChannel random_normalized_channel(int n_users, double phi_min,
                                             double phi_max, double noise_share,
                                             std::uint64_t seed) {
  if (n_users < 2) throw std::invalid_argument("random_normalized_channel: n >= 2");
  if (!(phi_min > 0.0) || phi_max < phi_min || noise_share <= 0.0 || noise_share >= 1.0)
    throw std::invalid_argument("random_normalized_channel: bad parameters");
  RngStream rng(seed, 0x40c7u);
  RVector phi(n_users);
  for (int i = 0; i < n_users; ++i)
    phi(i) = phi_min * std::pow(phi_max / phi_min, rng.uniform());
  ToneChannel ch;
  ch.tone_index = 0;
  ch.frequency_hz = 0.0;
  ch.noise_variance = noise_share / phi.maxCoeff();
  ch.H = CMatrix::Identity(n_users, n_users);
  for (int i = 0; i < n_users; ++i) {
    CVector g(n_users - 1);
    for (int k = 0; k < n_users - 1; ++k) g(k) = rng.complex_normal();
    double target_power = 1.0 / phi(i) - ch.noise_variance;
    double norm2 = g.squaredNorm();
    double scale = norm2 > 0.0 ? std::sqrt(target_power / norm2) : 0.0;
    int k = 0;
    for (int j = 0; j < n_users; ++j)
      if (j != i) ch.H(j, i) = scale * g(k++);
  }
  return ch;
}

// ---------------------------------------------------------------------------
// Per-run state machine

struct TraceRecord {
  std::uint64_t seed = 0;
  int tone = 0;
  Algorithm algo = Algorithm::lms;
  long iteration = 0;
  bool update_flag = false;
  double min_input_sinr_db = 0.0;
  RVector output_sinr_db;  // per user
  RVector mse;             // per user
  double sum_rate_bps = 0.0;
};

struct ToneRunSummary {
  std::uint64_t seed = 0;
  int tone = 0;
  Algorithm algo = Algorithm::lms;
  long iterations_to_target = -1;  // -1 = target not reached
  double final_min_output_sinr_db = 0.0;
  double final_tone_rate_bps = 0.0;
  long n_updates = 0;
  RVector final_output_sinr;  // linear, per user
};

/// Drives one algorithm on one tone. All variants share the interface:
/// feed (r, d) per iteration; metrics are evaluated on the applied filter
/// (the averaged one for AVG variants).
class AlgoRunner {
 public:
  AlgoRunner(Algorithm kind, const ToneChannel& ch, const ExperimentSpec& spec)
      : kind_(kind),
        deep_(algorithm_is_deep(kind)),
        averaged_(algorithm_is_averaged(kind)) {
    const int n = ch.n_users();
    if (deep_) {
      DeepLmsConfig cfg;
      cfg.trigger_db = spec.trigger_db;
      cfg.n_tilde = spec.n_tilde;
      cfg.d_tilde_mode = kind == Algorithm::deep_lms_identity ? DtildeMode::identity
                                                              : DtildeMode::normalize;
      cfg.mu_mode = spec.mu_mode;
      deep_state_ = deep_lms_init(ch, cfg);
      refresh_preprocessor_cache(ch);
    } else {
      lms_state_ = lms_init(n, choose_mu(exact_stats(ch, CMatrix::Identity(n, n))));
      ht_cache_ = ch.H;
      phi_cache_ = input_sinr(ch, CMatrix::Identity(n, n));
    }
    avg_.theta = spec.theta;
    sinr_ema_weight_ = spec.trigger_sinr_ema;
  }

  /// Runs iteration n. `evaluate_sinr` marks the stride instants at which the
  /// applied-filter output SINR is measured (trigger + target detection).
  void step(const ToneChannel& ch, const CVector& r, const CVector& d, long n,
            bool evaluate_sinr, double target_db) {
    if (averaged_) applied_ = averaged_filter(avg_, current_w());

    bool update_now = false;
    if (evaluate_sinr) {
      double sinr_db = min_output_sinr_db(ch);
      smoothed_sinr_db_ = have_smoothed_
                              ? (1.0 - sinr_ema_weight_) * smoothed_sinr_db_ +
                                    sinr_ema_weight_ * sinr_db
                              : sinr_db;
      have_smoothed_ = true;
      if (target_iteration_ < 0 && sinr_db >= target_db) target_iteration_ = n;
      if (deep_) update_now = update_trigger(deep_state_, smoothed_sinr_db_);
    }
    if (deep_ &&
        deep_state_.iter - deep_state_.last_update_iter >= deep_state_.config.n_tilde)
      update_now = true;

    if (deep_) {
      deep_lms_step(deep_state_, ch, r, d, update_now);
      if (update_now) {
        refresh_preprocessor_cache(ch);
        if (averaged_) avg_.reset();
        // the smoothed estimate belongs to the pre-update configuration
        have_smoothed_ = false;
        ++n_updates_;
        just_updated_ = true;
      }
    } else {
      lms_step(lms_state_, r, d);
    }
  }

  EffectiveChannel effective_with(const ToneChannel& ch, const CMatrix& w) const {
    EffectiveChannel eff;
    eff.H_check.noalias() = ht_cache_ * w;
    if (deep_) {
      CMatrix m = deep_state_.W_P * w;
      eff.noise_var_out = ch.noise_variance * m.colwise().squaredNorm().transpose();
    } else {
      eff.noise_var_out = ch.noise_variance * w.colwise().squaredNorm().transpose();
    }
    return eff;
  }

  EffectiveChannel effective(const ToneChannel& ch) const {
    const CMatrix& w = averaged_ && applied_.size() != 0 ? applied_ : current_w();
    return effective_with(ch, w);
  }

  double min_output_sinr_db(const ToneChannel& ch) const {
    return db_from_linear(output_sinr(effective(ch)).minCoeff());
  }

  TraceRecord record(const ToneChannel& ch, const ExperimentSpec& spec,
                     std::uint64_t seed, long iteration) {
    TraceRecord rec;
    rec.seed = seed;
    rec.tone = ch.tone_index;
    rec.algo = kind_;
    rec.iteration = iteration;
    rec.update_flag = just_updated_;
    just_updated_ = false;
    rec.min_input_sinr_db = db_from_linear(phi_cache_.minCoeff());
    // Records fall between steps; for averaged variants the filter the next
    // step will apply is the average including the current W, peeked without
    // advancing the accumulator (applied_ may still hold pre-fold state).
    EffectiveChannel eff =
        averaged_ ? effective_with(ch, averaged_peek(avg_, current_w()))
                  : effective(ch);
    RVector psi = output_sinr(eff);
    rec.output_sinr_db.resize(psi.size());
    double rate = 0.0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      rec.output_sinr_db(i) = db_from_linear(psi(i));
      rate += spec.tone_bandwidth_hz * tone_bits(psi(i), spec.b_max);
    }
    rec.mse = output_mse(eff);
    rec.sum_rate_bps = rate;
    last_psi_ = psi;
    return rec;
  }

  Algorithm kind() const { return kind_; }
  long n_updates() const { return n_updates_; }
  long target_iteration() const { return target_iteration_; }
  const RVector& last_output_sinr() const { return last_psi_; }
  const DeepLmsState& deep_state() const { return deep_state_; }
  const CMatrix& current_w() const { return deep_ ? deep_state_.lms.W : lms_state_.W; }

 private:
  void refresh_preprocessor_cache(const ToneChannel& ch) {
    ht_cache_.noalias() = ch.H * deep_state_.W_P;
    phi_cache_ = input_sinr(ch, deep_state_.W_P);
  }

  Algorithm kind_;
  bool deep_;
  bool averaged_;
  DeepLmsState deep_state_;
  LmsState lms_state_;
  AveragerState avg_;
  CMatrix applied_;
  CMatrix ht_cache_;   // H * W_P (H itself for the single-layer variants)
  RVector phi_cache_;  // input SINR of the current preprocessor
  RVector last_psi_;
  double sinr_ema_weight_ = 0.25;
  double smoothed_sinr_db_ = 0.0;
  bool have_smoothed_ = false;
  long n_updates_ = 0;
  long target_iteration_ = -1;
  bool just_updated_ = false;
};

// ---------------------------------------------------------------------------
// Experiment driver

inline std::vector<long> trace_sample_grid(long iterations, long full_until,
                                           double points_per_decade) {
  std::vector<long> grid;
  long dense = std::min(iterations, full_until);
  for (long n = 0; n <= dense; ++n) grid.push_back(n);
  double factor = std::pow(10.0, 1.0 / points_per_decade);
  double x = static_cast<double>(std::max<long>(dense, 1));
  while (true) {
    x *= factor;
    long n = static_cast<long>(std::llround(x));
    if (n >= iterations) break;
    if (n > grid.back()) grid.push_back(n);
  }
  if (grid.back() != iterations) grid.push_back(iterations);
  return grid;
}

struct ExperimentResult {
  std::vector<TraceRecord> trace;
  std::vector<ToneRunSummary> summaries;
  std::map<Algorithm, double> median_iterations_to_target;  // -1 when unreached
  int n_users = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return -1.0;
  std::sort(v.begin(), v.end());
  size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const std::vector<ToneChannel>& channels) {
  validate(spec);
  if (channels.empty()) throw std::invalid_argument("run_experiment: no channels");
  const int n_users = channels.front().n_users();
  const auto grid = trace_sample_grid(spec.iterations, spec.trace_full_until,
                                      spec.trace_points_per_decade);

  struct TaskOut {
    std::vector<TraceRecord> trace;
    std::vector<ToneRunSummary> summaries;
  };
  const int n_tasks = static_cast<int>(spec.seeds.size() * channels.size());
  std::vector<TaskOut> outs(n_tasks);

  auto task_fn = [&](int task) {
    const std::uint64_t seed = spec.seeds[task / channels.size()];
    const ToneChannel& ch = channels[task % channels.size()];
    TaskOut& out = outs[task];

    PilotSource pilots(spec.pilot, seed, pilot_stream_id(ch.tone_index));
    RngStream noise(seed, noise_stream_id(ch.tone_index));

    std::vector<AlgoRunner> runners;
    runners.reserve(spec.algorithms.size());
    for (Algorithm a : spec.algorithms) runners.emplace_back(a, ch, spec);

    size_t grid_pos = 0;
    long completed = 0;
    for (long n = 0; n < spec.iterations; ++n) {
      if (grid_pos < grid.size() && grid[grid_pos] == n) {
        for (auto& r : runners) out.trace.push_back(r.record(ch, spec, seed, n));
        ++grid_pos;
      }
      const bool eval = (n % spec.sinr_stride) == 0;
      CVector d = draw_pilot(pilots, n_users);
      CVector r = received_signal(ch, d, noise);
      for (auto& runner : runners)
        runner.step(ch, r, d, n, eval, spec.sinr_target_db);
      completed = n + 1;
      if (spec.stop_at_target && eval) {
        bool all_done = true;
        for (auto& runner : runners)
          if (runner.target_iteration() < 0) { all_done = false; break; }
        if (all_done) break;
      }
    }
    for (auto& r : runners)
      out.trace.push_back(r.record(ch, spec, seed, completed));

    for (auto& r : runners) {
      ToneRunSummary s;
      s.seed = seed;
      s.tone = ch.tone_index;
      s.algo = r.kind();
      s.iterations_to_target = r.target_iteration();
      s.final_output_sinr = r.last_output_sinr();
      s.final_min_output_sinr_db = db_from_linear(s.final_output_sinr.minCoeff());
      double rate = 0.0;
      for (Eigen::Index i = 0; i < s.final_output_sinr.size(); ++i)
        rate += spec.tone_bandwidth_hz * tone_bits(s.final_output_sinr(i), spec.b_max);
      s.final_tone_rate_bps = rate;
      s.n_updates = r.n_updates();
      out.summaries.push_back(std::move(s));
    }
  };
  parallel_for(n_tasks, spec.n_threads, task_fn);

  ExperimentResult res;
  res.n_users = n_users;
  for (auto& o : outs) {
    res.trace.insert(res.trace.end(), o.trace.begin(), o.trace.end());
    res.summaries.insert(res.summaries.end(), o.summaries.begin(), o.summaries.end());
  }
  for (Algorithm a : spec.algorithms) {
    std::vector<double> iters;
    for (const auto& s : res.summaries)
      if (s.algo == a)
        iters.push_back(s.iterations_to_target < 0
                            ? static_cast<double>(spec.iterations)
                            : static_cast<double>(s.iterations_to_target));
    res.median_iterations_to_target[a] = detail::median(std::move(iters));
  }
  return res;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  return run_experiment(spec, resolve_channels(spec));
}

// ---------------------------------------------------------------------------
// CSV emission

inline void write_trace_csv(std::ostream& os, const ExperimentResult& res) {
  os << "# schema: trace.v1\n";
  os << "seed,tone,algorithm,iteration,update_flag,min_input_sinr_db,sum_rate_bps";
  for (int i = 0; i < res.n_users; ++i) os << ",output_sinr_db_" << i;
  for (int i = 0; i < res.n_users; ++i) os << ",mse_" << i;
  os << '\n';
  for (const auto& r : res.trace) {
    os << r.seed << ',' << r.tone << ',' << algorithm_name(r.algo) << ','
       << r.iteration << ',' << (r.update_flag ? 1 : 0) << ','
       << format_double(r.min_input_sinr_db) << ',' << format_double(r.sum_rate_bps);
    for (Eigen::Index i = 0; i < r.output_sinr_db.size(); ++i)
      os << ',' << format_double(r.output_sinr_db(i));
    for (Eigen::Index i = 0; i < r.mse.size(); ++i)
      os << ',' << format_double(r.mse(i));
    os << '\n';
  }
}

/// Summary rows: one per (seed, tone, algorithm), then per-(seed, algorithm)
/// rate aggregates over the whole band (near/far user groups reported
/// separately when near_count > 0), then per-algorithm medians.
inline void write_summary_csv(std::ostream& os, const ExperimentSpec& spec,
                              const ExperimentResult& res) {
  os << "# schema: summary.v1\n";
  os << "kind,seed,tone,algorithm,iterations_to_target,target_db,"
        "final_min_output_sinr_db,final_tone_rate_bps,n_updates,"
        "near_rate_mean_bps,far_rate_mean_bps,rate_mean_bps\n";
  for (const auto& s : res.summaries) {
    os << "tone," << s.seed << ',' << s.tone << ',' << algorithm_name(s.algo) << ','
       << s.iterations_to_target << ',' << format_double(spec.sinr_target_db) << ','
       << format_double(s.final_min_output_sinr_db) << ','
       << format_double(s.final_tone_rate_bps) << ',' << s.n_updates << ",,,\n";
  }
  for (std::uint64_t seed : spec.seeds) {
    for (Algorithm a : spec.algorithms) {
      RVector per_user = RVector::Zero(res.n_users);
      bool any = false;
      for (const auto& s : res.summaries) {
        if (s.seed != seed || s.algo != a) continue;
        for (Eigen::Index i = 0; i < per_user.size(); ++i)
          per_user(i) += spec.tone_bandwidth_hz *
                         tone_bits(s.final_output_sinr(i), spec.b_max);
        any = true;
      }
      if (!any) continue;
      os << "seed," << seed << ",-1," << algorithm_name(a) << ",,"
         << format_double(spec.sinr_target_db) << ",,,,";
      if (spec.near_count > 0) {
        double near = per_user.head(spec.near_count).mean();
        double far = per_user.tail(res.n_users - spec.near_count).mean();
        os << format_double(near) << ',' << format_double(far) << ','
           << format_double(per_user.mean()) << '\n';
      } else {
        os << ",," << format_double(per_user.mean()) << '\n';
      }
    }
  }
  for (Algorithm a : spec.algorithms) {
    auto it = res.median_iterations_to_target.find(a);
    double med = it == res.median_iterations_to_target.end() ? -1.0 : it->second;
    os << "algo,-1,-1," << algorithm_name(a) << ',' << format_double(med) << ','
       << format_double(spec.sinr_target_db) << ",,,,,,\n";
  }
}

// ---------------------------------------------------------------------------
// Bound suite

struct BoundSuiteResult {
  std::vector<theory::BoundReport> reports;
  int intervals_checked = 0;    // domain-valid, non-trivial intervals
  int intervals_reported = 0;   // trivial or out-of-domain, reported only
  int violations = 0;

  bool pass() const { return violations == 0; }
};

/// Runs the two-layer canceler on every channel and checks, at every
/// preprocessor update, the measured SINR growth against its lower bound and
/// the eigensolver-computed condition number / minimal-eigenvalue ratio of R
/// against their Gershgorin bounds. Intervals whose SINR is below the bound
/// domain, or whose bound is trivial, are reported but not failed.
inline BoundSuiteResult run_bound_suite(const ExperimentSpec& spec,
                                        const std::vector<ToneChannel>& channels) {
  validate(spec);
  BoundSuiteResult result;
  std::vector<std::vector<theory::BoundReport>> per_tone(channels.size());

  auto task_fn = [&](int t) {
    const ToneChannel& ch = channels[t];
    const int n = ch.n_users();
    const std::uint64_t seed = spec.seeds.front();
    PilotSource pilots(spec.pilot, seed, pilot_stream_id(ch.tone_index));
    RngStream noise(seed, noise_stream_id(ch.tone_index));

    DeepLmsConfig cfg;
    cfg.trigger_db = spec.trigger_db;
    cfg.n_tilde = spec.n_tilde;
    DeepLmsState st = deep_lms_init(ch, cfg);

    auto interval_state = [&](long interval, long n_start) {
      theory::BoundReport rep;
      rep.tone_index = ch.tone_index;
      rep.interval = interval;
      rep.n_start = n_start;
      auto stats = exact_stats(ch, st.W_P);
      rep.phi = input_sinr(ch, st.W_P).minCoeff();
      auto rec = theory::init_mse_recursion(stats, CMatrix::Identity(n, n),
                                            choose_mu(stats));
      rep.f_norm1 = theory::f_norm1_closed_form(rec.lambda, Field::complex_lms);
      rep.eta_inf = theory::eta_inf_bound(rec);
      rep.cond_measured = rec.lambda.maxCoeff() / rec.lambda.minCoeff();
      rep.lam_min_trace_measured = rec.lambda.minCoeff() / rec.lambda.sum();
      rep.alpha = theory::alpha(rep.phi, n);
      rep.domain_ok = rep.phi > rep.alpha;
      if (rep.domain_ok) {
        auto k = theory::convergence_constants(rep.phi, n, Field::complex_lms);
        rep.delta = k.delta;
        rep.c = k.c;
        rep.a = k.a;
        auto gb = theory::gershgorin_bounds(rep.phi, n);
        rep.cond_bound = gb.cond_bound;
        rep.lam_min_trace_bound = gb.lam_min_trace_bound;
        rep.b_bound = gb.b_bound;
      }
      return rep;
    };

    theory::BoundReport current = interval_state(0, 0);
    CMatrix ht = ch.H * st.W_P;
    for (long it = 0; it < spec.iterations; ++it) {
      bool update_now = false;
      long gap = st.iter - st.last_update_iter;
      if (gap >= cfg.n_tilde) {
        update_now = true;
      } else if ((it % spec.sinr_stride) == 0) {
        EffectiveChannel eff;
        eff.H_check.noalias() = ht * st.lms.W;
        CMatrix m = st.W_P * st.lms.W;
        eff.noise_var_out = ch.noise_variance * m.colwise().squaredNorm().transpose();
        update_now = update_trigger(st, db_from_linear(output_sinr(eff).minCoeff()));
      }
      CVector d = draw_pilot(pilots, n);
      CVector r = received_signal(ch, d, noise);
      deep_lms_step(st, ch, r, d, update_now);
      if (update_now) {
        current.n_end = st.iter;
        current.phi_next = input_sinr(ch, st.W_P).minCoeff();
        if (current.domain_ok) {
          auto b = theory::sinr_lower_bound(current.phi, current.n_end - current.n_start,
                                            current.eta_inf, n, Field::complex_lms);
          current.sinr_bound = b.value;
          current.trivial = b.trivial;
          if (!b.trivial && current.eta_inf > 0.0) {
            double ceiling = 1.0 / current.eta_inf - 1.0;
            current.saturated = current.sinr_bound >= 0.1 * ceiling;
          }
        }
        per_tone[t].push_back(current);
        current = interval_state(current.interval + 1, st.iter);
        ht.noalias() = ch.H * st.W_P;
      }
    }
  };
  parallel_for(static_cast<int>(channels.size()), spec.n_threads, task_fn);

  for (auto& rows : per_tone)
    for (auto& rep : rows) {
      if (!rep.domain_ok || rep.trivial || rep.saturated) {
        ++result.intervals_reported;
        if (rep.domain_ok) {
          // Gershgorin bounds are deterministic in phi; enforce them even
          // when the SINR-growth check itself has no power.
          const double tol = 1.0 + 1e-9;
          if (rep.cond_measured > rep.cond_bound * tol) ++result.violations;
          if (rep.lam_min_trace_measured * tol < rep.lam_min_trace_bound)
            ++result.violations;
        }
      } else {
        ++result.intervals_checked;
        const double tol = 1.0 + 1e-9;
        if (rep.phi_next * tol < rep.sinr_bound) ++result.violations;
        if (rep.cond_measured > rep.cond_bound * tol) ++result.violations;
        if (rep.lam_min_trace_measured * tol < rep.lam_min_trace_bound)
          ++result.violations;
      }
      result.reports.push_back(std::move(rep));
    }
  return result;
}

inline BoundSuiteResult run_bound_suite(const ExperimentSpec& spec) {
  return run_bound_suite(spec, resolve_channels(spec));
}

// ---------------------------------------------------------------------------
// Oracle suite

struct OracleDeviation {
  double eps = 0.0;  // max relative deviation of the analytic MSE trajectory
  double s = 0.0;    // max floored relative deviation of the S trajectory
};

/// Compares the analytic recursion (iterated from `st`) with a Monte Carlo
/// estimate. Relative deviations of S entries are floored at 5% of the
/// largest entry of the analytic S[n] so that near-zero entries do not
/// dominate the metric.
inline OracleDeviation compare_recursion_to_mc(theory::MseRecursionState st,
                                               const theory::McCoefficientMse& mc,
                                               int n_steps) {
  OracleDeviation dev;
  for (int nstep = 0; nstep <= n_steps; ++nstep) {
    const RMatrix& s_mc = mc.s_mean[nstep];
    double s_floor = 0.05 * st.S.maxCoeff();
    for (Eigen::Index i = 0; i < st.S.rows(); ++i)
      for (Eigen::Index j = 0; j < st.S.cols(); ++j) {
        double denom = std::max(st.S(i, j), s_floor);
        if (denom > 0.0)
          dev.s = std::max(dev.s, std::abs(s_mc(i, j) - st.S(i, j)) / denom);
      }
    if (nstep < n_steps) {
      RVector eps = theory::analytic_mse(st);
      const RVector& eps_mc = mc.mse_mean[nstep];
      for (Eigen::Index i = 0; i < eps.size(); ++i)
        dev.eps = std::max(dev.eps, std::abs(eps_mc(i) - eps(i)) / eps(i));
    }
    theory::mse_recursion_step(st);
  }
  return dev;
}

struct OracleSuiteResult {
  struct Case {
    int n_users;
    OracleDeviation deviation;
  };
  std::vector<Case> cases;
  double threshold = 0.05;
  double max_eps_dev = 0.0;
  double max_s_dev = 0.0;

  bool pass() const { return max_eps_dev <= threshold && max_s_dev <= threshold; }
};

/// Validates the coefficient-MSE recursion against brute-force simulation on
/// random normalized channels with N in {2, 3, 4}.
inline OracleSuiteResult run_oracle_suite(const ExperimentSpec& spec) {
  validate(spec);
  OracleSuiteResult result;
  const std::uint64_t seed = spec.seeds.front();
  for (int n = 2; n <= 4; ++n) {
    ToneChannel ch = random_normalized_channel(
        n, 20.0, 200.0, 0.3, derive_stream({seed, static_cast<std::uint64_t>(n)}));
    CMatrix wp = CMatrix::Identity(n, n);
    auto stats = exact_stats(ch, wp);
    double mu = choose_mu(stats);
    auto st = theory::init_mse_recursion(stats, CMatrix::Identity(n, n), mu);
    auto mc = theory::mc_coefficient_mse(ch, wp, mu, spec.mc_steps, spec.mc_trials,
                                         derive_stream({seed, 0xabcu, static_cast<std::uint64_t>(n)}),
                                         CMatrix(), spec.n_threads);
    OracleDeviation dev = compare_recursion_to_mc(st, mc, spec.mc_steps);
    result.cases.push_back({n, dev});
    result.max_eps_dev = std::max(result.max_eps_dev, dev.eps);
    result.max_s_dev = std::max(result.max_s_dev, dev.s);
  }
  return result;
}

inline void write_oracle_csv(std::ostream& os, const OracleSuiteResult& res) {
  os << "# schema: oracle.v1\n";
  os << "n_users,eps_rel_dev,s_rel_dev,threshold,pass\n";
  for (const auto& c : res.cases) {
    bool ok = c.deviation.eps <= res.threshold && c.deviation.s <= res.threshold;
    os << c.n_users << ',' << format_double(c.deviation.eps) << ','
       << format_double(c.deviation.s) << ',' << format_double(res.threshold) << ','
       << (ok ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// File helpers

inline void write_experiment_outputs(const ExperimentSpec& spec,
                                     const ExperimentResult& res) {
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  {
    std::ofstream os(fs::path(spec.out_dir) / "trace.csv");
    write_trace_csv(os, res);
  }
  {
    std::ofstream os(fs::path(spec.out_dir) / "summary.csv");
    write_summary_csv(os, spec, res);
  }
}

}  // namespace dlms

#endif  // DLMS_EXPERIMENT_HPP
