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

// deeplms: multi-tone crosstalk-canceler simulator.
//
// Default action runs the configured experiment and writes trace.csv plus
// summary.csv into the output directory. --suite runs the verification
// suites (bounds / oracle / all) instead; the exit code is 0 only when every
// selected suite passes.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dlms/dlms.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deeplms - adaptive crosstalk canceler simulator and verification suites"};

  std::string config_path, out_dir, seeds_arg, algos_arg, suite_arg, pilot_arg;
  std::string channel_file, export_channel;
  long iters = -1, n_tilde = -1;
  int tones = -1, users = -1, near = -1, mc_trials = -1, threads = -1, stride = -1;
  double trigger_db = -1.0, theta = -1.0;

  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seeds", seeds_arg, "comma-separated seed list");
  app.add_option("--algos", algos_arg,
                 "comma-separated: lms,deep_lms,avg_lms,avg_deep_lms,deep_lms_identity");
  app.add_option("--tones", tones, "number of tones of the synthetic cable");
  app.add_option("--users", users, "number of users of the synthetic cable");
  app.add_option("--iters", iters, "iterations per run");
  app.add_option("--trigger-db", trigger_db, "SINR improvement triggering a preprocessor update");
  app.add_option("--n-tilde", n_tilde, "forced preprocessor update period");
  app.add_option("--theta", theta, "forgetting factor of the averaged variants");
  app.add_option("--suite", suite_arg, "run verification suites: bounds, oracle or all")
      ->check(CLI::IsMember({"bounds", "oracle", "all"}));
  app.add_option("--channel-file", channel_file, "load channels from file instead of generating");
  app.add_option("--export-channel", export_channel, "write the resolved channels to a file and exit");
  app.add_option("--near", near, "near-user count for the near-far construction");
  app.add_option("--pilot", pilot_arg, "pilot constellation: gaussian or qpsk")
      ->check(CLI::IsMember({"gaussian", "qpsk"}));
  app.add_option("--mc-trials", mc_trials, "Monte Carlo trials of the oracle suite");
  app.add_option("--stride", stride, "SINR evaluation cadence in iterations");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  CLI11_PARSE(app, argc, argv);

  try {
    dlms::ExperimentSpec spec;
    if (!config_path.empty()) spec = dlms::spec_from_json_file(config_path);

    if (!out_dir.empty()) spec.out_dir = out_dir;
    if (!channel_file.empty()) spec.channel_file = channel_file;
    if (!seeds_arg.empty()) {
      spec.seeds.clear();
      for (const auto& s : split_csv(seeds_arg)) spec.seeds.push_back(std::stoull(s));
    }
    if (!algos_arg.empty()) {
      spec.algorithms.clear();
      for (const auto& a : split_csv(algos_arg))
        spec.algorithms.push_back(dlms::parse_algorithm(a));
    }
    if (tones > 0) spec.cable.tone_count = tones;
    if (users > 0) spec.cable.n_users = users;
    if (iters > 0) spec.iterations = iters;
    if (trigger_db >= 0.0) spec.trigger_db = trigger_db;
    if (n_tilde > 0) spec.n_tilde = n_tilde;
    if (theta > 0.0) spec.theta = theta;
    if (near >= 0) spec.near_count = near;
    if (!pilot_arg.empty())
      spec.pilot = pilot_arg == "qpsk" ? dlms::PilotKind::qpsk
                                       : dlms::PilotKind::complex_gaussian;
    if (mc_trials > 0) spec.mc_trials = mc_trials;
    if (stride > 0) spec.sinr_stride = stride;
    if (threads >= 0) spec.n_threads = threads;

    auto channels = dlms::resolve_channels(spec);

    if (!export_channel.empty()) {
      dlms::save_channels(export_channel, channels);
      std::cout << "wrote " << channels.size() << " tones to " << export_channel << "\n";
      return 0;
    }

    namespace fs = std::filesystem;
    if (!suite_arg.empty()) {
      bool all_pass = true;
      fs::create_directories(spec.out_dir);
      if (suite_arg == "bounds" || suite_arg == "all") {
        auto res = dlms::run_bound_suite(spec, channels);
        std::ofstream os(fs::path(spec.out_dir) / "bounds.csv");
        dlms::theory::write_bound_report_csv(os, res.reports);
        std::cout << (res.pass() ? "PASS" : "FAIL") << " bounds suite: "
                  << res.intervals_checked << " intervals checked, "
                  << res.intervals_reported << " reported (trivial/out-of-domain), "
                  << res.violations << " violations\n";
        all_pass = all_pass && res.pass();
      }
      if (suite_arg == "oracle" || suite_arg == "all") {
        auto res = dlms::run_oracle_suite(spec);
        std::ofstream os(fs::path(spec.out_dir) / "oracle.csv");
        dlms::write_oracle_csv(os, res);
        std::cout << (res.pass() ? "PASS" : "FAIL")
                  << " oracle suite: max MSE deviation " << res.max_eps_dev
                  << ", max S deviation " << res.max_s_dev << " (threshold "
                  << res.threshold << ")\n";
        all_pass = all_pass && res.pass();
      }
      return all_pass ? 0 : 1;
    }

    auto result = dlms::run_experiment(spec, channels);
    dlms::write_experiment_outputs(spec, result);
    std::cout << "wrote " << (fs::path(spec.out_dir) / "trace.csv").string() << " and "
              << (fs::path(spec.out_dir) / "summary.csv").string() << "\n";
    for (auto algo : spec.algorithms) {
      double med = result.median_iterations_to_target.at(algo);
      std::cout << "  " << dlms::algorithm_name(algo)
                << ": median iterations to " << spec.sinr_target_db
                << " dB min output SINR = " << med << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
