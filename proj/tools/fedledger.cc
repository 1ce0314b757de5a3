//
// Copyright 2026 The fedledger Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "fedledger/experiment.h"
#include "fedledger/ledger.h"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct RunFlags {
  std::string config_path;
  std::vector<double> epsilons;
  std::optional<std::size_t> rounds;
  std::optional<std::size_t> clients;
  std::vector<uint64_t> seeds;
  std::optional<double> delta;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
};

int Fail(int code, const absl::Status& status) {
  absl::FPrintF(stderr, "fedledger: %s\n", status.ToString());
  return code;
}

int RunCommand(const RunFlags& flags) {
  absl::StatusOr<fedledger::ExperimentConfig> config =
      fedledger::LoadConfigFile(flags.config_path);
  if (!config.ok()) return Fail(kConfigError, config.status());
  if (!flags.epsilons.empty()) config->epsilon_sweep = flags.epsilons;
  if (flags.rounds) config->training.global_rounds = *flags.rounds;
  if (flags.clients) config->clients = *flags.clients;
  if (!flags.seeds.empty()) config->seeds = flags.seeds;
  if (flags.delta) config->delta = *flags.delta;
  if (flags.out) config->output_dir = *flags.out;
  if (flags.threads) config->threads = *flags.threads;
  if (absl::Status s = config->Validate(); !s.ok()) return Fail(kConfigError, s);

  absl::StatusOr<fedledger::ExperimentResult> result =
      fedledger::RunExperiment(*config);
  if (!result.ok()) return Fail(kRuntimeError, result.status());
  for (const fedledger::SweepEntry& e : result->entries) {
    if (e.status.ok()) {
      absl::PrintF("eps=%g seed=%d rounds=%d -> %s\n", e.epsilon, e.seed,
                   e.metrics.size(), e.metrics_file);
    } else {
      absl::PrintF("eps=%g seed=%d failed: %s\n", e.epsilon, e.seed,
                   e.status.message());
    }
  }
  absl::PrintF("summary: %s\n", result->summary_file);
  return kOk;
}

int PlotCommand(const std::string& in, const std::string& out) {
  if (absl::Status s = fedledger::EmitPlotData(in, out); !s.ok()) {
    return Fail(kRuntimeError, s);
  }
  absl::PrintF("plot data written to %s\n", out);
  return kOk;
}

int VerifyCommand(const std::string& in, const std::string& keys_path) {
  absl::StatusOr<std::string> text = fedledger::ReadFile(in);
  if (!text.ok()) return Fail(kConfigError, text.status());
  std::optional<fedledger::KeyRegistry> keys;
  if (!keys_path.empty()) {
    absl::StatusOr<std::string> key_text = fedledger::ReadFile(keys_path);
    if (!key_text.ok()) return Fail(kConfigError, key_text.status());
    absl::StatusOr<fedledger::KeyRegistry> parsed = fedledger::ParseKeys(*key_text);
    if (!parsed.ok()) return Fail(kConfigError, parsed.status());
    keys = *std::move(parsed);
  }
  const fedledger::ChainReport report =
      fedledger::VerifyExportedChain(*text, keys ? &*keys : nullptr);
  if (report.valid) {
    absl::PrintF("chain valid%s\n", keys ? " (signatures checked)" : "");
    return kOk;
  }
  if (report.block_index) {
    absl::PrintF("chain invalid at block %d: %s\n", *report.block_index,
                 report.reason);
  } else {
    absl::PrintF("chain invalid: %s\n", report.reason);
  }
  return kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with DP, personalization and an audit ledger"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run an epsilon sweep");
  run->add_option("--config", run_flags.config_path, "key = value config file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--epsilon", run_flags.epsilons, "Epsilon targets (overrides sweep)")
      ->delimiter(',');
  run->add_option("--rounds", run_flags.rounds, "Global rounds");
  run->add_option("--clients", run_flags.clients, "Number of clients");
  run->add_option("--seed", run_flags.seeds, "Seeds")->delimiter(',');
  run->add_option("--delta", run_flags.delta, "Target delta (default 1/clients)");
  run->add_option("--out", run_flags.out, "Output directory");
  run->add_option("--threads", run_flags.threads, "Client worker threads");

  std::string plot_in;
  std::string plot_out;
  CLI::App* plot = app.add_subcommand("plot-data", "Aggregate metrics into plot series");
  plot->add_option("--in", plot_in, "Directory with metrics_*.csv")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  std::string verify_in;
  std::string verify_keys;
  CLI::App* verify = app.add_subcommand("verify-chain", "Verify a chain export");
  verify->add_option("--in", verify_in, "Chain export file")->required();
  verify->add_option("--keys", verify_keys, "Client key file for signature checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) return RunCommand(run_flags);
  if (*plot) return PlotCommand(plot_in, plot_out);
  if (*verify) return VerifyCommand(verify_in, verify_keys);
  return kConfigError;
}
