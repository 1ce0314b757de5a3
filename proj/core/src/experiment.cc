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

#include "fedledger/experiment.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_replace.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "fedledger/data.h"

namespace fedledger {
namespace {

namespace fs = std::filesystem;

constexpr char kMetricsHeader[] =
    "round,epsilon_target,seed,mean_accuracy,mean_loss,epsilon_spent,"
    "gas_total,mean_latency_s,store_total_bytes,global_accuracy";
constexpr char kSummaryHeader[] =
    "epsilon_target,num_seeds,rounds,mean_accuracy,mean_loss,epsilon_spent,"
    "gas_total,mean_latency_s,store_total_bytes,global_accuracy,status";
constexpr char kPlotHeader[] = "epsilon_target,round,mean,num_seeds";

absl::Status BadValue(absl::string_view key, absl::string_view value) {
  return absl::InvalidArgumentError(
      absl::StrCat("invalid value '", value, "' for ", key));
}

absl::Status ParseSize(absl::string_view key, absl::string_view v, std::size_t& out) {
  uint64_t x;
  if (!absl::SimpleAtoi(v, &x)) return BadValue(key, v);
  out = static_cast<std::size_t>(x);
  return absl::OkStatus();
}

absl::Status ParseU64(absl::string_view key, absl::string_view v, uint64_t& out) {
  if (!absl::SimpleAtoi(v, &out)) return BadValue(key, v);
  return absl::OkStatus();
}

absl::Status ParseReal(absl::string_view key, absl::string_view v, double& out) {
  if (!absl::SimpleAtod(v, &out) || !std::isfinite(out)) return BadValue(key, v);
  return absl::OkStatus();
}

template <typename T, typename Fn>
absl::Status ParseList(absl::string_view key, absl::string_view v,
                       std::vector<T>& out, Fn parse_one) {
  std::vector<T> values;
  for (absl::string_view item : absl::StrSplit(v, ',')) {
    T x;
    if (absl::Status s = parse_one(key, absl::StripAsciiWhitespace(item), x); !s.ok()) {
      return s;
    }
    values.push_back(x);
  }
  if (values.empty()) return BadValue(key, v);
  out = std::move(values);
  return absl::OkStatus();
}

std::string Num(double v) { return absl::StrFormat("%.9g", v); }

std::string EpsilonTag(double eps) { return absl::StrFormat("%g", eps); }

std::string EntryStem(double eps, uint64_t seed) {
  return absl::StrCat("eps", EpsilonTag(eps), "_seed", seed);
}

std::string FormatSummary(const ExperimentConfig& config,
                          const std::vector<SweepEntry>& entries) {
  std::string out = absl::StrCat(kSummaryHeader, "\n");
  for (double eps : config.epsilon_sweep) {
    std::vector<const MetricsRecord*> finals;
    std::string failure;
    for (const SweepEntry& e : entries) {
      if (e.epsilon != eps) continue;
      if (!e.status.ok()) {
        if (failure.empty()) failure = std::string(e.status.message());
        continue;
      }
      if (!e.metrics.empty()) finals.push_back(&e.metrics.back());
    }
    const std::size_t rounds = config.training.global_rounds;
    if (finals.empty()) {
      std::string status = "no rounds";
      if (!failure.empty()) {
        status = absl::StrCat("failed: ", absl::StrReplaceAll(
                                              failure, {{",", ";"}, {"\n", " "}}));
      }
      absl::StrAppend(&out, Num(eps), ",0,", rounds, ",,,,,,,,", status, "\n");
      continue;
    }
    const double n = static_cast<double>(finals.size());
    auto mean = [&](auto field) {
      double sum = 0.0;
      for (const MetricsRecord* m : finals) sum += static_cast<double>(field(*m));
      return sum / n;
    };
    std::string status = failure.empty() ? "ok" : "partial";
    absl::StrAppend(
        &out, Num(eps), ",", finals.size(), ",", rounds, ",",
        Num(mean([](const MetricsRecord& m) { return m.mean_accuracy; })), ",",
        Num(mean([](const MetricsRecord& m) { return m.mean_loss; })), ",",
        Num(mean([](const MetricsRecord& m) { return m.epsilon_spent; })), ",",
        Num(mean([](const MetricsRecord& m) { return m.gas_total; })), ",",
        Num(mean([](const MetricsRecord& m) { return m.mean_latency_s; })), ",",
        Num(mean([](const MetricsRecord& m) { return m.store_total_bytes; })), ",",
        Num(mean([](const MetricsRecord& m) { return m.global_accuracy; })), ",",
        status, "\n");
  }
  return out;
}

absl::StatusOr<SweepEntry> RunEntry(const ExperimentConfig& config,
                                    const Dataset& full, double eps,
                                    uint64_t seed) {
  SweepEntry entry;
  entry.epsilon = eps;
  entry.seed = seed;

  absl::StatusOr<TrainTestSplit> split =
      SplitTrainTest(full, config.train_fraction, seed);
  if (!split.ok()) return split.status();
  absl::StatusOr<ClientPartition> partition =
      Partition(split->train, config.clients, config.dirichlet_beta, seed);
  if (!partition.ok()) return partition.status();

  TrainingConfig training = config.training;
  training.seed = seed;
  PrivacySpec privacy;
  privacy.epsilon_target = eps;
  privacy.delta = config.EffectiveDelta();
  privacy.clip_norm = config.clip_norm;
  privacy.noise_split_rho = config.noise_split_rho;
  privacy.rounds = std::max<std::size_t>(1, training.global_rounds);

  LedgerConfig ledger_config;
  ledger_config.base_gas = config.base_gas;
  ledger_config.latency_mean_s = config.latency_mean_s;
  ledger_config.latency_jitter_s = config.latency_jitter_s;
  ledger_config.seed = seed;
  Ledger ledger(ledger_config);

  const std::string stem = EntryStem(eps, seed);
  std::optional<ContentStore> store;
  if (config.cas_directory) {
    absl::StatusOr<ContentStore> dir_store = ContentStore::WithDirectory(
        (fs::path(config.output_dir) / absl::StrCat("blobs_", stem)).string());
    if (!dir_store.ok()) return dir_store.status();
    store.emplace(*std::move(dir_store));
  } else {
    store.emplace();
  }

  RunOptions options;
  options.threads = config.threads;
  absl::StatusOr<TrainingRun> run = RunTraining(
      split->train, split->test, *partition, privacy, training, ledger, *store, options);
  if (!run.ok()) {
    entry.status = run.status();
    return entry;
  }
  for (const RoundResult& r : run->rounds) entry.metrics.push_back(r.metrics);

  const fs::path dir(config.output_dir);
  entry.metrics_file = (dir / absl::StrCat("metrics_", stem, ".csv")).string();
  if (absl::Status s = WriteFileAtomic(entry.metrics_file, FormatMetricsCsv(entry.metrics));
      !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteFileAtomic(
          (dir / absl::StrCat("chain_", stem, ".txt")).string(),
          ExportChain(ledger.blocks()));
      !s.ok()) {
    return s;
  }
  if (absl::Status s = WriteFileAtomic(
          (dir / absl::StrCat("keys_", stem, ".txt")).string(),
          ExportKeys(ledger.keys()));
      !s.ok()) {
    return s;
  }
  return entry;
}

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  if (absl::Status s = training.Validate(); !s.ok()) return s;
  if (clients == 0) return absl::InvalidArgumentError("clients must be >= 1");
  if (data_csv.empty()) {
    if (num_classes < 2) return absl::InvalidArgumentError("num_classes must be >= 2");
    if (num_samples < num_classes) {
      return absl::InvalidArgumentError("num_samples must be >= num_classes");
    }
    if (input_dim == 0) return absl::InvalidArgumentError("input_dim must be >= 1");
    if (!(class_separation >= 0.0)) {
      return absl::InvalidArgumentError("class_separation must be >= 0");
    }
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    return absl::InvalidArgumentError("train_fraction must be in (0, 1)");
  }
  if (!(dirichlet_beta > 0.0)) return absl::InvalidArgumentError("dirichlet_beta must be > 0");
  if (!(clip_norm > 0.0)) return absl::InvalidArgumentError("clip must be > 0");
  if (!(noise_split_rho >= 1.0)) return absl::InvalidArgumentError("noise_split must be >= 1");
  const double d = EffectiveDelta();
  if (!(d > 0.0 && d < 1.0)) return absl::InvalidArgumentError("delta must be in (0, 1)");
  if (epsilon_sweep.empty()) return absl::InvalidArgumentError("epsilon sweep is empty");
  for (double e : epsilon_sweep) {
    if (!(e > 0.0)) return absl::InvalidArgumentError("epsilon values must be > 0");
  }
  if (seeds.empty()) return absl::InvalidArgumentError("at least one seed is required");
  if (base_gas == 0) return absl::InvalidArgumentError("base_gas must be > 0");
  if (!(latency_mean_s > 0.0) || !(latency_jitter_s >= 0.0)) {
    return absl::InvalidArgumentError("latency mean must be > 0 and jitter >= 0");
  }
  if (!(gas_price_gwei >= 0.0)) return absl::InvalidArgumentError("gas price must be >= 0");
  if (output_dir.empty()) return absl::InvalidArgumentError("output directory is empty");
  if (threads == 0) return absl::InvalidArgumentError("threads must be >= 1");
  return absl::OkStatus();
}

namespace {

absl::Status ApplySettingImpl(ExperimentConfig& c, absl::string_view key,
                              absl::string_view value) {
  value = absl::StripAsciiWhitespace(value);
  TrainingConfig& t = c.training;
  if (key == "rounds") return ParseSize(key, value, t.global_rounds);
  if (key == "local_epochs") return ParseSize(key, value, t.local_epochs);
  if (key == "learning_rate") return ParseReal(key, value, t.learning_rate);
  if (key == "lambda1") return ParseReal(key, value, t.lambda1);
  if (key == "lambda2") return ParseReal(key, value, t.lambda2);
  if (key == "tau") return ParseReal(key, value, t.tau);
  if (key == "batch_size") return ParseSize(key, value, t.batch_size);
  if (key == "hidden_units") return ParseSize(key, value, t.hidden_units);
  if (key == "fisher_samples") return ParseSize(key, value, t.fisher_samples);
  if (key == "aggregation") {
    if (value == "uniform") {
      t.aggregation = Aggregation::kUniform;
    } else if (value == "weighted") {
      t.aggregation = Aggregation::kWeighted;
    } else {
      return BadValue(key, value);
    }
    return absl::OkStatus();
  }
  if (key == "data_csv") {
    c.data_csv = std::string(value);
    return absl::OkStatus();
  }
  if (key == "num_samples") return ParseSize(key, value, c.num_samples);
  if (key == "num_classes") return ParseSize(key, value, c.num_classes);
  if (key == "input_dim") return ParseSize(key, value, c.input_dim);
  if (key == "class_separation") return ParseReal(key, value, c.class_separation);
  if (key == "train_fraction") return ParseReal(key, value, c.train_fraction);
  if (key == "clients") return ParseSize(key, value, c.clients);
  if (key == "dirichlet_beta") return ParseReal(key, value, c.dirichlet_beta);
  if (key == "clip") return ParseReal(key, value, c.clip_norm);
  if (key == "noise_split") return ParseReal(key, value, c.noise_split_rho);
  if (key == "delta") {
    double d;
    if (absl::Status s = ParseReal(key, value, d); !s.ok()) return s;
    c.delta = d;
    return absl::OkStatus();
  }
  if (key == "epsilons") return ParseList(key, value, c.epsilon_sweep, ParseReal);
  if (key == "seeds") return ParseList(key, value, c.seeds, ParseU64);
  if (key == "base_gas") return ParseU64(key, value, c.base_gas);
  if (key == "gas_price_gwei") return ParseReal(key, value, c.gas_price_gwei);
  if (key == "latency_mean") return ParseReal(key, value, c.latency_mean_s);
  if (key == "latency_jitter") return ParseReal(key, value, c.latency_jitter_s);
  if (key == "cas_directory") {
    if (value == "true") {
      c.cas_directory = true;
    } else if (value == "false") {
      c.cas_directory = false;
    } else {
      return BadValue(key, value);
    }
    return absl::OkStatus();
  }
  if (key == "out") {
    c.output_dir = std::string(value);
    return absl::OkStatus();
  }
  if (key == "threads") return ParseSize(key, value, c.threads);
  return absl::InvalidArgumentError(absl::StrCat("unknown config key '", key, "'"));
}

absl::string_view Absl(std::string_view s) { return {s.data(), s.size()}; }

}  // namespace

absl::Status ApplySetting(ExperimentConfig& c, std::string_view key,
                          std::string_view value) {
  return ApplySettingImpl(c, Absl(key), Absl(value));
}

absl::StatusOr<ExperimentConfig> ParseConfig(std::string_view text) {
  ExperimentConfig config;
  std::size_t line_no = 0;
  for (absl::string_view line : absl::StrSplit(Absl(text), '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != absl::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", line_no, ": expected key = value"));
    }
    const absl::string_view key = absl::StripAsciiWhitespace(line.substr(0, eq));
    if (absl::Status s = ApplySettingImpl(config, key, line.substr(eq + 1)); !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", line_no, ": ", s.message()));
    }
  }
  return config;
}

absl::StatusOr<ExperimentConfig> LoadConfigFile(const std::string& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  return ParseConfig(*text);
}

std::string_view MetricsHeader() { return kMetricsHeader; }

std::string FormatMetricsCsv(const std::vector<MetricsRecord>& records) {
  std::string out = absl::StrCat(kMetricsHeader, "\n");
  for (const MetricsRecord& m : records) {
    absl::StrAppend(&out, m.round, ",", Num(m.epsilon_target), ",", m.seed, ",",
                    Num(m.mean_accuracy), ",", Num(m.mean_loss), ",",
                    Num(m.epsilon_spent), ",", m.gas_total, ",",
                    Num(m.mean_latency_s), ",", m.store_total_bytes, ",",
                    Num(m.global_accuracy), "\n");
  }
  return out;
}

absl::StatusOr<std::vector<MetricsRecord>> ParseMetricsCsv(std::string_view text) {
  std::vector<absl::string_view> lines = absl::StrSplit(Absl(text), '\n', absl::SkipWhitespace());
  if (lines.empty() || absl::StripAsciiWhitespace(lines[0]) != kMetricsHeader) {
    return absl::InvalidArgumentError("metrics file has an unexpected header");
  }
  std::vector<MetricsRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::vector<absl::string_view> f =
        absl::StrSplit(absl::StripAsciiWhitespace(lines[i]), ',');
    MetricsRecord m;
    uint64_t store_bytes = 0;
    if (f.size() != 10 || !absl::SimpleAtoi(f[0], &m.round) ||
        !absl::SimpleAtod(f[1], &m.epsilon_target) || !absl::SimpleAtoi(f[2], &m.seed) ||
        !absl::SimpleAtod(f[3], &m.mean_accuracy) || !absl::SimpleAtod(f[4], &m.mean_loss) ||
        !absl::SimpleAtod(f[5], &m.epsilon_spent) || !absl::SimpleAtoi(f[6], &m.gas_total) ||
        !absl::SimpleAtod(f[7], &m.mean_latency_s) || !absl::SimpleAtoi(f[8], &store_bytes) ||
        !absl::SimpleAtod(f[9], &m.global_accuracy)) {
      return absl::InvalidArgumentError(absl::StrCat("malformed metrics row ", i + 1));
    }
    m.store_total_bytes = static_cast<std::size_t>(store_bytes);
    out.push_back(m);
  }
  return out;
}

absl::StatusOr<ExperimentResult> RunExperiment(const ExperimentConfig& config) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) {
    return absl::UnavailableError(
        absl::StrCat("cannot create ", config.output_dir, ": ", ec.message()));
  }

  std::optional<Dataset> csv_data;
  if (!config.data_csv.empty()) {
    absl::StatusOr<Dataset> loaded = LoadCsv(config.data_csv);
    if (!loaded.ok()) return loaded.status();
    csv_data = *std::move(loaded);
  }

  ExperimentResult result;
  for (uint64_t seed : config.seeds) {
    Dataset data;
    if (csv_data) {
      data = *csv_data;
    } else {
      absl::StatusOr<Dataset> generated =
          GenerateSynthetic(config.num_samples, config.num_classes,
                            config.input_dim, config.class_separation, seed);
      if (!generated.ok()) return generated.status();
      data = *std::move(generated);
    }
    for (double eps : config.epsilon_sweep) {
      absl::StatusOr<SweepEntry> entry = RunEntry(config, data, eps, seed);
      if (!entry.ok()) return entry.status();
      result.entries.push_back(*std::move(entry));
    }
  }
  // Order entries by epsilon, then seed, independent of loop nesting.
  std::stable_sort(result.entries.begin(), result.entries.end(),
                   [](const SweepEntry& a, const SweepEntry& b) {
                     return a.epsilon < b.epsilon;
                   });
  result.summary_file = (fs::path(config.output_dir) / "summary.csv").string();
  if (absl::Status s = WriteFileAtomic(result.summary_file,
                                       FormatSummary(config, result.entries));
      !s.ok()) {
    return s;
  }
  return result;
}

absl::Status EmitPlotData(const std::string& metrics_dir,
                          const std::string& out_dir) {
  std::error_code ec;
  if (!fs::is_directory(metrics_dir, ec)) {
    return absl::NotFoundError(absl::StrCat(metrics_dir, " is not a directory"));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(metrics_dir, ec)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("metrics_") &&
        name.ends_with(".csv")) {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    return absl::NotFoundError(absl::StrCat("no metrics files in ", metrics_dir));
  }
  std::sort(files.begin(), files.end());

  struct Acc {
    double sum = 0.0;
    std::size_t count = 0;
  };
  // series -> epsilon -> round -> accumulator
  std::map<std::string, std::map<double, std::map<uint32_t, Acc>>> series;
  for (const fs::path& file : files) {
    absl::StatusOr<std::string> text = ReadFile(file.string());
    if (!text.ok()) return text.status();
    absl::StatusOr<std::vector<MetricsRecord>> rows = ParseMetricsCsv(*text);
    if (!rows.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(file.string(), ": ", rows.status().message()));
    }
    for (const MetricsRecord& m : *rows) {
      auto add = [&](const std::string& name, double v) {
        Acc& a = series[name][m.epsilon_target][m.round];
        a.sum += v;
        ++a.count;
      };
      add("accuracy", m.mean_accuracy);
      add("loss", m.mean_loss);
      add("latency", m.mean_latency_s);
      add("gas", static_cast<double>(m.gas_total));
    }
  }

  fs::create_directories(out_dir, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("cannot create ", out_dir));
  for (const char* name : {"accuracy", "loss", "latency", "gas"}) {
    std::string out = absl::StrCat(kPlotHeader, "\n");
    for (const auto& [eps, rounds] : series[name]) {
      for (const auto& [round, acc] : rounds) {
        absl::StrAppend(&out, Num(eps), ",", round, ",",
                        Num(acc.sum / static_cast<double>(acc.count)), ",",
                        acc.count, "\n");
      }
    }
    if (absl::Status s = WriteFileAtomic(
            (fs::path(out_dir) / absl::StrCat("plot_", name, ".csv")).string(), out);
        !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

absl::Status WriteFileAtomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", tmp));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("rename to ", path, ": ", ec.message()));
  return absl::OkStatus();
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fedledger
