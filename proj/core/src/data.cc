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

#include "fedledger/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedledger/rng.h"
#include "text_util.h"

namespace fedledger {
namespace {

absl::Status ParseError(std::size_t line, std::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("line ", line, ": ", internal::ToAbsl(what)));
}

bool ParseDouble(std::string_view text, double& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool ParseInt(std::string_view text, int64_t& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

}  // namespace

Batch Dataset::Gather(std::span<const std::size_t> indices) const {
  Batch batch;
  batch.inputs = Matrix(indices.size(), inputs.cols);
  batch.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::span<const double> src = inputs.Row(indices[r]);
    std::copy(src.begin(), src.end(), batch.inputs.MutableRow(r).begin());
    batch.labels.push_back(labels[indices[r]]);
  }
  return batch;
}

Batch Dataset::AsBatch() const { return Batch{inputs, labels}; }

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Batch b = Gather(indices);
  return Dataset{std::move(b.inputs), std::move(b.labels), num_classes};
}

std::size_t ClientPartition::total_size() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.size();
  return n;
}

absl::StatusOr<Dataset> GenerateSynthetic(std::size_t num_samples,
                                          std::size_t num_classes,
                                          std::size_t input_dim,
                                          double class_separation,
                                          uint64_t seed) {
  if (num_classes == 0 || num_samples == 0) {
    return absl::InvalidArgumentError("need at least one class and sample");
  }
  if (num_samples < num_classes) {
    return absl::InvalidArgumentError("num_samples must be >= num_classes");
  }
  if (input_dim == 0) return absl::InvalidArgumentError("input_dim must be >= 1");
  if (!(class_separation >= 0.0) || !std::isfinite(class_separation)) {
    return absl::InvalidArgumentError("class_separation must be >= 0");
  }

  RngStream rng(seed, 0, 0, StreamPurpose::kDataGeneration);
  // Two independent random directions of length r sit r*sqrt(2) apart.
  const double radius = class_separation / std::sqrt(2.0);
  Matrix means(num_classes, input_dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::span<double> mu = means.MutableRow(c);
    double norm = 0.0;
    for (double& v : mu) {
      v = rng.Gaussian();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : mu) v = norm > 0.0 ? v / norm * radius : 0.0;
  }

  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), 0);
  Shuffle(order, rng);

  Dataset ds;
  ds.num_classes = num_classes;
  ds.inputs = Matrix(num_samples, input_dim);
  ds.labels.resize(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) {
    const auto label = static_cast<int32_t>(order[i] % num_classes);
    ds.labels[i] = label;
    std::span<const double> mu = means.Row(label);
    std::span<double> x = ds.inputs.MutableRow(i);
    for (std::size_t j = 0; j < input_dim; ++j) x[j] = mu[j] + rng.Gaussian();
  }
  return ds;
}

absl::StatusOr<TrainTestSplit> SplitTrainTest(const Dataset& dataset,
                                              double train_fraction,
                                              uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    return absl::InvalidArgumentError("train_fraction must be in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    return absl::InvalidArgumentError("dataset too small to split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, 0, 0, StreamPurpose::kSplit);
  Shuffle(order, rng);
  std::span<const std::size_t> all(order);
  return TrainTestSplit{dataset.Subset(all.first(n_train)),
                        dataset.Subset(all.subspan(n_train))};
}

absl::StatusOr<ClientPartition> Partition(const Dataset& dataset,
                                          std::size_t num_clients,
                                          double dirichlet_beta,
                                          uint64_t seed) {
  if (num_clients == 0) return absl::InvalidArgumentError("K must be >= 1");
  if (!(dirichlet_beta > 0.0) || !std::isfinite(dirichlet_beta)) {
    return absl::InvalidArgumentError("dirichlet_beta must be > 0");
  }
  if (num_clients > dataset.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "K = ", num_clients, " exceeds the ", dataset.size(), " samples"));
  }

  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
  }

  RngStream rng(seed, 0, 0, StreamPurpose::kPartition);
  ClientPartition part;
  part.shards.resize(num_clients);
  std::vector<double> props(num_clients);
  for (auto& members : by_class) {
    if (members.empty()) continue;
    Shuffle(members, rng);
    double total = 0.0;
    for (double& p : props) {
      p = rng.Gamma(dirichlet_beta);
      total += p;
    }
    // Cut points at floor(cumulative share * n_c); the last shard takes the rest.
    const double n_c = static_cast<double>(members.size());
    double cumulative = 0.0;
    std::size_t begin = 0;
    for (std::size_t k = 0; k < num_clients; ++k) {
      std::size_t end = members.size();
      if (k + 1 < num_clients) {
        cumulative += total > 0.0 ? props[k] / total : 1.0 / num_clients;
        end = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::floor(cumulative * n_c)), begin,
            members.size());
      }
      part.shards[k].insert(part.shards[k].end(), members.begin() + begin,
                            members.begin() + end);
      begin = end;
    }
  }

  for (std::size_t k = 0; k < num_clients; ++k) {
    if (!part.shards[k].empty()) continue;
    auto largest = std::max_element(
        part.shards.begin(), part.shards.end(),
        [](const auto& a, const auto& b) { return a.size() < b.size(); });
    part.shards[k].push_back(largest->back());
    largest->pop_back();
  }
  for (auto& shard : part.shards) std::sort(shard.begin(), shard.end());
  return part;
}

absl::StatusOr<Dataset> LoadCsv(const std::string& path,
                                std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));

  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  // Header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!Trim(line).empty()) break;
  }
  if (Trim(line).empty()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": empty dataset"));
  }
  {
    std::vector<std::string_view> cols = internal::Split(Trim(line), ',');
    if (cols.size() < 2 || Trim(cols.back()) != "label") {
      return ParseError(line_no, "header must be f0,...,f{m-1},label");
    }
    for (std::size_t j = 0; j + 1 < cols.size(); ++j) {
      if (Trim(cols[j]) != absl::StrCat("f", j)) {
        return ParseError(line_no, absl::StrCat("expected header column f", j));
      }
    }
    width = cols.size() - 1;
  }

  Dataset ds;
  ds.inputs.cols = width;
  int64_t max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = Trim(line);
    if (row.empty()) continue;
    std::vector<std::string_view> cols = internal::Split(row, ',');
    if (cols.size() != width + 1) {
      return ParseError(line_no, absl::StrCat("expected ", width + 1,
                                              " fields, got ", cols.size()));
    }
    for (std::size_t j = 0; j < width; ++j) {
      double v;
      if (!ParseDouble(Trim(cols[j]), v)) {
        return ParseError(line_no, absl::StrCat("bad number in column f", j));
      }
      if (!std::isfinite(v)) {
        return ParseError(line_no, absl::StrCat("non-finite value in f", j));
      }
      ds.inputs.data.push_back(v);
    }
    int64_t label;
    if (!ParseInt(Trim(cols[width]), label)) {
      return ParseError(line_no, "label is not an integer");
    }
    if (label < 0 || (num_classes && static_cast<uint64_t>(label) >= *num_classes)) {
      return absl::OutOfRangeError(
          absl::StrCat("line ", line_no, ": label ", label, " out of range"));
    }
    max_label = std::max(max_label, label);
    ds.labels.push_back(static_cast<int32_t>(label));
  }
  if (ds.labels.empty()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": empty dataset"));
  }
  ds.inputs.rows = ds.labels.size();
  ds.num_classes = num_classes ? *num_classes
                               : static_cast<std::size_t>(max_label + 1);
  return ds;
}

absl::Status WriteCsv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (std::size_t j = 0; j < dataset.input_dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (double v : dataset.inputs.Row(r)) out << absl::StrFormat("%.17g,", v);
    out << dataset.labels[r] << '\n';
  }
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("short write to ", path));
  return absl::OkStatus();
}

}  // namespace fedledger
