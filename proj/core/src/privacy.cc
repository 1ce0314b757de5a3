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

#include "fedledger/privacy.h"

#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace fedledger {
namespace {

constexpr double kMinMultiplier = 0.3;
constexpr double kMaxMultiplier = 64.0;
constexpr int kMultiplierGridSize = 200;

bool Positive(double x) { return x > 0.0 && std::isfinite(x); }

}  // namespace

absl::Status PrivacySpec::Validate() const {
  if (!Positive(epsilon_target)) {
    return absl::InvalidArgumentError("epsilon_target must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0, 1)");
  }
  if (!Positive(clip_norm)) return absl::InvalidArgumentError("clip must be > 0");
  if (!(noise_split_rho >= 1.0) || !std::isfinite(noise_split_rho)) {
    return absl::InvalidArgumentError("noise_split_rho must be >= 1");
  }
  if (rounds == 0) return absl::InvalidArgumentError("rounds must be >= 1");
  return absl::OkStatus();
}

const std::vector<double>& DefaultAlphaGrid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g = {1.25, 1.5, 1.75};
    for (int a = 2; a <= 64; ++a) g.push_back(a);
    g.push_back(128);
    g.push_back(256);
    return g;
  }();
  return grid;
}

const std::vector<double>& NoiseMultiplierGrid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g(kMultiplierGridSize);
    const double ratio = kMaxMultiplier / kMinMultiplier;
    for (int i = 0; i < kMultiplierGridSize; ++i) {
      g[i] = kMinMultiplier *
             std::pow(ratio, static_cast<double>(i) / (kMultiplierGridSize - 1));
    }
    g.back() = kMaxMultiplier;
    return g;
  }();
  return grid;
}

AccountantState::AccountantState(std::vector<double> alpha_grid)
    : alpha_grid_(std::move(alpha_grid)) {}

absl::Status AccountantState::ComposeGaussian(double noise_multiplier,
                                              uint64_t count) {
  if (!Positive(noise_multiplier)) {
    return absl::InvalidArgumentError("noise multiplier must be > 0");
  }
  releases_by_multiplier_[noise_multiplier] += count;
  releases_ += count;
  return absl::OkStatus();
}

std::vector<double> AccountantState::AccumulatedRdp() const {
  std::vector<double> rdp(alpha_grid_.size(), 0.0);
  for (std::size_t i = 0; i < alpha_grid_.size(); ++i) {
    for (const auto& [z, count] : releases_by_multiplier_) {
      rdp[i] += static_cast<double>(count) * (alpha_grid_[i] / (2.0 * z * z));
    }
  }
  return rdp;
}

absl::StatusOr<double> LaplaceScale(double l1_sensitivity, double epsilon) {
  if (!Positive(l1_sensitivity) || !Positive(epsilon)) {
    return absl::InvalidArgumentError(
        "Laplace scale needs positive sensitivity and epsilon");
  }
  return l1_sensitivity / epsilon;
}

absl::StatusOr<double> GaussianSigma(double l2_sensitivity, double epsilon,
                                     double delta) {
  if (!Positive(l2_sensitivity) || !Positive(epsilon)) {
    return absl::InvalidArgumentError(
        "Gaussian sigma needs positive sensitivity and epsilon");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0, 1)");
  }
  return l2_sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

absl::StatusOr<double> RdpOfGaussian(double noise_multiplier, double alpha) {
  if (!Positive(noise_multiplier)) {
    return absl::InvalidArgumentError("noise multiplier must be > 0");
  }
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    return absl::InvalidArgumentError("RDP order must be > 1");
  }
  return alpha / (2.0 * noise_multiplier * noise_multiplier);
}

absl::StatusOr<DpGuarantee> RdpToDp(const AccountantState& state,
                                    double delta) {
  if (state.releases() == 0) {
    return absl::FailedPreconditionError("accountant has no releases");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must be in (0, 1)");
  }
  const std::vector<double> rdp = state.AccumulatedRdp();
  const double log_inv_delta = std::log(1.0 / delta);
  DpGuarantee best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < rdp.size(); ++i) {
    const double alpha = state.alpha_grid()[i];
    const double eps = rdp[i] + log_inv_delta / (alpha - 1.0);
    if (eps < best.epsilon) best = {eps, alpha};
  }
  return best;
}

absl::StatusOr<ParameterVector> ClipUpdate(const ParameterVector& update,
                                           double clip_norm) {
  if (!Positive(clip_norm)) return absl::InvalidArgumentError("clip must be > 0");
  const double norm = update.L2Norm();
  if (norm <= clip_norm) return update;
  ParameterVector clipped = update;
  const double scale = clip_norm / norm;
  for (double& v : clipped.mutable_values()) v *= scale;
  return clipped;
}

absl::StatusOr<ParameterVector> AdaptiveNoise(const ParameterVector& update,
                                              const PersonalizationMask& mask,
                                              double sigma_u, double sigma_v,
                                              RngStream& rng) {
  if (!(sigma_u >= 0.0) || !(sigma_v >= 0.0) || !std::isfinite(sigma_v)) {
    return absl::InvalidArgumentError("noise levels must be >= 0");
  }
  if (sigma_u > sigma_v) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "sigma_u (%g) must not exceed sigma_v (%g)", sigma_u, sigma_v));
  }
  if (!(update.layout() == mask.layout())) {
    return absl::FailedPreconditionError("mask layout does not match update");
  }
  ParameterVector noisy = update;
  std::span<double> out = noisy.mutable_values();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double sigma = mask.personalized(j) ? sigma_u : sigma_v;
    if (sigma > 0.0) out[j] += sigma * rng.Gaussian();
  }
  return noisy;
}

absl::StatusOr<NoiseCalibration> CalibrateNoise(const PrivacySpec& spec) {
  if (absl::Status s = spec.Validate(); !s.ok()) return s;
  for (double z : NoiseMultiplierGrid()) {
    AccountantState state;
    if (absl::Status s = state.ComposeGaussian(z, spec.rounds); !s.ok()) {
      return s;
    }
    absl::StatusOr<DpGuarantee> dp = RdpToDp(state, spec.delta);
    if (!dp.ok()) return dp.status();
    if (dp->epsilon <= spec.epsilon_target) {
      NoiseCalibration cal;
      cal.noise_multiplier = z;
      cal.sensitivity = ClippedUpdateSensitivity(spec.clip_norm);
      cal.sigma_u = z * cal.sensitivity;
      cal.sigma_v = spec.noise_split_rho * cal.sigma_u;
      cal.epsilon = dp->epsilon;
      return cal;
    }
  }
  return absl::ResourceExhaustedError(absl::StrFormat(
      "infeasible privacy budget: epsilon %g at delta %g over %d rounds needs "
      "a noise multiplier above %g",
      spec.epsilon_target, spec.delta, spec.rounds, kMaxMultiplier));
}

}  // namespace fedledger
