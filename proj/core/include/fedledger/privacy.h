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

#ifndef FEDLEDGER_PRIVACY_H_
#define FEDLEDGER_PRIVACY_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedledger/model.h"
#include "fedledger/personalization.h"
#include "fedledger/rng.h"

namespace fedledger {

struct PrivacySpec {
  double epsilon_target = 8.0;
  double delta = 1e-5;
  double clip_norm = 1.0;
  // sigma_v / sigma_u; personalized coordinates get the smaller sigma_u.
  double noise_split_rho = 2.0;
  std::size_t rounds = 15;

  absl::Status Validate() const;
};

// Orders used for RDP accounting: 1.25, 1.5, 1.75, 2..64, 128, 256.
const std::vector<double>& DefaultAlphaGrid();

// Geometric grid of 200 noise multipliers over [0.3, 64].
const std::vector<double>& NoiseMultiplierGrid();

// Running RDP of a sequence of Gaussian releases. Releases are kept as
// (noise multiplier -> count), so T identical releases accumulate to exactly
// T times the single-release curve.
class AccountantState {
 public:
  AccountantState() : AccountantState(DefaultAlphaGrid()) {}
  explicit AccountantState(std::vector<double> alpha_grid);

  absl::Status ComposeGaussian(double noise_multiplier, uint64_t count = 1);

  const std::vector<double>& alpha_grid() const { return alpha_grid_; }
  std::vector<double> AccumulatedRdp() const;
  uint64_t releases() const { return releases_; }

 private:
  std::vector<double> alpha_grid_;
  std::map<double, uint64_t> releases_by_multiplier_;
  uint64_t releases_ = 0;
};

struct DpGuarantee {
  double epsilon = 0.0;
  double alpha = 0.0;  // order that attains the minimum
};

// b = sensitivity / epsilon.
absl::StatusOr<double> LaplaceScale(double l1_sensitivity, double epsilon);

// sigma = sensitivity * sqrt(2 ln(1.25 / delta)) / epsilon.
absl::StatusOr<double> GaussianSigma(double l2_sensitivity, double epsilon,
                                     double delta);

// RDP of the Gaussian mechanism at order alpha: alpha / (2 z^2).
absl::StatusOr<double> RdpOfGaussian(double noise_multiplier, double alpha);

// epsilon = min over the grid of rdp(alpha) + log(1/delta) / (alpha - 1).
absl::StatusOr<DpGuarantee> RdpToDp(const AccountantState& state, double delta);

// Scales the update by min(1, clip_norm / ||update||).
absl::StatusOr<ParameterVector> ClipUpdate(const ParameterVector& update,
                                           double clip_norm);

// Adds N(0, sigma_u^2) to personalized coordinates and N(0, sigma_v^2) to the
// shared ones. One draw is consumed per coordinate with a positive sigma, in
// index order.
absl::StatusOr<ParameterVector> AdaptiveNoise(const ParameterVector& update,
                                              const PersonalizationMask& mask,
                                              double sigma_u, double sigma_v,
                                              RngStream& rng);

// L2 sensitivity of one clipped update under replace-one neighbours.
inline double ClippedUpdateSensitivity(double clip_norm) {
  return 2.0 * clip_norm;
}

struct NoiseCalibration {
  double noise_multiplier = 0.0;  // sigma_u / sensitivity
  double sensitivity = 0.0;
  double sigma_u = 0.0;
  double sigma_v = 0.0;
  double epsilon = 0.0;  // spent after spec.rounds releases
};

// Smallest grid multiplier z such that spec.rounds Gaussian releases at z
// stay within epsilon_target. Accounting uses sigma_u, the smaller of the two
// noise levels.
absl::StatusOr<NoiseCalibration> CalibrateNoise(const PrivacySpec& spec);

}  // namespace fedledger

#endif  // FEDLEDGER_PRIVACY_H_
