// Copyright 2026 The bevmap Authors
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

#ifndef BEVMAP_DETAIL_VON_MISES_HPP
#define BEVMAP_DETAIL_VON_MISES_HPP

#include <cmath>
#include <numbers>
#include <random>

namespace bevmap {

template <typename Rng>
double sample_von_mises(double mu, double kappa, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (kappa < 1e-8) return mu + (2.0 * unit(rng) - 1.0) * pi;
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double u1 = unit(rng);
    const double z = std::cos(pi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    const double u2 = unit(rng);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double u3 = unit(rng);
      const double theta = u3 > 0.5 ? std::acos(f) : -std::acos(f);
      return mu + theta;
    }
  }
}

}  // namespace bevmap

#endif  // BEVMAP_DETAIL_VON_MISES_HPP
