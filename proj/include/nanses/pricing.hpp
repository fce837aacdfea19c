// Copyright 2026 The nanses Authors
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

#ifndef NANSES_PRICING_HPP_
#define NANSES_PRICING_HPP_

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "nanses/common.hpp"
#include "nanses/core.hpp"

namespace nanses {

// Time-of-use tariff faced by the retailer. The grid charges a quadratic cost
// phi*E^2 + delta*E for buying E at step t, which makes the unit price linear
// in the total load.
struct TariffParams {
  std::vector<double> phi;    // cents/kWh^2 per step, > 0
  std::vector<double> delta;  // cents/kWh per step, >= 0
  double e_max = 0.0;         // kWh, cap on total grid load

  void validate(const TimeGrid& grid) const {
    check_length(phi, grid.steps, "tariff phi");
    check_length(delta, grid.steps, "tariff delta");
    for (std::size_t t = 0; t < grid.steps; ++t) {
      NANSES_CHECK(phi[t] > 0.0, ErrorCategory::kUsage,
                   "tariff phi must be positive at step " + std::to_string(t));
      NANSES_CHECK(delta[t] >= 0.0, ErrorCategory::kUsage,
                   "tariff delta must be non-negative at step " + std::to_string(t));
    }
    NANSES_CHECK(e_max > 0.0, ErrorCategory::kUsage, "tariff e_max must be positive");
  }
};

// Cost paid by the retailer for drawing total_load kWh from the grid at t.
inline double grid_cost(double total_load, std::size_t t, const TariffParams& tariff) {
  return tariff.phi[t] * total_load * total_load + tariff.delta[t] * total_load;
}

// Unit energy price paid by the retailer: the derivative-like linear price
// phi*E + delta. Positive pricing requires E > 0, checked separately.
inline double grid_price(double total_load, std::size_t t, const TariffParams& tariff) {
  return tariff.phi[t] * total_load + tariff.delta[t];
}

struct LoadViolation {
  std::size_t step;
  double load;
  bool above_cap;  // false means non-positive load
};

struct LoadReport {
  std::vector<LoadViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Total grid load must stay strictly positive (non-negative pricing) and
// below the grid cap at every step.
inline LoadReport validate_total_load(const std::vector<double>& total_load,
                                      const TariffParams& tariff) {
  LoadReport report;
  for (std::size_t t = 0; t < total_load.size(); ++t) {
    if (total_load[t] <= 0.0) {
      report.violations.push_back({t, total_load[t], false});
    } else if (total_load[t] >= tariff.e_max) {
      report.violations.push_back({t, total_load[t], true});
    }
  }
  return report;
}

// Calibration targets for the two-level TOU tariff. phi is flat off-peak and
// peak_ratio times higher inside the peak window; delta is one constant.
// phi is scaled so the predicted price signal on a reference load spans
// [price_low, price_high], and delta shifts its mean to price_avg.
struct TouCalibration {
  double price_low = 10.0;    // cents/kWh
  double price_high = 55.0;   // cents/kWh
  double price_avg = 25.0;    // cents/kWh
  double peak_ratio = 1.5;    // phi_peak / phi_offpeak
  double peak_start_hour = 16.0;
  double peak_end_hour = 23.0;
  double e_max_factor = 2.0;  // e_max as a multiple of the reference peak load
};

inline bool in_peak_window(const TimeGrid& grid, std::size_t t, const TouCalibration& cal) {
  const double h = grid.step_start_hour(t);
  if (cal.peak_start_hour <= cal.peak_end_hour) {
    return h >= cal.peak_start_hour && h < cal.peak_end_hour;
  }
  return h >= cal.peak_start_hour || h < cal.peak_end_hour;  // window wraps midnight
}

// Builds TariffParams from a reference load profile (typically the no-SES
// baseline load). The reference price signal phi_t*E_ref(t) + delta then has
// range [price_low, price_high] and mean price_avg.
inline TariffParams calibrate_tou(const TimeGrid& grid, const std::vector<double>& reference_load,
                                  const TouCalibration& cal = {}) {
  grid.validate();
  check_length(reference_load, grid.steps, "reference load");
  NANSES_CHECK(cal.price_high > cal.price_low, ErrorCategory::kUsage,
               "TOU calibration needs price_high > price_low");
  NANSES_CHECK(cal.peak_ratio >= 1.0, ErrorCategory::kUsage,
               "TOU peak ratio must be >= 1");

  std::vector<double> shape(grid.steps);  // phi_t / phi_offpeak * E_ref(t)
  double shape_min = 0.0, shape_max = 0.0, shape_mean = 0.0;
  double load_max = 0.0;
  for (std::size_t t = 0; t < grid.steps; ++t) {
    NANSES_CHECK(reference_load[t] > 0.0, ErrorCategory::kUsage,
                 "TOU calibration needs a positive reference load at step " + std::to_string(t));
    const double level = in_peak_window(grid, t, cal) ? cal.peak_ratio : 1.0;
    shape[t] = level * reference_load[t];
    shape_mean += shape[t];
    load_max = std::max(load_max, reference_load[t]);
    if (t == 0) {
      shape_min = shape_max = shape[t];
    } else {
      shape_min = std::min(shape_min, shape[t]);
      shape_max = std::max(shape_max, shape[t]);
    }
  }
  shape_mean /= static_cast<double>(grid.steps);
  NANSES_CHECK(shape_max > shape_min, ErrorCategory::kUsage,
               "TOU calibration needs a non-constant weighted reference load");

  const double phi_offpeak = (cal.price_high - cal.price_low) / (shape_max - shape_min);
  const double delta = cal.price_avg - phi_offpeak * shape_mean;
  NANSES_CHECK(delta >= 0.0, ErrorCategory::kUsage,
               "TOU calibration produced a negative delta; raise price_avg or "
               "narrow the price range");

  TariffParams tariff;
  tariff.phi.resize(grid.steps);
  tariff.delta.assign(grid.steps, delta);
  for (std::size_t t = 0; t < grid.steps; ++t) {
    tariff.phi[t] = phi_offpeak * (in_peak_window(grid, t, cal) ? cal.peak_ratio : 1.0);
  }
  tariff.e_max = cal.e_max_factor * load_max;
  return tariff;
}

}  // namespace nanses

#endif  // NANSES_PRICING_HPP_
