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

#ifndef NANSES_SCENARIO_HPP_
#define NANSES_SCENARIO_HPP_

// Scenario construction and ingestion. The shipped base profiles are
// synthetic but keep the structure the results depend on: a double-peaked
// demand day (morning bump, 16:00-23:00 evening peak) and a midday PV bell
// small enough that the neighborhood stays a net importer at every step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nanses/common.hpp"
#include "nanses/core.hpp"
#include "nanses/pricing.hpp"
#include "nanses/rng.hpp"

namespace nanses {

struct Scenario {
  TimeGrid grid;
  std::vector<UserProfile> users;
  SesParams ses;
  TariffParams tariff;
  std::uint64_t seed = 1;

  std::size_t participating_count() const {
    std::size_t n = 0;
    for (const auto& u : users) n += u.participating ? 1 : 0;
    return n;
  }

  // Exogenous grid load from non-participating users: E_N(t) = sum (d - g).
  std::vector<double> exogenous_load() const {
    std::vector<double> e_n(grid.steps, 0.0);
    for (const auto& u : users) {
      if (u.participating) continue;
      for (std::size_t t = 0; t < grid.steps; ++t) e_n[t] += u.demand[t] - u.generation[t];
    }
    return e_n;
  }

  // Truthful declared surpluses of participating users, grouped per step.
  // Column order matches participating_ids().
  std::vector<std::vector<double>> truthful_reports_by_step() const {
    std::vector<std::vector<double>> by_step(grid.steps);
    for (const auto& u : users) {
      if (!u.participating) continue;
      for (std::size_t t = 0; t < grid.steps; ++t) {
        by_step[t].push_back(u.generation[t] - u.demand[t]);
      }
    }
    return by_step;
  }

  std::vector<std::string> participating_ids() const {
    std::vector<std::string> ids;
    for (const auto& u : users) {
      if (u.participating) ids.push_back(u.id);
    }
    return ids;
  }

  // Baseline grid load with no SES: everyone trades only with the grid.
  std::vector<double> baseline_load() const {
    std::vector<double> load(grid.steps, 0.0);
    for (const auto& u : users) {
      for (std::size_t t = 0; t < grid.steps; ++t) load[t] += u.demand[t] - u.generation[t];
    }
    return load;
  }

  void validate() const {
    grid.validate();
    ses.validate();
    tariff.validate(grid);
    NANSES_CHECK(participating_count() >= 1, ErrorCategory::kUsage,
                 "scenario needs at least one participating user");
    std::set<std::string> ids;
    for (const auto& u : users) {
      u.validate(grid);
      NANSES_CHECK(ids.insert(u.id).second, ErrorCategory::kUsage,
                   "duplicate user id " + u.id);
    }
  }
};

// ---------------------------------------------------------------------------
// Synthetic base profiles.

// Defaults keep the community a net importer at every step even when all 40
// households participate (total PV below total demand), while the scaled-down
// demand profiles still dip under the PV bell around noon so surplus users
// exist.
struct BaseProfileParams {
  double daily_demand_kwh = 18.0;  // per household
  double daily_pv_kwh = 3.4;       // per participating household
};

// Normalized double-peaked demand day (morning bump, evening peak, midday
// plateau), in kWh per step summing to daily_demand_kwh.
inline std::vector<double> base_demand_profile(const TimeGrid& grid,
                                               double daily_demand_kwh) {
  std::vector<double> d(grid.steps);
  double total = 0.0;
  for (std::size_t t = 0; t < grid.steps; ++t) {
    const double h = grid.step_start_hour(t) + 0.5 * grid.step_hours;
    const double morning = 0.55 * std::exp(-0.5 * std::pow((h - 7.5) / 1.6, 2));
    const double evening = 1.90 * std::exp(-0.5 * std::pow((h - 19.0) / 1.5, 2));
    const double daytime = 0.50 * std::exp(-0.5 * std::pow((h - 13.0) / 3.5, 2));
    d[t] = 0.55 + morning + evening + daytime;
    total += d[t];
  }
  for (double& v : d) v *= daily_demand_kwh / total;
  return d;
}

// Midday PV bell in kWh per step summing to daily_pv_kwh.
inline std::vector<double> base_pv_profile(const TimeGrid& grid, double daily_pv_kwh) {
  std::vector<double> g(grid.steps);
  double total = 0.0;
  for (std::size_t t = 0; t < grid.steps; ++t) {
    const double h = grid.step_start_hour(t) + 0.5 * grid.step_hours;
    const double bell = std::exp(-0.5 * std::pow((h - 12.5) / 2.1, 2));
    g[t] = (h >= 6.0 && h <= 19.0 && bell > 0.01) ? bell : 0.0;
    total += g[t];
  }
  if (total > 0.0) {
    for (double& v : g) v *= daily_pv_kwh / total;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Case-study generator.

struct CaseStudyParams {
  std::size_t n_total = 40;
  double participating_fraction = 0.25;
  std::uint64_t seed = 1;
  TimeGrid grid{48, 0.5};
  BaseProfileParams base;
  SesParams ses{80.0, std::pow(0.9, 1.0 / 48.0), 0.9, 1.1, 20.0};
  TouCalibration tou;
};

// Builds the synthetic community: participating users share the base PV
// profile and get the base demand scaled by factors 0.84..0.92 (first half)
// and 1.08..1.16 (second half) in 0.02 steps, cycling past ten users;
// non-participating users carry the unscaled demand and no PV. The tariff is
// calibrated on the baseline (no SES) load of this community.
inline Scenario generate_case_study(const CaseStudyParams& params) {
  params.grid.validate();
  const std::size_t participating = static_cast<std::size_t>(
      std::llround(params.participating_fraction * static_cast<double>(params.n_total)));
  NANSES_CHECK(participating >= 2 && participating <= params.n_total, ErrorCategory::kUsage,
               "participating share must give between 2 and n_total users");
  NANSES_CHECK(participating % 2 == 0, ErrorCategory::kUsage,
               "participating count must be even (half scaled down, half up), got " +
                   std::to_string(participating));

  const std::vector<double> demand =
      base_demand_profile(params.grid, params.base.daily_demand_kwh);
  const std::vector<double> pv = base_pv_profile(params.grid, params.base.daily_pv_kwh);

  Scenario scenario;
  scenario.grid = params.grid;
  scenario.ses = params.ses;
  scenario.seed = params.seed;

  const double down[] = {0.84, 0.86, 0.88, 0.90, 0.92};
  const double up[] = {1.08, 1.10, 1.12, 1.14, 1.16};
  const std::size_t half = participating / 2;
  auto user_id = [](char prefix, std::size_t i) {
    std::string s = std::to_string(i);
    if (s.size() < 2) s.insert(0, "0");
    return prefix + s;
  };
  for (std::size_t i = 0; i < participating; ++i) {
    const double factor = i < half ? down[i % 5] : up[(i - half) % 5];
    UserProfile u;
    u.id = user_id('p', i);
    u.participating = true;
    u.generation = pv;
    u.demand.resize(params.grid.steps);
    for (std::size_t t = 0; t < params.grid.steps; ++t) u.demand[t] = factor * demand[t];
    scenario.users.push_back(std::move(u));
  }
  for (std::size_t i = 0; i < params.n_total - participating; ++i) {
    UserProfile u;
    u.id = user_id('n', i);
    u.participating = false;
    u.demand = demand;
    u.generation.assign(params.grid.steps, 0.0);
    scenario.users.push_back(std::move(u));
  }

  scenario.tariff = calibrate_tou(params.grid, scenario.baseline_load(), params.tou);
  scenario.validate();
  return scenario;
}

// ---------------------------------------------------------------------------
// Forecast noise.

struct NoiseSpec {
  double mape_percent = 0.0;  // noise dial: percentage variance = 2 * this
  std::uint64_t seed = 1;
  bool negate = false;  // flip the noise sequence (antithetic pairing)

  // Multiplicative white noise whose percentage variance (variance of the
  // percent error, in percent^2) equals twice the dial value.
  double stddev() const { return std::sqrt(2.0 * mape_percent) / 100.0; }
};

struct NoisyScenario {
  Scenario scenario;
  std::size_t clamped_samples = 0;  // negative products clipped to zero
};

inline NoisyScenario apply_forecast_noise(const Scenario& base, const NoiseSpec& spec) {
  NANSES_CHECK(spec.mape_percent >= 0.0 && spec.mape_percent <= 100.0, ErrorCategory::kUsage,
               "noise MAPE must lie in [0, 100] percent");
  NoisyScenario out{base, 0};
  if (spec.mape_percent == 0.0) return out;
  Rng rng(spec.seed);
  const double sigma = (spec.negate ? -1.0 : 1.0) * spec.stddev();
  for (auto& user : out.scenario.users) {
    for (auto series : {&user.demand, &user.generation}) {
      for (double& v : *series) {
        if (v == 0.0) continue;
        const double scaled = v * (1.0 + sigma * rng.normal());
        if (scaled < 0.0) {
          v = 0.0;
          ++out.clamped_samples;
        } else {
          v = scaled;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats: a single JSON document, optionally referencing per-user CSV
// profiles (columns: step,demand_kwh,generation_kwh).

inline std::pair<std::vector<double>, std::vector<double>> load_profile_csv(
    const std::string& path, std::size_t steps) {
  std::ifstream in(path);
  NANSES_CHECK(in.good(), ErrorCategory::kUsage, "cannot open profile CSV " + path);
  std::string line;
  std::vector<double> demand, generation;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find("demand") != std::string::npos) continue;  // header
    std::istringstream row(line);
    std::string cell;
    double cols[3];
    for (int c = 0; c < 3; ++c) {
      NANSES_CHECK(std::getline(row, cell, ','), ErrorCategory::kUsage,
                   path + ":" + std::to_string(line_no) + ": expected 3 columns");
      try {
        cols[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCategory::kUsage,
                    path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    demand.push_back(cols[1]);
    generation.push_back(cols[2]);
  }
  NANSES_CHECK(demand.size() == steps, ErrorCategory::kUsage,
               path + ": profile has " + std::to_string(demand.size()) + " rows, expected " +
                   std::to_string(steps));
  return {std::move(demand), std::move(generation)};
}

inline nlohmann::json scenario_to_json(const Scenario& scenario) {
  nlohmann::json j;
  j["grid"] = {{"steps", scenario.grid.steps}, {"step_hours", scenario.grid.step_hours}};
  j["seed"] = scenario.seed;
  j["ses"] = {{"capacity_kwh", scenario.ses.capacity},
              {"leakage_per_step", scenario.ses.leakage},
              {"charge_efficiency", scenario.ses.charge_eff},
              {"discharge_efficiency", scenario.ses.discharge_eff},
              {"initial_charge_kwh", scenario.ses.initial_charge}};
  j["tariff"] = {{"phi_cents_per_kwh2", scenario.tariff.phi},
                 {"delta_cents_per_kwh", scenario.tariff.delta},
                 {"e_max_kwh", scenario.tariff.e_max}};
  j["users"] = nlohmann::json::array();
  for (const auto& u : scenario.users) {
    j["users"].push_back({{"id", u.id},
                          {"participating", u.participating},
                          {"demand_kwh", u.demand},
                          {"generation_kwh", u.generation}});
  }
  return j;
}

inline void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  NANSES_CHECK(out.good(), ErrorCategory::kUsage, "cannot write scenario file " + path);
  out << scenario_to_json(scenario).dump(2) << "\n";
}

inline Scenario scenario_from_json(const nlohmann::json& j, const std::string& context) {
  Scenario scenario;
  try {
    scenario.grid.steps = j.at("grid").at("steps").get<std::size_t>();
    scenario.grid.step_hours = j.at("grid").at("step_hours").get<double>();
    scenario.seed = j.value("seed", std::uint64_t{1});
    const auto& ses = j.at("ses");
    scenario.ses.capacity = ses.at("capacity_kwh").get<double>();
    scenario.ses.leakage = ses.at("leakage_per_step").get<double>();
    scenario.ses.charge_eff = ses.at("charge_efficiency").get<double>();
    scenario.ses.discharge_eff = ses.at("discharge_efficiency").get<double>();
    scenario.ses.initial_charge = ses.at("initial_charge_kwh").get<double>();
    const auto& tariff = j.at("tariff");
    scenario.tariff.phi = tariff.at("phi_cents_per_kwh2").get<std::vector<double>>();
    scenario.tariff.delta = tariff.at("delta_cents_per_kwh").get<std::vector<double>>();
    scenario.tariff.e_max = tariff.at("e_max_kwh").get<double>();
    for (const auto& ju : j.at("users")) {
      UserProfile u;
      u.id = ju.at("id").get<std::string>();
      u.participating = ju.at("participating").get<bool>();
      if (ju.contains("profile_csv")) {
        auto profile = load_profile_csv(ju.at("profile_csv").get<std::string>(),
                                        scenario.grid.steps);
        u.demand = std::move(profile.first);
        u.generation = std::move(profile.second);
      } else {
        u.demand = ju.at("demand_kwh").get<std::vector<double>>();
        u.generation = ju.at("generation_kwh").get<std::vector<double>>();
      }
      scenario.users.push_back(std::move(u));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kUsage, context + ": " + e.what());
  }
  scenario.validate();
  return scenario;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  NANSES_CHECK(in.good(), ErrorCategory::kUsage, "cannot open scenario file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kUsage, path + ": " + e.what());
  }
  return scenario_from_json(j, path);
}

}  // namespace nanses

#endif  // NANSES_SCENARIO_HPP_
