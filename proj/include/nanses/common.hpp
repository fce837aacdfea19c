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

#ifndef NANSES_COMMON_HPP_
#define NANSES_COMMON_HPP_

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace nanses {

inline constexpr const char* kVersion = "0.1.0";

// Units used throughout the library: energy in kWh, prices in cents/kWh,
// money in cents. Per-horizon series are std::vector<double> of length H.

enum class ErrorCategory {
  kUsage,           // bad arguments / malformed input files
  kInfeasible,      // leader problem or scenario constraints cannot be met
  kNonConvergence,  // best-response iteration or QP solve did not converge
  kCertificate,     // equilibrium certificate or incentive audit failed
  kMechanism,       // payment computation hit an undefined sub-instance
  kValidation,      // physical/pricing validation failed on a computed run
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

  const char* category_name() const {
    switch (category_) {
      case ErrorCategory::kUsage: return "usage";
      case ErrorCategory::kInfeasible: return "infeasible";
      case ErrorCategory::kNonConvergence: return "non-convergence";
      case ErrorCategory::kCertificate: return "certificate";
      case ErrorCategory::kMechanism: return "mechanism";
      case ErrorCategory::kValidation: return "validation";
    }
    return "unknown";
  }

 private:
  ErrorCategory category_;
};

#define NANSES_CHECK(cond, category, message)        \
  do {                                               \
    if (!(cond)) {                                   \
      throw ::nanses::Error((category), (message));  \
    }                                                \
  } while (false)

// std::to_string flattens small magnitudes to 0.000000; diagnostics use
// scientific notation instead.
inline std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void check_length(const std::vector<double>& v, std::size_t expected,
                         const std::string& name) {
  if (v.size() != expected) {
    throw Error(ErrorCategory::kUsage,
                name + " has length " + std::to_string(v.size()) +
                    ", expected " + std::to_string(expected));
  }
}

}  // namespace nanses

#endif  // NANSES_COMMON_HPP_
