#pragma once

#include <cmath>

#include "gaugegm/errors.hpp"

namespace gaugegm {

/// |log Z - estimate| / |log Z|.
inline double error_metric(double exact, double estimate) {
  if (!(std::abs(exact) > 1e-12)) throw ExactNearZero("|log Z| is too close to zero for a relative error");
  return std::abs(exact - estimate) / std::abs(exact);
}

/// log(Z_est / Z_mf), both inputs already in log domain.
inline double ratio_metric(double estimate, double mf_estimate) { return estimate - mf_estimate; }

}  // namespace gaugegm
