#pragma once

#include <stdexcept>
#include <string>

namespace gaugegm {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GAUGEGM_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

// model-core
GAUGEGM_DEFINE_ERROR(InvalidModel);
GAUGEGM_DEFINE_ERROR(TooManyFreeEdges);
GAUGEGM_DEFINE_ERROR(NegativeMass);

// gauge
GAUGEGM_DEFINE_ERROR(MissingGauge);
GAUGEGM_DEFINE_ERROR(NonPositiveFactorAtWeightedEntry);
GAUGEGM_DEFINE_ERROR(Decomposable);
GAUGEGM_DEFINE_ERROR(NotAlternating);
GAUGEGM_DEFINE_ERROR(DegenerateEigenpair);
GAUGEGM_DEFINE_ERROR(InfeasibleStart);

// baselines
GAUGEGM_DEFINE_ERROR(PositiveWeightOnZeroFactor);
GAUGEGM_DEFINE_ERROR(InconsistentBeliefs);

// error-correction
GAUGEGM_DEFINE_ERROR(NegativeEntry);

// bench
GAUGEGM_DEFINE_ERROR(InvalidRecipe);
GAUGEGM_DEFINE_ERROR(ExactNearZero);

#undef GAUGEGM_DEFINE_ERROR

}  // namespace gaugegm
