#pragma once

#include <stdexcept>
#include <string>

namespace stabilis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STABILIS_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

STABILIS_DEFINE_ERROR(OutOfRange);
STABILIS_DEFINE_ERROR(ConfigError);
STABILIS_DEFINE_ERROR(TargetMismatch);
STABILIS_DEFINE_ERROR(CapacityViolation);
STABILIS_DEFINE_ERROR(StrategyMismatch);
STABILIS_DEFINE_ERROR(BudgetExceeded);
STABILIS_DEFINE_ERROR(Infeasible);
STABILIS_DEFINE_ERROR(PreconditionViolated);

#undef STABILIS_DEFINE_ERROR

}  // namespace stabilis
