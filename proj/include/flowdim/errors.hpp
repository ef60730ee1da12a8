#pragma once
#include <stdexcept>
#include <string>

namespace flowdim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define FLOWDIM_ERROR(Name)                        \
  struct Name : Error {                            \
    explicit Name(const std::string& m) : Error(#Name ": " + m) {} \
  }

FLOWDIM_ERROR(WindowExceeded);
FLOWDIM_ERROR(ExtrapolationError);
FLOWDIM_ERROR(InvalidWindow);
FLOWDIM_ERROR(NotFree);
FLOWDIM_ERROR(ResolutionError);
FLOWDIM_ERROR(MarginExhausted);
FLOWDIM_ERROR(InvalidPartition);
FLOWDIM_ERROR(ParameterError);
FLOWDIM_ERROR(BoxError);
FLOWDIM_ERROR(DefectBudgetExceeded);
FLOWDIM_ERROR(NotTransversal);
FLOWDIM_ERROR(UsageError);

#undef FLOWDIM_ERROR

}  // namespace flowdim
