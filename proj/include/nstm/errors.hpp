#pragma once

#include <stdexcept>
#include <string>

namespace nstm {

// Base for every failure raised by the library. Verification outcomes
// (divergence, validation findings) are data and never thrown.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NSTM_DEFINE_ERROR(Name)                 \
  class Name : public Error {                   \
   public:                                      \
    explicit Name(const std::string& what)      \
        : Error(#Name ": " + what) {}           \
  }

NSTM_DEFINE_ERROR(TapeOverflow);
NSTM_DEFINE_ERROR(HeadUnderflow);
NSTM_DEFINE_ERROR(DimMismatch);
NSTM_DEFINE_ERROR(DomainError);
NSTM_DEFINE_ERROR(IllegalState);
NSTM_DEFINE_ERROR(HashMismatch);
NSTM_DEFINE_ERROR(MemoryCapExceeded);
NSTM_DEFINE_ERROR(AlphabetError);
NSTM_DEFINE_ERROR(InfeasibleWindow);
NSTM_DEFINE_ERROR(DataFormatError);
NSTM_DEFINE_ERROR(SpecError);

#undef NSTM_DEFINE_ERROR

}  // namespace nstm
