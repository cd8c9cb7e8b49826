#pragma once

#include <functional>

#include "imcf/error.hpp"

namespace imcf::testing {

// Kind of the imcf::Error thrown by fn; DataError when nothing is thrown,
// which no caller expects.
inline ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::DataError;
}

}  // namespace imcf::testing
