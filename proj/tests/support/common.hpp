#pragma once

#include <gtest/gtest.h>

#include "emotalk/error.hpp"
#include "support/temp_dir.hpp"

namespace emotalk::test {

inline Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no emotalk::Error thrown";
  return Errc::InvalidRequest;
}

}  // namespace emotalk::test
