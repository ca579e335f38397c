#pragma once

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "eegspec/error.hpp"

// Fresh scratch directory under the test's working directory.
inline std::filesystem::path ScratchDir(const std::string& name) {
  auto p = std::filesystem::current_path() / "scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Runs expr, expecting an eegspec::Error with `want_code` whose message contains
// `fragment`.
#define CHECK_FAILS_WITH(expr, want_code, fragment)                              \
  do {                                                                      \
    bool thrown_ = false;                                                   \
    try {                                                                   \
      (void)(expr);                                                         \
    } catch (const eegspec::Error& e_) {                                    \
      thrown_ = true;                                                       \
      CHECK(e_.code() == (want_code));                                           \
      CHECK_MESSAGE(std::string(e_.what()).find(fragment) != std::string::npos, e_.what()); \
    }                                                                       \
    CHECK_MESSAGE(thrown_, "expected an eegspec::Error");                   \
  } while (0)
