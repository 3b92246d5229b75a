#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "rsteer/error.hpp"

namespace rsteer::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(RSTEER_FIXTURE_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rsteer_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace rsteer::testing

#define EXPECT_RSTEER_ERROR(stmt, expected_code)                                  \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected " << ::rsteer::to_string(expected_code);         \
    } catch (const ::rsteer::Error& e_) {                                         \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                           \
    }                                                                             \
  } while (0)
