#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

namespace testing_support {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() : TempDir(default_name()) {}
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("steerseg_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  static std::string default_name() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    if (!info) return "unnamed";
    return std::string(info->test_suite_name()) + "_" + info->name();
  }

  std::filesystem::path path_;
};

}  // namespace testing_support
