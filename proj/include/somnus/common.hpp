#pragma once

#include <stdexcept>
#include <string>

namespace somnus {

// Base for every typed error in the library. Catch this to handle anything
// the toolkit can throw; catch the concrete types for specific conditions.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define SOMNUS_DEFINE_ERROR(name)                                  \
  struct name : ::somnus::Error {                                  \
    explicit name(const std::string& msg) : ::somnus::Error(msg) {} \
  }

}  // namespace somnus
