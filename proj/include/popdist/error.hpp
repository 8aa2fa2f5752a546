#pragma once

#include <stdexcept>
#include <string>

namespace popdist {

/// Malformed input: bad files, invalid parameters, violated preconditions.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative solver hit its iteration cap or lost feasibility.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace detail
}  // namespace popdist
