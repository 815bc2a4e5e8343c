#pragma once

#include <stdexcept>
#include <string>

namespace kinetic {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HypothesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IllConditionedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvertibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StiffnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kinetic
