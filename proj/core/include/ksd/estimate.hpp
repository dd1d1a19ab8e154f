#pragma once

#include <cmath>

namespace ksd {

// A value with its one-sigma standard error.
struct Estimate {
  double value = 0.0;
  double stderr = 0.0;
};

inline Estimate operator+(Estimate a, Estimate b) {
  return {a.value + b.value, std::hypot(a.stderr, b.stderr)};
}

inline Estimate operator-(Estimate a, Estimate b) {
  return {a.value - b.value, std::hypot(a.stderr, b.stderr)};
}

}  // namespace ksd
