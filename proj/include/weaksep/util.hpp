#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace weaksep {

/// Error type thrown by all library operations.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kahan-Babuska-Neumaier compensated accumulator. Fixed evaluation order;
/// the result is the exact sum to one final rounding.
class NeumaierSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace weaksep
