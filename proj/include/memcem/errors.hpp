#pragma once

#include <stdexcept>
#include <string>

namespace memcem {

/// A linear-algebra step failed: singular factorization, rank-deficient
/// constraints, or a residual above its contract.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The partially explicit step size exceeds the provable stability bound.
class StabilityBoundError : public std::runtime_error {
public:
  StabilityBoundError(double dt, double bound)
      : std::runtime_error("time step " + std::to_string(dt) + " exceeds the stability bound " +
                           std::to_string(bound) + " (set allow_unstable to override)"),
        dt_(dt), bound_(bound) {}
  double dt() const { return dt_; }
  double bound() const { return bound_; }

private:
  double dt_;
  double bound_;
};

} // namespace memcem
