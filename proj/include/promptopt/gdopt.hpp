#pragma once

#include <functional>

#include "promptopt/objective.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

struct GdConfig {
  double lr = 0.1;
  double momentum = 0.0;  // in [0, 1)
  int iterations = 10;

  void validate() const {
    if (!(lr > 0.0)) throw Error(Errc::config, "learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
      throw Error(Errc::config, "momentum must lie in [0, 1)");
    if (iterations < 0) throw Error(Errc::config, "iteration count must be non-negative");
  }
};

struct GdState {
  RowMatrix velocity;  // zero-initialized, same shape as theta
  int step_count = 0;
};

// One SGD(+momentum) update: velocity <- momentum*velocity + grad,
// theta' = theta - lr*velocity. Throws Errc::non_finite_gradient.
RowMatrix gd_step(const RowMatrix& theta, const RowMatrix& grad, const GdConfig& config,
                  GdState& state);

// Called after each update with the 1-based step index and the new theta.
using SnapshotRecorder = std::function<void(int iteration, const RowMatrix& theta)>;

// Runs exactly config.iterations steps from theta0, recording every post-step
// theta. Deterministic: the trajectory is a pure function of the inputs.
RowMatrix run_inner(const RowMatrix& theta0, const Objective& objective, const GdConfig& config,
                    const SnapshotRecorder& recorder);

}  // namespace promptopt
