#include "promptopt/gdopt.hpp"

namespace promptopt {

RowMatrix gd_step(const RowMatrix& theta, const RowMatrix& grad, const GdConfig& config,
                  GdState& state) {
  if (grad.rows() != theta.rows() || grad.cols() != theta.cols())
    throw Error(Errc::shape_mismatch, "gradient shape does not match theta");
  if (!grad.allFinite()) throw Error(Errc::non_finite_gradient, "gradient has non-finite entries");
  if (state.velocity.rows() != theta.rows() || state.velocity.cols() != theta.cols())
    state.velocity = RowMatrix::Zero(theta.rows(), theta.cols());

  if (config.momentum == 0.0) {
    state.velocity = grad;
  } else {
    state.velocity = config.momentum * state.velocity + grad;
  }
  ++state.step_count;
  return theta - config.lr * state.velocity;
}

RowMatrix run_inner(const RowMatrix& theta0, const Objective& objective, const GdConfig& config,
                    const SnapshotRecorder& recorder) {
  config.validate();
  RowMatrix theta = theta0;
  GdState state;
  state.velocity = RowMatrix::Zero(theta.rows(), theta.cols());
  for (int iter = 1; iter <= config.iterations; ++iter) {
    RowMatrix g;
    try {
      g = objective.grad(theta);
      theta = gd_step(theta, g, config, state);
    } catch (const Error& e) {
      if (e.code() == Errc::non_finite_gradient)
        throw Error(Errc::non_finite_gradient,
                    "non-finite gradient at iteration " + std::to_string(iter));
      throw;
    }
    if (recorder) recorder(iter, theta);
  }
  return theta;
}

}  // namespace promptopt
