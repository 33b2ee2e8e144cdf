#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace promptopt {

// Row i of a RowMatrix is the embedding of token position i. All numerics in
// this library are double precision.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Metric { l2, cosine };

}  // namespace promptopt
