#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace lsgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Model weights x. Length is fixed by the problem; entries must stay finite.
using ParamVector = Vector;

using IndexList = std::vector<std::size_t>;
using IndexSpan = std::span<const std::size_t>;

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

/// Throws DimensionError naming `what` when `actual != expected`.
void require_length(std::size_t actual, std::size_t expected, std::string_view what);

/// Relative difference ||a - b|| / max(||b||, tiny).
double relative_error(const Vector& a, const Vector& b);

}  // namespace lsgd
