#include "lsgd/linalg.hpp"

#include "lsgd/errors.hpp"

#include <limits>
#include <string>

namespace lsgd {

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_length(std::size_t actual, std::size_t expected, std::string_view what) {
  if (actual != expected) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                         ", got " + std::to_string(actual));
  }
}

double relative_error(const Vector& a, const Vector& b) {
  require_length(static_cast<std::size_t>(a.size()), static_cast<std::size_t>(b.size()),
                 "relative_error");
  const double denom = std::max(b.norm(), std::numeric_limits<double>::min());
  return (a - b).norm() / denom;
}

}  // namespace lsgd
