#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsgd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes that do not agree, or indices outside a dataset.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A dense object (usually the Hessian) would exceed the configured budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files (IDX headers, truncated payloads, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values that are not a size mismatch.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during local training.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t round, std::size_t client, std::size_t step,
                  const std::string& what)
      : Error("divergence at round " + std::to_string(round) + ", client " +
              std::to_string(client) + ", step " + std::to_string(step) +
              ": " + what),
        round_(round),
        client_(client),
        step_(step) {}

  std::size_t round() const noexcept { return round_; }
  std::size_t client() const noexcept { return client_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t round_;
  std::size_t client_;
  std::size_t step_;
};

}  // namespace lsgd
