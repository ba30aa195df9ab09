#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zcae {

// Base error. `reason()` is a stable machine-readable code (e.g.
// "shape-mismatch", "dataset-not-found") used by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string reason, const std::string& what)
      : std::runtime_error(what), reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
};

// Errors caused by bad caller input: shapes, configs, files.
class InputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public InputError {
 public:
  explicit ShapeError(const std::string& what) : InputError("shape-mismatch", what) {}
};

class FormatError : public InputError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : InputError("format-error", what + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ConfigError : public InputError {
 public:
  explicit ConfigError(const std::string& what) : InputError("config-error", what) {}
  ConfigError(std::string reason, const std::string& what)
      : InputError(std::move(reason), what) {}
};

// Non-finite loss, gradient or parameter during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& phase, std::size_t epoch, double learning_rate)
      : Error("divergence", "training diverged in " + phase + " at epoch " + std::to_string(epoch) +
                                " with learning rate " + std::to_string(learning_rate)),
        epoch_(epoch),
        learning_rate_(learning_rate) {}
  std::size_t epoch() const noexcept { return epoch_; }
  double learning_rate() const noexcept { return learning_rate_; }

 private:
  std::size_t epoch_;
  double learning_rate_;
};

}  // namespace zcae
