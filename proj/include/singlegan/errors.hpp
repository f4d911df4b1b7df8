#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace singlegan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument value (index out of range, empty list, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite input or output.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// A training step produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(std::int64_t step, std::string loss_name)
      : Error("non-finite loss '" + loss_name + "' at step " + std::to_string(step)),
        step_(step),
        loss_name_(std::move(loss_name)) {}

  std::int64_t step() const { return step_; }
  const std::string& loss_name() const { return loss_name_; }

 private:
  std::int64_t step_;
  std::string loss_name_;
};

}  // namespace singlegan
