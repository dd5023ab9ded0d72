#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gatecast {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
  public:
    using Error::Error;
};

/// Bad argument value (empty input, length mismatch, out-of-range option).
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// Caches, gradients or optimizer state do not belong to the given parameters.
class StructuralError : public Error {
  public:
    using Error::Error;
};

/// Input file does not follow the expected layout. `line()` is 1-based, 0 if unknown.
class FormatError : public Error {
  public:
    FormatError(const std::string& what, std::size_t line = 0) : Error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class EmptyDataError : public Error {
  public:
    using Error::Error;
};

class InsufficientDataError : public Error {
  public:
    using Error::Error;
};

/// A feature is constant over the fit range, so min-max scaling is undefined.
class DegenerateFeatureError : public Error {
  public:
    using Error::Error;
};

class FoldError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Model and samples disagree on features or window length.
class CompatibilityError : public Error {
  public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string& what, std::size_t epoch, std::size_t batch)
        : Error(what), epoch_(epoch), batch_(batch) {}
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

  private:
    std::size_t epoch_;
    std::size_t batch_;
};

}  // namespace gatecast
