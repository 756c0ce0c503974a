#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace evikit {

/// Input violates a documented precondition (shape, ordering, config range).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A time interval, pixel, or index falls outside the valid domain.
class RangeError : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

/// Malformed binary or text file. Carries the byte offset of the fault.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset)
  {
  }

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Threshold estimation had nothing to fit.
class EstimationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step)
  {
  }

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

} // namespace evikit
