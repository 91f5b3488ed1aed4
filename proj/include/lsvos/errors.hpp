#pragma once

#include <stdexcept>
#include <string>

namespace lsvos {

/// Input violates a documented precondition (shape, range, label).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A stateful component cannot serve the request yet, e.g. an empty queue
/// class or an auto-encoder that has never been trained.
class NotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared inside a computation.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric is undefined for the given input (e.g. only one class present).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Training produced a non-finite loss.
class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or unsupported format version.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lsvos
