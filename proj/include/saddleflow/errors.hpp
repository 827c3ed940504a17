#pragma once

#include <stdexcept>
#include <string>

namespace saddleflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bad dimensions, non-finite entries,
/// violated preconditions, invalid configuration).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A problem callback failed or produced non-finite values.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Adaptive step size collapsed below the representable minimum.
class StiffnessError : public Error {
 public:
  using Error::Error;
};

/// Saddle search exhausted its budget.
class NotFoundError : public Error {
 public:
  enum class Reason { SingularStall, Divergence, Budget };

  NotFoundError(Reason reason, const std::string& what)
      : Error(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

}  // namespace saddleflow
