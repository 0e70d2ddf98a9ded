#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace twoport {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a 2x2 outcome covariance is too close to singular to invert.
class DegenerateCovariance : public Error {
 public:
  using Error::Error;
};

/// Raised when a Fisher matrix is singular or too ill-conditioned to invert.
/// `null_direction` is the unit parameter combination that the data cannot
/// resolve (right singular vector of the smallest singular value).
class SingularFisher : public Error {
 public:
  SingularFisher(const std::string& what, Eigen::Vector4d null_direction,
                 double condition_number)
      : Error(what),
        null_direction_(std::move(null_direction)),
        condition_number_(condition_number) {}

  const Eigen::Vector4d& null_direction() const { return null_direction_; }
  double condition_number() const { return condition_number_; }

 private:
  Eigen::Vector4d null_direction_;
  double condition_number_;
};

}  // namespace twoport
