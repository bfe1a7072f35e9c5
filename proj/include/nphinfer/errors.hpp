#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nphinfer {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyGroup : public Error {
 public:
  using Error::Error;
};

class InvalidRecord : public Error {
 public:
  using Error::Error;
};

// The survival curve never drops to 1 - gamma within follow-up.
class QuantileUndefined : public Error {
 public:
  using Error::Error;
};

class DegenerateHazard : public Error {
 public:
  using Error::Error;
};

class HorizonBeyondData : public Error {
 public:
  using Error::Error;
};

// A transform (log, cloglog, ratio) would produce a non-finite estimate.
class DegenerateTransform : public Error {
 public:
  using Error::Error;
};

class NonconvergentFit : public Error {
 public:
  using Error::Error;
};

class DegenerateVariance : public Error {
 public:
  DegenerateVariance(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class PerturbationFailure : public Error {
 public:
  using Error::Error;
};

class InvalidCorrelation : public Error {
 public:
  using Error::Error;
};

class TooManyParameters : public Error {
 public:
  using Error::Error;
};

class UnknownScenario : public Error {
 public:
  using Error::Error;
};

// Raised by the CSV reader; line is 1-based and counts the header.
class CsvError : public Error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Wraps an estimation failure with the offending parameter.
class SpecError : public Error {
 public:
  SpecError(std::size_t index, const std::string& label, const std::string& what)
      : Error("parameter " + std::to_string(index + 1) + " (" + label + "): " + what),
        index_(index),
        label_(label) {}
  std::size_t index() const noexcept { return index_; }
  const std::string& label() const noexcept { return label_; }

 private:
  std::size_t index_;
  std::string label_;
};

}  // namespace nphinfer
