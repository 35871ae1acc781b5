#pragma once

#include <stdexcept>
#include <string>

namespace drolab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "runtime_error"; }
};

// Malformed or inconsistent input (bad files, violated preconditions).
// The CLI maps these to exit status 2.
class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input_error"; }
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& field,
             const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ": " +
                   (field.empty() ? std::string() : "field '" + field + "': ") + what),
        line_(line),
        field_(field) {}
  const char* kind() const noexcept override { return "parse_error"; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class ValidationError : public InputError {
 public:
  ValidationError(const std::string& invariant, const std::string& what)
      : InputError("invariant '" + invariant + "' violated: " + what), invariant_(invariant) {}
  const char* kind() const noexcept override { return "validation_error"; }
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

// A mathematical precondition does not hold (zero weight where an interior
// point is required, containment condition violated, ...).
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain_error"; }
};

class CapExceeded : public Error {
 public:
  CapExceeded(double lattice_size, double cap)
      : Error("lattice of " + format_size(lattice_size) + " points exceeds cap " +
              format_size(cap) + "; use --method importance or mc"),
        lattice_size_(lattice_size),
        cap_(cap) {}
  const char* kind() const noexcept override { return "cap_exceeded"; }
  double lattice_size() const noexcept { return lattice_size_; }
  double cap() const noexcept { return cap_; }

 private:
  static std::string format_size(double v);
  double lattice_size_;
  double cap_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double lo, double hi)
      : Error(what + " (bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "])"),
        lo_(lo),
        hi_(hi) {}
  const char* kind() const noexcept override { return "convergence_error"; }
  double bracket_lo() const noexcept { return lo_; }
  double bracket_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace drolab
