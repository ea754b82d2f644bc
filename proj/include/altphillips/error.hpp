#pragma once

#include <stdexcept>
#include <string>

namespace altphillips {

// Bad argument outside the admissible range of an operation.
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Grid too small for a stencil.
class SizeError : public std::length_error {
public:
  explicit SizeError(const std::string& what) : std::length_error(what) {}
};

// Two fields that were expected to share a geometry do not.
class ShapeError : public std::invalid_argument {
public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Iterative method failed; carries the residual or energy history.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace altphillips
