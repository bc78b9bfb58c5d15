#pragma once

#include <stdexcept>
#include <string>

namespace pbds {

enum class ErrorKind {
  kDimensionMismatch,
  kOutOfDomain,   // point outside a chart, off-manifold, or non-positive distance
  kSingular,      // singular metric, rank-deficient Jacobian, undefined transition
  kNonFinite,
  kCollision,
  kSchema,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pbds
