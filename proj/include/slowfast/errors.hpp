#pragma once

#include <stdexcept>
#include <string>

namespace slowfast {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct NoRoot : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NewtonDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by the crossing map when (z0, lambda) leaves the admissible set.
struct OutsideDomain : std::domain_error {
  using std::domain_error::domain_error;
};

struct QuadratureFail : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateFit : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularP : std::domain_error {
  using std::domain_error::domain_error;
};

struct Excluded : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace slowfast
