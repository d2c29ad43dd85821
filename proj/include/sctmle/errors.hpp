#pragma once

#include <stdexcept>
#include <string>

namespace sctmle {

struct singular_fit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct positivity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct degenerate_variance_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct covariance_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct infeasible_truncation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace sctmle
