#pragma once

#include <stdexcept>
#include <string>

namespace hybridest {

// Bad input: malformed files, invariant violations, invalid configuration.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: singular fits, non-convergence, ill-conditioned
// covariance blocks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `f`, prefixing any library error with the pipeline stage name while
// keeping the error category intact.
template <class F>
decltype(auto) in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const InputError& e) {
    throw InputError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  }
}

}  // namespace hybridest
