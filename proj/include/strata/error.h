#ifndef STRATA_ERROR_H_
#define STRATA_ERROR_H_

#include <stdexcept>
#include <string>

namespace strata {

// Bad configuration: malformed rule table, unknown config key, invalid
// parameter value. Maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that fails validation: lexicon errors, missing words, empty
// corpora, single-class training sets. Maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerically undefined quantities (zero vectors, zero variance, zero
// totals).
class UndefinedError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace strata

#endif  // STRATA_ERROR_H_
