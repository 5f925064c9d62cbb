#ifndef MCDIMPUTE_ERRORS_HPP
#define MCDIMPUTE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mcdi {

// Bad flags or config values. The CLI maps it to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable, malformed or schema-incompatible data. Exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during training. Exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch = -1)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace mcdi

#endif  // MCDIMPUTE_ERRORS_HPP
