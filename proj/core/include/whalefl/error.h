#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace whalefl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or index-set shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinity surfaced during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk input (IDX files, trace CSVs).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Carries every validation problem found in a config, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace whalefl
