#pragma once

#include <stdexcept>

namespace sekbest {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sekbest
