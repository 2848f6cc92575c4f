#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace copycat {

// Bad input: shape mismatch, out-of-range label, malformed config, violated precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Query refused before reaching the backend: the handle's budget is spent.
class BudgetExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote oracle unreachable after retries. The query is not charged.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Balancing needs at least one sample per class; carries the classes that have none.
class MissingClassError : public ValidationError {
 public:
  explicit MissingClassError(std::vector<int> missing);
  const std::vector<int>& missing_classes() const { return missing_; }

 private:
  std::vector<int> missing_;
};

// Neighbor selection ran out of unselected candidates for a class.
class PoolExhaustedError : public std::runtime_error {
 public:
  PoolExhaustedError(int class_index, const std::string& what);
  int class_index() const { return class_index_; }

 private:
  int class_index_;
};

class UnsupportedLayerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace copycat
