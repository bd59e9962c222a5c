#pragma once

#include <stdexcept>
#include <string>

namespace fairpen {

/// Base for every error the library raises. Callers that only need to
/// report a diagnostic can catch this one type.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data, bad schema, or a degenerate partition.
class DataError : public Error {
public:
  using Error::Error;
};

/// A rate or mean is undefined because one of the four (group, label)
/// cells is empty.
class EmptyGroupError : public DataError {
public:
  EmptyGroupError(int group, int label, const std::string& context)
      : DataError(context + ": group S_" + std::to_string(group) + std::to_string(label) + " is empty"),
        group_(group),
        label_(label) {}

  int group() const noexcept { return group_; }
  int label() const noexcept { return label_; }

private:
  int group_;
  int label_;
};

/// Vector lengths disagree (parameters vs. features, etc.).
class DimensionError : public Error {
public:
  using Error::Error;
};

/// The optimizer hit a non-finite objective or gradient.
class SolverError : public Error {
public:
  using Error::Error;
};

}  // namespace fairpen
