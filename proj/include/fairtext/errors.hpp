#pragma once

#include <stdexcept>
#include <string>

namespace fairtext {

// Input files that do not match the documented record formats.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or unwritable files.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid arguments or configuration values.
struct ParameterError : std::invalid_argument {
  explicit ParameterError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Tensor width / length mismatches.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// A metric whose conditioning group is empty.
struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& what)
      : std::runtime_error(what) {}
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

// Unreadable or incompatible artifacts (checkpoints, manifests).
struct ArtifactError : std::runtime_error {
  explicit ArtifactError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fairtext
