#pragma once

#include <stdexcept>
#include <string>

namespace hierood {

// Base of every error raised by the library. `kind()` is a short stable tag
// used by the CLI when it reports failures on one line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct TaxonomyError : Error {
  explicit TaxonomyError(const std::string& what) : Error("taxonomy", what) {}
};

struct DatasetError : Error {
  explicit DatasetError(const std::string& what) : Error("dataset", what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

struct TrainingDiverged : Error {
  explicit TrainingDiverged(const std::string& what) : Error("diverged", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace hierood
