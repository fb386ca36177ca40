#pragma once

#include <stdexcept>
#include <string>

namespace skgait {

// Base of every error thrown by the library. `kind()` is a stable
// machine-readable tag used by the CLI diagnostic line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct CalibrationError : Error {
  explicit CalibrationError(const std::string& w) : Error("calibration-invalid", w) {}
};
struct ChainError : Error {
  explicit ChainError(const std::string& w) : Error("chain", w) {}
};
struct FusionError : Error {
  explicit FusionError(const std::string& w) : Error("fusion", w) {}
};
struct IncompleteSkeletonError : Error {
  explicit IncompleteSkeletonError(const std::string& w) : Error("incomplete-skeleton", w) {}
};
struct DegenerateSkeletonError : Error {
  explicit DegenerateSkeletonError(const std::string& w) : Error("degenerate-skeleton", w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error("shape", w) {}
};
struct GraphStateError : Error {
  explicit GraphStateError(const std::string& w) : Error("autograd", w) {}
};
struct LossError : Error {
  explicit LossError(const std::string& w) : Error("loss", w) {}
};
struct ProtocolError : Error {
  explicit ProtocolError(const std::string& w) : Error("protocol", w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error("format", w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace skgait
