#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace steerseg {

// Raised when a caller breaks an operation's precondition (shape mismatch,
// out-of-range index, value outside the admissible domain).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed on-disk data: bad magic/version, truncated blobs, size mismatch.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structurally valid data that violates a semantic invariant. For attention
// dumps the offending layer/head/row is recorded.
class ValidationError : public FormatError {
 public:
  ValidationError(const std::string& what, int layer = -1, int head = -1,
                  long row = -1)
      : FormatError(what), layer_(layer), head_(head), row_(row) {}

  int layer() const noexcept { return layer_; }
  int head() const noexcept { return head_; }
  long row() const noexcept { return row_; }

 private:
  int layer_;
  int head_;
  long row_;
};

// A model response that does not follow the requested format. Keeps the raw
// text so callers can log it.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw_text() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// The backend cannot answer a request of this kind (e.g. gradients).
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Backend failure during a forward pass; carries the keyframe it happened on.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, long frame_index = -1)
      : std::runtime_error(what), frame_index_(frame_index) {}
  long frame_index() const noexcept { return frame_index_; }

 private:
  long frame_index_;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or gradient became NaN/Inf during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace steerseg
