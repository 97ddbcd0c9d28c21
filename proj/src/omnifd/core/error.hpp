#pragma once

#include <stdexcept>
#include <string>

namespace omnifd {

// All domain errors carry a stable machine-readable code next to the
// human-readable message. The CLI surfaces the code in its error records.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* EmptySource = "EmptySource";
inline constexpr const char* NonDivisibleResolution = "NonDivisibleResolution";
inline constexpr const char* ShapeMismatch = "ShapeMismatch";
inline constexpr const char* WidthMismatch = "WidthMismatch";
inline constexpr const char* LevelOutOfRange = "LevelOutOfRange";
inline constexpr const char* VideoNotSupported = "VideoNotSupported";
inline constexpr const char* ImageNotSupported = "ImageNotSupported";
inline constexpr const char* SegmentOutOfRange = "SegmentOutOfRange";
inline constexpr const char* NoTaskPresent = "NoTaskPresent";
inline constexpr const char* InsufficientModality = "InsufficientModality";
inline constexpr const char* TaskDataMismatch = "TaskDataMismatch";
inline constexpr const char* NonFiniteLoss = "NonFiniteLoss";
inline constexpr const char* MissingHead = "MissingHead";
inline constexpr const char* EmptyInput = "EmptyInput";
inline constexpr const char* SingleClass = "SingleClass";
inline constexpr const char* BadConfig = "BadConfig";
inline constexpr const char* IoError = "IoError";
}  // namespace errc

}  // namespace omnifd
