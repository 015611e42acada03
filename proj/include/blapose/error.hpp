#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blapose {

// Base of every error raised by the library. Validation errors mean the
// caller handed in something malformed; the rest are runtime failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionMismatch : public ValidationError {
 public:
  DimensionMismatch(const std::string& what, std::ptrdiff_t expected, std::ptrdiff_t got)
      : ValidationError(what + ": expected " + std::to_string(expected) + ", got " +
                        std::to_string(got)) {}
  explicit DimensionMismatch(const std::string& what) : ValidationError(what) {}
};

class LabelMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateBone : public Error {
 public:
  explicit DegenerateBone(int bone, long frame = -1)
      : Error("degenerate bone " + std::to_string(bone) +
              (frame >= 0 ? " in frame " + std::to_string(frame) : std::string{})),
        bone_(bone),
        frame_(frame) {}

  int bone() const noexcept { return bone_; }
  long frame() const noexcept { return frame_; }

 private:
  int bone_;
  long frame_;
};

class BehindCamera : public Error {
 public:
  BehindCamera() : Error("point behind camera") {}
  BehindCamera(long frame, int joint)
      : Error("joint " + std::to_string(joint) + " of frame " + std::to_string(frame) +
              " is behind the camera"),
        frame_(frame),
        joint_(joint) {}

  long frame() const noexcept { return frame_; }
  int joint() const noexcept { return joint_; }

 private:
  long frame_ = -1;
  int joint_ = -1;
};

class NonPositiveResult : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(long batch)
      : Error("non-finite loss at batch " + std::to_string(batch)), batch_(batch) {}
  long batch() const noexcept { return batch_; }

 private:
  long batch_;
};

class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

}  // namespace blapose
