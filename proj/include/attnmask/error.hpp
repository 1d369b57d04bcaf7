#pragma once

#include <stdexcept>
#include <string>

namespace attnmask {

// Input violated a documented precondition or a file failed format checks.
// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Environment or I/O failure (unwritable path, unreadable file, ...).
// The CLI maps this to exit code 1.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage failed for one sample.
class StageError : public RuntimeError {
 public:
  StageError(std::string sample_id, std::string stage, const std::string& what)
      : RuntimeError("[" + sample_id + "/" + stage + "] " + what),
        sample_id_(std::move(sample_id)),
        stage_(std::move(stage)) {}

  const std::string& sample_id() const noexcept { return sample_id_; }
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string sample_id_;
  std::string stage_;
};

}  // namespace attnmask
