#pragma once

#include <stdexcept>
#include <string>

namespace dgq {

// Failure to touch the filesystem at all (open/read/write).
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk content. `which()` distinguishes the failure modes so
// callers and tests do not have to parse messages.
class format_error : public std::runtime_error {
 public:
  enum class kind {
    bad_magic,
    truncated,
    size_mismatch,
    unknown_dtype,
    bad_header,
  };

  format_error(kind k, const std::string& msg)
      : std::runtime_error(msg), kind_(k) {}

  kind which() const { return kind_; }

 private:
  kind kind_;
};

// Structured-artifact invariant violation; names the offending field.
class validation_error : public std::runtime_error {
 public:
  validation_error(std::string field, const std::string& msg)
      : std::runtime_error(msg), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace dgq
