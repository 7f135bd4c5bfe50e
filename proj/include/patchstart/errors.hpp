#pragma once

#include <stdexcept>
#include <string>

namespace patchstart {

// Root of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches and violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Missing, unreadable, truncated or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

// Well-formed bytes that do not follow the expected format (PNG bit depth, JSON fields).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Parsed input that is internally inconsistent (layer dims, manifest labels).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Remote oracle unreachable, timed out, or answered with a non-200 status.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Remote oracle answered 200 but the body is not the documented response.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Saliency produced no above-threshold region.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

// No patch in the pool fits the canvas.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace patchstart
