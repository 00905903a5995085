#pragma once

#include <stdexcept>
#include <string>

namespace drivelab {

// Base for every error raised by the library. Subclasses name the failure
// category so callers (and the CLI exit-code mapping) can tell them apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class InsufficientSpanError : public Error {
 public:
  using Error::Error;
};

class SegmentationError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class NoRatersError : public Error {
 public:
  using Error::Error;
};

// Malformed file or wire input.
class ParseError : public Error {
 public:
  using Error::Error;
};

class TrainingAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace drivelab
