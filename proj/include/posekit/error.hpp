#pragma once

#include <stdexcept>
#include <string>

namespace posekit {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes or parameter sizes are inconsistent.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A geometric quantity collapsed (zero-norm vector, singular angle, empty visibility).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain (negative depth, negative alpha, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input bytes could not be parsed. Carries the source path and the byte offset
// where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t offset, const std::string& what)
      : Error(path + ":" + std::to_string(offset) + ": " + what),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::size_t offset_;
};

// Input parsed but its content violates a data invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace posekit
