#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrmatch {

// Base for every error the library throws. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidCoordinate : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `row` is 1-based and counts the header line, 0 when
// the problem is not tied to a single row.
class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::size_t row, const std::string& what)
      : Error(format(file, row, what)), file_(std::move(file)), row_(row) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t row() const noexcept { return row_; }

 private:
  static std::string format(const std::string& file, std::size_t row,
                            const std::string& what) {
    std::string out = file.empty() ? std::string("input") : file;
    if (row > 0) out += ":" + std::to_string(row);
    return out + ": " + what;
  }

  std::string file_;
  std::size_t row_;
};

class EmptyNetwork : public Error {
 public:
  EmptyNetwork() : Error("street network is empty") {}
};

class EmptyRun : public Error {
 public:
  EmptyRun() : Error("run has no matched segments") {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrmatch
