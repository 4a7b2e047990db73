#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace simq {

using QuestionId = std::uint64_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed records, inconsistent dimensions, impossible
/// sampling requests.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A persisted file is unreadable: wrong magic, unsupported version,
/// truncated payload.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid argument passed by a caller (dimension mismatch, empty input).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Deterministic random source.
///
/// Wraps std::mt19937_64 but derives the integer and real draws from the raw
/// 64-bit output directly, so sequences are identical across standard library
/// implementations (std::uniform_*_distribution is not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Seed for an independent stream keyed by (seed, stream).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Shortest decimal form of x that parses back to the identical double.
std::string format_double(double x);
double parse_double(std::string_view text);

}  // namespace simq
