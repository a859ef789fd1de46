#pragma once

// Shared error types, seeding and diagnostics used across the library.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ensgan {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  kConfig,       // exit 2
  kData,         // exit 3
  kTraining,     // exit 4
  kPartialFailure  // exit 5
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, "config error: " + what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& what)
      : DataError("schema error: " + what) {}
};

class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& what)
      : DataError("parse error: " + what) {}
};

class EmptyDatasetError : public DataError {
 public:
  explicit EmptyDatasetError(const std::string& what)
      : DataError("empty dataset: " + what) {}
};

class ResampleError : public DataError {
 public:
  explicit ResampleError(const std::string& what)
      : DataError("resample error: " + what) {}
};

class ArtifactError : public DataError {
 public:
  explicit ArtifactError(const std::string& what)
      : DataError("artifact error: " + what) {}
};

class LeakageError : public DataError {
 public:
  explicit LeakageError(const std::string& what)
      : DataError("leakage error: " + what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what)
      : Error(ErrorKind::kTraining, "training error: " + what) {}
};

// A metric with no defined value for the given inputs (e.g. ROCAUC on one
// class). Never silently replaced by a default.
class MetricUndefinedError : public Error {
 public:
  explicit MetricUndefinedError(const std::string& what)
      : Error(ErrorKind::kTraining, "metric undefined: " + what) {}
};

class PipelineError : public Error {
 public:
  explicit PipelineError(const std::string& what)
      : Error(ErrorKind::kTraining, "pipeline error: " + what) {}
};

class SweepError : public Error {
 public:
  explicit SweepError(const std::string& what)
      : Error(ErrorKind::kPartialFailure, "sweep error: " + what) {}
};

int exit_code_for(ErrorKind kind);

// ---------------------------------------------------------------------------
// Diagnostics

using WarningSink = std::function<void(std::string_view)>;

// Thread-safe. The default sink writes "warning: ..." lines to stderr.
void warn(std::string_view message);
// Returns the previous sink. Passing an empty function restores stderr.
WarningSink set_warning_sink(WarningSink sink);

// ---------------------------------------------------------------------------
// Seeding. Every random draw in the library flows from an explicit seed;
// child seeds are derived by hashing (parent, tag...) so that results do not
// depend on evaluation order.

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t h = 14695981039346656037ull);
std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::string_view> tags);
// Canonical text key for a sweep fraction ("0.05" -> "50000" micro-units).
std::string fraction_key(double fraction);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Numerics

// floor(x) tolerant of representation error just below an integer
// (0.65 * 40 evaluates to 25.999999999999996).
long long floor_tol(double x);
// Round half up, with the same tolerance.
long long round_half_up(double x);

double sigmoid(double x);

}  // namespace ensgan
