#include "ensgan/common.hpp"

#include <cmath>
#include <iostream>
#include <mutex>

namespace ensgan {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kTraining: return 4;
    case ErrorKind::kPartialFailure: return 5;
  }
  return 1;
}

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_slot() {
  static WarningSink sink;
  return sink;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  if (sink_slot()) {
    sink_slot()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex());
  WarningSink previous = std::move(sink_slot());
  sink_slot() = std::move(sink);
  return previous;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::string_view> tags) {
  std::uint64_t h = splitmix64(parent);
  for (std::string_view tag : tags) {
    h = fnv1a64(tag, h);
    h = splitmix64(h ^ tag.size());
  }
  return h;
}

std::string fraction_key(double fraction) {
  return std::to_string(std::llround(fraction * 1e6));
}

long long floor_tol(double x) {
  return static_cast<long long>(std::floor(x + 1e-9));
}

long long round_half_up(double x) { return floor_tol(x + 0.5); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace ensgan
