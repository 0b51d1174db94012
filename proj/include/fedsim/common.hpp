#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedsim {

// Error categories surfaced by the library. The CLI maps each category to a
// distinct exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AggregationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer. Cheap, well-mixed, and stable across platforms.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Every random draw in the simulator comes from a stream derived from
// (master seed, purpose tag, a, b); a and b are typically round and client id.
// This is the reproducibility backbone: streams are independent of execution
// order, so serial and parallel schedules see identical randomness.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t a = 0, std::uint64_t b = 0);

std::mt19937_64 make_rng(std::uint64_t master, std::string_view purpose,
                         std::uint64_t a = 0, std::uint64_t b = 0);

// Wall-clock abstraction. Experiments take a Clock so test harnesses can
// inject a deterministic one and reports become byte-reproducible.
class Clock {
  public:
    virtual ~Clock() = default;
    virtual double now_seconds() = 0;
};

class SteadyClock final : public Clock {
  public:
    double now_seconds() override {
        auto t = std::chrono::steady_clock::now().time_since_epoch();
        return std::chrono::duration<double>(t).count();
    }
};

// Advances a fixed tick on every query; monotone and deterministic.
class FakeClock final : public Clock {
  public:
    explicit FakeClock(double tick_seconds = 1e-3) : tick_(tick_seconds) {}
    double now_seconds() override {
        t_ += tick_;
        return t_;
    }

  private:
    double t_ = 0.0;
    double tick_;
};

// Non-fatal diagnostics go to stderr; reports stay deterministic.
void warn(const std::string& message);

}  // namespace fedsim
