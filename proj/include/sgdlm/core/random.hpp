#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sgdlm {

using Engine = std::mt19937_64;

// A position in a tree of reproducible random streams. Every parallel unit of
// work (one day, one stage, one chunk of draws) derives its own key, so the
// numbers it consumes do not depend on how work is scheduled across threads.
class StreamKey {
 public:
  constexpr explicit StreamKey(std::uint64_t seed = 0) : value_(seed) {}

  [[nodiscard]] StreamKey derive(std::uint64_t tag) const;
  [[nodiscard]] StreamKey derive(std::initializer_list<std::uint64_t> tags) const;
  [[nodiscard]] Engine engine() const;
  [[nodiscard]] constexpr std::uint64_t value() const { return value_; }

 private:
  std::uint64_t value_;
};

// Tags for the stages of a day; kept stable because they feed the stream tree.
enum class StreamTag : std::uint64_t {
  kForecast = 1,
  kRecouple = 2,
  kSimulate = 3,
  kPhase2 = 4,
  kPhase3 = 5,
};

[[nodiscard]] inline StreamKey derive(StreamKey key, StreamTag tag) {
  return key.derive(static_cast<std::uint64_t>(tag));
}

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace sgdlm
