#include "sgdlm/core/random.hpp"

namespace sgdlm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

StreamKey StreamKey::derive(std::uint64_t tag) const {
  return StreamKey(splitmix64(value_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL)));
}

StreamKey StreamKey::derive(std::initializer_list<std::uint64_t> tags) const {
  StreamKey key = *this;
  for (auto tag : tags) key = key.derive(tag);
  return key;
}

Engine StreamKey::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(value_), static_cast<std::uint32_t>(value_ >> 32)};
  return Engine(seq);
}

}  // namespace sgdlm
