#include "mcdimpute/rng.hpp"

namespace mcdi {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(splitmix64(seed) ^ splitmix64(salt + 0x632be59bd9b4e019ULL));
}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(mix_seed(seed_, fnv1a(label)));
}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(mix_seed(seed_ ^ 0xa0761d6478bd642fULL, index));
}

}  // namespace mcdi
