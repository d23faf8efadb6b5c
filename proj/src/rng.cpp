#include "depin/rng.hpp"

namespace depin {

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::int64_t> keys) {
  std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc909ULL);
  for (std::int64_t k : keys) {
    h = mix64(h ^ mix64(static_cast<std::uint64_t>(k) + 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

}  // namespace depin
