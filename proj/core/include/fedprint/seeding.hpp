#pragma once

#include <cstdint>
#include <initializer_list>

namespace fedprint {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a path of
// integer keys. Distinct paths give unrelated seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t k : path) s = mix64(s ^ mix64(k + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags so derived seeds from different subsystems never collide.
namespace seed_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kClientTrain = 2;
inline constexpr std::uint64_t kClientSample = 3;
inline constexpr std::uint64_t kAttack = 4;
inline constexpr std::uint64_t kServerValidation = 5;
inline constexpr std::uint64_t kCentralTrain = 6;
inline constexpr std::uint64_t kCorpus = 7;
}  // namespace seed_tag

}  // namespace fedprint
