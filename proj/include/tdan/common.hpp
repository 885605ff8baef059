#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tdan {

// Domain tag of a review document.
enum class Domain { kSource, kTarget };

// Binary sentiment label.
enum class Label { kNegative = 0, kPositive = 1 };

inline const char* to_string(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

inline const char* to_string(Label l) {
  return l == Label::kPositive ? "pos" : "neg";
}

// All recoverable failures surface as tdan::Error; the CLI turns them into
// nonzero exits with the message on stderr.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, used to fingerprint vocabularies so downstream artifacts can
// detect a mismatched vocab before doing any work.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// splitmix64; derives independent sub-seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t z = seed ^ fnv1a(tag);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace tdan
