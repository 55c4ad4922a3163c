#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace whalefl {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream seed for (base, tags...), e.g. (fisher_seed, client, round).
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Strict parse: the whole string must be consumed. Throws std::invalid_argument.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

}  // namespace whalefl
