#ifndef ETO_UTIL_HPP_
#define ETO_UTIL_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace eto {

// Platform-independent RNG helpers. std distributions are implementation
// defined, which would break byte-identical outputs across toolchains.
using Rng = uint64_t;  // splitmix64 state

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform in [0, 1).
inline double uniform01(uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

inline double uniform(uint64_t& state, double lo, double hi) {
  return lo + (hi - lo) * uniform01(state);
}

// Uniform integer in [0, n).
inline int uniform_int(uint64_t& state, int n) {
  return static_cast<int>(uniform01(state) * n);
}

inline double normal(uint64_t& state) {
  double u1 = uniform01(state);
  double u2 = uniform01(state);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Derives an independent stream seed from a parent seed and a tag.
inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  uint64_t s = seed ^ (0xD1B54A32D192ED03ull * (tag + 1));
  splitmix64(s);
  return splitmix64(s);
}

// Shortest round-trip decimal representation.
std::string format_double(double value);

// Writes to a temporary sibling and renames over the target.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Minimal CSV reader for the numeric files this project emits and consumes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;  // -1 when absent
};

CsvTable parse_csv(std::string_view text);

// Nearest-rank percentile of an unsorted sample, p in (0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace eto

#endif  // ETO_UTIL_HPP_
