#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace shopbench::forge {

/// Seeded stream with portable helpers: the standard distributions are
/// implementation-defined, so only raw engine output is used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  /// True with probability p.
  bool chance(double p) { return static_cast<double>(engine_() >> 11) * 0x1.0p-53 < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    if (v.empty()) throw std::invalid_argument("pick from an empty list");
    return v[static_cast<std::size_t>(range(0, static_cast<std::int64_t>(v.size()) - 1))];
  }

  /// k distinct elements of v, in v's order.
  template <typename T>
  std::vector<T> sample(const std::vector<T>& v, std::size_t k) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::swap(idx[i], idx[static_cast<std::size_t>(range(static_cast<std::int64_t>(i),
                                                           static_cast<std::int64_t>(idx.size()) - 1))]);
    idx.resize(std::min(k, idx.size()));
    std::sort(idx.begin(), idx.end());
    std::vector<T> out;
    for (auto i : idx) out.push_back(v[i]);
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

/// Independent stream seed for item `index` of a run seeded with `seed`.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace shopbench::forge
