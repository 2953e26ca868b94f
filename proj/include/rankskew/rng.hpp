#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace rankskew {

/// Paths are simulated in contiguous chunks of this many; chunk c draws from
/// stream_id c, so output never depends on how chunks are scheduled.
inline constexpr std::size_t kChunkSize = 1024;

/// One reproducible Gaussian stream, identified by (seed, stream_id).
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// SplitMix64 finaliser. Used to derive child seeds (per maturity, per family
/// member) from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Draws standard normals from a stream. Uses boost's ziggurat sampler, whose
/// output is fixed by the engine state (unlike std::normal_distribution, which
/// varies between standard libraries).
class NormalSampler {
 public:
  explicit NormalSampler(RngStream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(stream.seed), static_cast<std::uint32_t>(stream.seed >> 32),
                      static_cast<std::uint32_t>(stream.stream_id),
                      static_cast<std::uint32_t>(stream.stream_id >> 32), 0x72616e6bU};
    engine_.seed(seq);
  }

  double operator()() { return dist_(engine_); }

  void fill(std::span<double> out) {
    for (double& v : out) v = dist_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> dist_;
};

inline std::vector<double> standard_normals(RngStream stream, std::size_t count) {
  std::vector<double> out(count);
  NormalSampler sampler(stream);
  sampler.fill(out);
  return out;
}

}  // namespace rankskew
