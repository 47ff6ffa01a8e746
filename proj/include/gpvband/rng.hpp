#pragma once

#include <cstdint>

namespace gpvband {

//! Splittable counter-style 64-bit generator (splitmix64 update).
//!
//! Every sampler and bootstrap replication derives its own stream from
//! (seed, stream tags) via `substream`, so results are reproducible and
//! independent of thread scheduling.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : state_(seed)
  {
  }

  std::uint64_t next_u64()
  {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  //! uniform on [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  //! uniform on (0, 1]; never returns 0 (keeps inverse-CDF draws finite
  //! and sampled bids strictly positive)
  double uniform_pos()
  {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  //! uniform integer in {0, ..., n-1}; exact for n < 2^53
  std::uint64_t uniform_index(std::uint64_t n)
  {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z)
{
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
} // namespace detail

//! Derive an independent deterministic stream from a master seed and up to
//! three tags (e.g. replication index, auction index, purpose constant).
inline Rng substream(std::uint64_t seed,
                     std::uint64_t a,
                     std::uint64_t b = 0,
                     std::uint64_t c = 0)
{
  std::uint64_t s = detail::mix64(seed + 0x9e3779b97f4a7c15ULL);
  s = detail::mix64(s ^ (a + 0xbf58476d1ce4e5b9ULL));
  s = detail::mix64(s ^ (b + 0x94d049bb133111ebULL));
  s = detail::mix64(s ^ (c + 0x2545f4914f6cdd1dULL));
  return Rng(s);
}

//! Derived 64-bit seed for a sub-experiment (e.g. one Monte Carlo
//! replication).
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::uint64_t a,
                                 std::uint64_t b = 0)
{
  std::uint64_t s = detail::mix64(seed ^ 0x6a09e667f3bcc909ULL);
  s = detail::mix64(s ^ (a * 0x9e3779b97f4a7c15ULL + 1));
  return detail::mix64(s ^ (b * 0xbf58476d1ce4e5b9ULL + 2));
}

//! stream tags; keeps purposes from colliding
enum class StreamTag : std::uint64_t
{
  data = 1,
  bootstrap = 2,
  shuffle = 3,
};

} // namespace gpvband
