#ifndef DCP_RNG_HPP
#define DCP_RNG_HPP

#include <cmath>
#include <cstdint>

namespace dcp {

// SplitMix64 finalizer. Used both as the generator step and to key substreams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic counter-based generator. Streams are derived by mixing a seed
// with caller-chosen keys (trial index, node id, time step, ...) so draws do
// not depend on iteration order. Trajectories must be bit-identical across
// runs and across the serial/OpenMP trial pools, which rules out the
// implementation-defined std:: distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    static Rng keyed(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0x243f6a8885a308d3ULL,
                     std::uint64_t k3 = 0x13198a2e03707344ULL) {
        std::uint64_t s = mix64(seed);
        s = mix64(s ^ k1);
        s = mix64(s ^ k2);
        s = mix64(s ^ k3);
        return Rng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform on [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // zero-mean Laplace with scale v (variance 2v^2), by inverse CDF
    double laplace(double v) {
        double u = next_double() - 0.5;
        double s = (u < 0.0) ? -1.0 : 1.0;
        return -v * s * std::log1p(-2.0 * std::fabs(u));
    }

    // standard normal via Box-Muller; two uniforms per draw, no caching,
    // so the draw count per call is fixed
    double normal(double sigma = 1.0) {
        double u1 = 1.0 - next_double();  // (0,1]
        double u2 = next_double();
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::uint64_t state_;
};

}  // namespace dcp

#endif
