#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace netmoe {

/// Deterministic random source. All distributions are hand-rolled on top of
/// the mt19937_64 stream so that draws are bit-identical across platforms and
/// standard-library versions (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  /// Folds a stream tag into a seed. Composable: nested mix_seed calls give
  /// independent substream hierarchies (per expert, per epoch, per sample).
  static std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix(seed) ^ mix(stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  }

  /// Substream derived from (seed, stream). Substreams are independent of the
  /// order in which they are created, so workers can own their own source.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; pairs are cached, so the draw sequence
  /// depends only on the call sequence.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Circularly symmetric complex Gaussian with E|x|^2 = variance.
  std::complex<double> complex_normal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
  }

  /// Gamma with integer shape (Erlang): sum of `shape` exponentials.
  double gamma_int(int shape, double scale) {
    double acc = 0.0;
    for (int i = 0; i < shape; ++i) acc += -std::log(1.0 - uniform());
    return scale * acc;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  // splitmix64 finalizer; decorrelates nearby seeds.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stable 64-bit content digest (FNV-1a); used for replay-store keys and
/// config hashes in run manifests.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace netmoe
