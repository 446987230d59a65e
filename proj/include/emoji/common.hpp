#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace emoji {

using std::size_t;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using dmat = MatX<double>;
using dvec = VecX<double>;
using fmat = MatX<float>;
using fvec = VecX<float>;
using Vec2d = Eigen::Vector2d;

// splitmix64: used to derive independent substream seeds from a root seed so
// that every stage/record draws from its own generator regardless of ordering.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t seed_stream(uint64_t root, uint64_t stream) {
  return splitmix64(root * 0x9e3779b97f4a7c15ull + splitmix64(stream + 0x632be59bd9b4e019ull));
}

// Convenience tag values for seed_stream so call sites stay readable.
inline uint64_t tag(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct Rng {
  std::mt19937_64 gen;

  explicit Rng(uint64_t seed) : gen(seed) {}
  Rng(uint64_t root, const std::string& stream) : gen(seed_stream(root, tag(stream))) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    // Fixed-width mantissa draw keeps values identical across libstdc++ versions.
    uint64_t r = gen() >> 11;  // 53 bits
    double u = double(r) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  }

  double normal() {
    // Box-Muller with explicit draws (std::normal_distribution is not portable).
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  uint64_t next() { return gen(); }

  // Uniform integer in [0, n) without modulo bias.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    uint64_t lim = ~uint64_t(0) - ~uint64_t(0) % n;
    uint64_t r;
    do {
      r = gen();
    } while (r >= lim);
    return r % n;
  }

  template <typename S>
  MatX<S> normal_mat(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    MatX<S> m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = S(normal() * scale);
    return m;
  }
};

// FNV-1a over raw bytes; used for config hashes and parameter fingerprints.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), h);
}

std::string hex64(uint64_t v);

template <typename S>
S clampv(S v, S lo, S hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace emoji
