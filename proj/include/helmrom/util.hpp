#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace helmrom {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

/// FNV-1a 64-bit running hash.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= static_cast<std::uint64_t>(p[i]);
      state_ *= 0x100000001b3ull;
    }
  }
  void add_u64(std::uint64_t v) { add_bytes(&v, sizeof v); }
  void add_f64(double v) { add_bytes(&v, sizeof v); }
  template <typename Scalar, int R, int C>
  void add_matrix(const Eigen::Matrix<Scalar, R, C>& m) {
    add_u64(static_cast<std::uint64_t>(m.rows()));
    add_u64(static_cast<std::uint64_t>(m.cols()));
    add_bytes(m.data(), sizeof(Scalar) * static_cast<std::size_t>(m.size()));
  }
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

/// FNV-1a over a byte range, as a 16-digit hex string.
std::string fingerprint_bytes(const void* data, std::size_t n);

/// Formats a double with %.17g (shortest round-trippable decimal superset).
std::string format_g17(double v);

/// Runs fn(i) for i in [0, n). With threads <= 1 the loop is serial; with
/// more threads the index range is split into contiguous chunks. fn must
/// write only to slots owned by its index.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Deterministic 64-bit mixer (splitmix64), used to derive reproducible
/// pseudo-random sequences in tests and experiments.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  /// Uniform double in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform double in [a, b).
  double next_double(double a, double b) { return a + (b - a) * next_double(); }

 private:
  std::uint64_t state_;
};

}  // namespace helmrom
