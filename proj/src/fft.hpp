#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace eegspec::detail {

// Forward DFT of arbitrary length: iterative radix-2 for powers of two,
// Bluestein's chirp-z reduction onto a radix-2 transform otherwise.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }

  // X[k] = sum_n x[n] exp(-2*pi*i*k*n/N); in-place on a buffer of size().
  void Forward(std::span<std::complex<double>> data) const;

 private:
  void Radix2(std::span<std::complex<double>> data, bool inverse) const;

  std::size_t n_ = 0;
  std::size_t m_ = 0;  // radix-2 length (n_ itself, or the Bluestein size)
  bool bluestein_ = false;
  std::vector<std::complex<double>> twiddles_;       // exp(-2*pi*i*j/m), j < m/2
  std::vector<std::complex<double>> chirp_;          // exp(-i*pi*j^2/n), j < n
  std::vector<std::complex<double>> chirp_filter_;   // FFT of the conjugate chirp, length m
  mutable std::vector<std::complex<double>> work_;
};

}  // namespace eegspec::detail
