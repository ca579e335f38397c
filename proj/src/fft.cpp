#include "fft.hpp"

#include <numbers>
#include <utility>

#include "eegspec/error.hpp"

namespace eegspec::detail {
namespace {

bool IsPowerOfTwo(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (n == 0) Fail(ErrorCode::kInvalidArgument, "FFT length must be positive");
  bluestein_ = !IsPowerOfTwo(n);
  m_ = bluestein_ ? NextPowerOfTwo(2 * n - 1) : n;

  twiddles_.resize(m_ / 2);
  for (std::size_t j = 0; j < m_ / 2; ++j) {
    twiddles_[j] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m_));
  }

  if (bluestein_) {
    chirp_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      // j^2 mod 2n keeps the phase argument small and exact.
      const std::size_t jj = (j * j) % (2 * n);
      chirp_[j] = std::polar(1.0, -std::numbers::pi * static_cast<double>(jj) / static_cast<double>(n));
    }
    chirp_filter_.assign(m_, {0.0, 0.0});
    chirp_filter_[0] = std::conj(chirp_[0]);
    for (std::size_t j = 1; j < n; ++j) {
      chirp_filter_[j] = std::conj(chirp_[j]);
      chirp_filter_[m_ - j] = std::conj(chirp_[j]);
    }
    Radix2(chirp_filter_, false);
    work_.resize(m_);
  }
}

void FftPlan::Radix2(std::span<std::complex<double>> a, bool inverse) const {
  const std::size_t m = a.size();
  for (std::size_t i = 1, j = 0; i < m; ++i) {
    std::size_t bit = m >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= m; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = m / len;
    for (std::size_t start = 0; start < m; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<double> w = twiddles_[k * stride];
        if (inverse) w = std::conj(w);
        const std::complex<double> u = a[start + k];
        const std::complex<double> v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

void FftPlan::Forward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) Fail(ErrorCode::kInvalidArgument, "FFT buffer size mismatch");
  if (!bluestein_) {
    Radix2(data, false);
    return;
  }
  // X[k] = conj-chirp-weighted circular convolution; see Bluestein (1970).
  std::fill(work_.begin(), work_.end(), std::complex<double>(0.0, 0.0));
  for (std::size_t j = 0; j < n_; ++j) work_[j] = data[j] * chirp_[j];
  Radix2(work_, false);
  for (std::size_t j = 0; j < m_; ++j) work_[j] *= chirp_filter_[j];
  Radix2(work_, true);
  const double scale = 1.0 / static_cast<double>(m_);
  for (std::size_t k = 0; k < n_; ++k) data[k] = work_[k] * chirp_[k] * scale;
}

}  // namespace eegspec::detail
