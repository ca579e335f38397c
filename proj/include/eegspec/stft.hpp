#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace eegspec {

template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<std::complex<double>>;

struct StftConfig {
  std::size_t win_len = 342;
  std::size_t hop = 2;  // 342-sample window with 340 samples of overlap
  std::size_t nfft = 447;
  double fs = 512.0;
  double epsilon = 1e-12;

  // Requires 0 < hop <= win_len <= nfft, fs > 0, epsilon > 0.
  void Validate() const;

  // floor(nfft / 2) + 1; (nfft + 1) / 2 for odd nfft.
  std::size_t OneSidedBins() const { return nfft / 2 + 1; }
  // floor((signal_len - win_len) / hop) + 1, or 0 when the signal is short.
  std::size_t NumFrames(std::size_t signal_len) const {
    return signal_len < win_len ? 0 : (signal_len - win_len) / hop + 1;
  }
  // Shortest signal that yields `frames` frames.
  std::size_t SignalLengthFor(std::size_t frames) const { return (frames - 1) * hop + win_len; }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// rows = frequency bins (0 = DC), cols = frames.
struct ComplexStft {
  ComplexMatrix values;
  StftConfig cfg;
};

struct Spectrogram {
  RealMatrix values;
  StftConfig cfg;
};

// The three colour components of a network input are the same min-max
// normalised plane, so it is stored once.
struct StackedSpectrogram {
  static constexpr std::size_t kComponents = 3;

  Matrix<float> plane;  // values in [0, 1]

  const Matrix<float>& component(std::size_t c) const;
  std::size_t height() const { return plane.rows; }
  std::size_t width() const { return plane.cols; }
};

// Symmetric Blackman, 0.42 - 0.5 cos(2 pi k/(m-1)) + 0.08 cos(4 pi k/(m-1)),
// with the two end samples exactly 0 for m >= 2.
std::vector<double> BlackmanWindow(std::size_t m);

// Full two-sided nfft-point DFT of `frame` zero-padded to nfft.
std::vector<std::complex<double>> ZeroPaddedDft(std::span<const double> frame, std::size_t nfft);

ComplexStft Stft(std::span<const double> signal, const StftConfig& cfg);

// ln(|X|^2 + epsilon).
Spectrogram LogPower(const ComplexStft& s);

// Min-max normalisation to [0, 1]; a constant input maps to all zeros.
RealMatrix MinMaxNormalize(const RealMatrix& m);
StackedSpectrogram Stack3(const Spectrogram& p);

enum class ImageFormat { kPgm, kPng };

// 8-bit grey levels round(255 * minmax(p)), flipped so that the lowest
// frequency is the bottom image row. Result is height x width.
Matrix<std::uint8_t> QuantizeForImage(const RealMatrix& values);

void ExportImage(const Spectrogram& p, const std::filesystem::path& path, ImageFormat format);
void WriteGrayImage(const Matrix<std::uint8_t>& image, const std::filesystem::path& path, ImageFormat format);

// SPG1 dump: "SPG1", u32 rows, u32 cols, u32 reserved (0), then rows*cols
// little-endian f64 row-major.
void WriteSpectrogramDump(const RealMatrix& values, const std::filesystem::path& path);
RealMatrix ReadSpectrogramDump(const std::filesystem::path& path);

// win 342 / hop 2 / nfft 447 at 512 Hz: 788 samples -> 224 x 224.
StftConfig PaperStftConfig();
inline constexpr std::size_t kPaperSliceLength = 788;

}  // namespace eegspec
