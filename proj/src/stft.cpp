#include "eegspec/stft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <png.h>

#include "binary_io.hpp"
#include "eegspec/error.hpp"
#include "fft.hpp"

namespace eegspec {

void StftConfig::Validate() const {
  if (hop == 0) Fail(ErrorCode::kInvalidArgument, "stft.hop must be > 0");
  if (hop > win_len) Fail(ErrorCode::kInvalidArgument, "stft.hop must be <= stft.win");
  if (win_len > nfft) Fail(ErrorCode::kInvalidArgument, "stft.win must be <= stft.nfft");
  if (!(fs > 0.0)) Fail(ErrorCode::kInvalidArgument, "stft fs must be > 0");
  if (!(epsilon > 0.0)) Fail(ErrorCode::kInvalidArgument, "stft.epsilon must be > 0");
}

const Matrix<float>& StackedSpectrogram::component(std::size_t c) const {
  if (c >= kComponents) Fail(ErrorCode::kInvalidArgument, "component index out of range");
  return plane;
}

std::vector<double> BlackmanWindow(std::size_t m) {
  if (m < 1) Fail(ErrorCode::kInvalidArgument, "window length must be >= 1");
  if (m == 1) return {1.0};
  std::vector<double> w(m);
  const double denom = static_cast<double>(m - 1);
  // Fill the first half and mirror so that w[k] == w[m-1-k] bit for bit.
  for (std::size_t k = 0; k < (m + 1) / 2; ++k) {
    const double x = static_cast<double>(k) / denom;
    w[k] = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * x) + 0.08 * std::cos(4.0 * std::numbers::pi * x);
    w[m - 1 - k] = w[k];
  }
  // 0.42 - 0.5 + 0.08 is exactly zero, but not in binary floating point.
  w[0] = w[m - 1] = 0.0;
  return w;
}

std::vector<std::complex<double>> ZeroPaddedDft(std::span<const double> frame, std::size_t nfft) {
  if (frame.size() > nfft) Fail(ErrorCode::kInvalidArgument, "frame longer than nfft");
  detail::FftPlan plan(nfft);
  std::vector<std::complex<double>> buf(nfft);
  std::copy(frame.begin(), frame.end(), buf.begin());
  plan.Forward(buf);
  return buf;
}

ComplexStft Stft(std::span<const double> signal, const StftConfig& cfg) {
  cfg.Validate();
  if (signal.size() < cfg.win_len) {
    Fail(ErrorCode::kInvalidArgument, "signal of " + std::to_string(signal.size()) +
                                          " samples is shorter than the window (" + std::to_string(cfg.win_len) + ")");
  }
  for (double v : signal) {
    if (!std::isfinite(v)) Fail(ErrorCode::kNumeric, "non-finite sample in STFT input");
  }

  const std::vector<double> window = BlackmanWindow(cfg.win_len);
  const std::size_t bins = cfg.OneSidedBins();
  const std::size_t frames = cfg.NumFrames(signal.size());
  detail::FftPlan plan(cfg.nfft);

  ComplexStft out{ComplexMatrix(bins, frames), cfg};
  std::vector<std::complex<double>> buf(cfg.nfft);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t n = 0; n < cfg.win_len; ++n) buf[n] = signal[start + n] * window[n];
    std::fill(buf.begin() + static_cast<std::ptrdiff_t>(cfg.win_len), buf.end(), std::complex<double>(0.0, 0.0));
    plan.Forward(buf);
    for (std::size_t k = 0; k < bins; ++k) out.values(k, t) = buf[k];
  }
  return out;
}

Spectrogram LogPower(const ComplexStft& s) {
  Spectrogram p{RealMatrix(s.values.rows, s.values.cols), s.cfg};
  for (std::size_t i = 0; i < s.values.data.size(); ++i) {
    p.values.data[i] = std::log(std::norm(s.values.data[i]) + s.cfg.epsilon);
  }
  return p;
}

RealMatrix MinMaxNormalize(const RealMatrix& m) {
  RealMatrix out(m.rows, m.cols, 0.0);
  if (m.data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(m.data.begin(), m.data.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    out.data[i] = std::clamp((m.data[i] - lo) / range, 0.0, 1.0);
  }
  return out;
}

StackedSpectrogram Stack3(const Spectrogram& p) {
  const RealMatrix norm = MinMaxNormalize(p.values);
  StackedSpectrogram s;
  s.plane = Matrix<float>(norm.rows, norm.cols);
  for (std::size_t i = 0; i < norm.data.size(); ++i) s.plane.data[i] = static_cast<float>(norm.data[i]);
  return s;
}

Matrix<std::uint8_t> QuantizeForImage(const RealMatrix& values) {
  const RealMatrix norm = MinMaxNormalize(values);
  Matrix<std::uint8_t> image(norm.rows, norm.cols);
  for (std::size_t r = 0; r < norm.rows; ++r) {
    const std::size_t dst_row = norm.rows - 1 - r;
    for (std::size_t c = 0; c < norm.cols; ++c) {
      image(dst_row, c) = static_cast<std::uint8_t>(std::lround(255.0 * norm(r, c)));
    }
  }
  return image;
}

namespace {

void WritePgm(const Matrix<std::uint8_t>& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "P5\n" << image.cols << " " << image.rows << "\n255\n";
  detail::WriteBytes(out, image.data.data(), image.data.size());
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

void WritePng(const Matrix<std::uint8_t>& image, const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    Fail(ErrorCode::kIo, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    Fail(ErrorCode::kIo, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols), static_cast<png_uint_32>(image.rows), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < image.rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + r * image.cols));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace

void WriteGrayImage(const Matrix<std::uint8_t>& image, const std::filesystem::path& path, ImageFormat format) {
  if (image.rows == 0 || image.cols == 0) Fail(ErrorCode::kInvalidArgument, "cannot write an empty image");
  if (format == ImageFormat::kPgm) {
    WritePgm(image, path);
  } else {
    WritePng(image, path);
  }
}

void ExportImage(const Spectrogram& p, const std::filesystem::path& path, ImageFormat format) {
  WriteGrayImage(QuantizeForImage(p.values), path, format);
}

void WriteSpectrogramDump(const RealMatrix& values, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  detail::WriteBytes(out, "SPG1", 4);
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(values.rows));
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(values.cols));
  detail::WriteLe<std::uint32_t>(out, 0);
  detail::WriteBytes(out, values.data.data(), values.data.size() * sizeof(double));
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

RealMatrix ReadSpectrogramDump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != "SPG1") Fail(ErrorCode::kFormat, "bad magic in " + path.string());
  const auto rows = detail::ReadLe<std::uint32_t>(in, "rows");
  const auto cols = detail::ReadLe<std::uint32_t>(in, "cols");
  detail::ReadLe<std::uint32_t>(in, "reserved");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size < 16 || (size - 16) / sizeof(double) < std::uint64_t{rows} * cols) {
    Fail(ErrorCode::kFormat, "truncated file while reading spectrogram values");
  }
  RealMatrix m(rows, cols);
  detail::ReadBytes(in, m.data.data(), m.data.size() * sizeof(double), "spectrogram values");
  return m;
}

StftConfig PaperStftConfig() { return StftConfig{342, 2, 447, 512.0, 1e-12}; }

}  // namespace eegspec
