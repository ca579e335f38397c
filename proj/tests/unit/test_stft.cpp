#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "eegspec/stft.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace eegspec;

TEST_CASE("blackman window") {
  const auto w3 = BlackmanWindow(3);
  REQUIRE(w3.size() == 3);
  CHECK(std::abs(w3[0]) < 1e-15);
  CHECK(w3[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(w3[2]) < 1e-15);
  CHECK(BlackmanWindow(1) == std::vector<double>{1.0});
  CHECK_THROWS_AS(BlackmanWindow(0), Error);

  const auto w = BlackmanWindow(342);
  const auto ref = oracle::Blackman(342);
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(w[k] == w[w.size() - 1 - k]);
    CHECK(std::abs(w[k] - ref[k]) < 1e-15);
  }
}

TEST_CASE("paper configuration") {
  const StftConfig c = PaperStftConfig();
  CHECK(c.win_len == 342);
  CHECK(c.hop == 2);
  CHECK(c.win_len - c.hop == 340);
  CHECK(c.nfft == 447);
  CHECK(c.OneSidedBins() == 224);
  CHECK(c.NumFrames(788) == 224);
  CHECK(c.SignalLengthFor(224) == 788);
  CHECK(c == StftConfig{});
}

TEST_CASE("config validation") {
  StftConfig c;
  c.hop = 0;
  CHECK_FAILS_WITH(c.Validate(), ErrorCode::kInvalidArgument, "stft.hop");
  c = StftConfig{};
  c.hop = 400;
  CHECK_FAILS_WITH(c.Validate(), ErrorCode::kInvalidArgument, "stft.hop");
  c = StftConfig{};
  c.nfft = 300;
  CHECK_FAILS_WITH(c.Validate(), ErrorCode::kInvalidArgument, "stft.nfft");
  c = StftConfig{};
  c.epsilon = 0.0;
  CHECK_FAILS_WITH(c.Validate(), ErrorCode::kInvalidArgument, "stft.epsilon");
}

TEST_CASE("stft of silence is exact zero") {
  const std::vector<double> x(788, 0.0);
  const ComplexStft s = Stft(x, PaperStftConfig());
  CHECK(s.values.rows == 224);
  CHECK(s.values.cols == 224);
  for (const auto& v : s.values.data) REQUIRE(v == std::complex<double>(0.0, 0.0));
  const Spectrogram p = LogPower(s);
  for (double v : p.values.data) REQUIRE(v == doctest::Approx(-27.631021115928547));
}

TEST_CASE("stft input errors") {
  std::vector<double> x(100, 1.0);
  CHECK_FAILS_WITH(Stft(x, PaperStftConfig()), ErrorCode::kInvalidArgument, "shorter than the window");
  x.resize(800, 0.0);
  x[500] = NAN;
  CHECK_FAILS_WITH(Stft(x, PaperStftConfig()), ErrorCode::kNumeric, "non-finite");
}

TEST_CASE("stft agrees with the naive DFT, power-of-two and prime sizes") {
  std::mt19937_64 gen(11);
  for (std::size_t nfft : {1u, 2u, 7u, 16u, 64u, 97u, 128u, 447u}) {
    StftConfig c;
    c.win_len = std::max<std::size_t>(1, nfft - nfft / 3);
    c.hop = std::max<std::size_t>(1, c.win_len / 4);
    c.nfft = nfft;
    const auto x = oracle::RandomSignal(c.win_len * 3, gen);
    const ComplexStft s = Stft(x, c);
    const auto ref = oracle::Stft(x, c.win_len, c.hop, c.nfft);
    REQUIRE(ref.size() == s.values.cols);
    double err = 0.0, scale = 0.0;
    for (std::size_t f = 0; f < ref.size(); ++f) {
      for (std::size_t k = 0; k < ref[f].size(); ++k) {
        err = std::max(err, std::abs(s.values(k, f) - ref[f][k]));
        scale = std::max(scale, std::abs(ref[f][k]));
      }
    }
    CAPTURE(nfft);
    CHECK(err <= 1e-12 * std::max(scale, 1e-300));
  }
}

TEST_CASE("a bin-centred tone peaks in its bin") {
  StftConfig c;
  c.win_len = 64;
  c.hop = 16;
  c.nfft = 64;
  c.fs = 64.0;
  std::vector<double> x(256);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = std::cos(2.0 * std::numbers::pi * 10.0 * n / 64.0);
  const Spectrogram p = LogPower(Stft(x, c));
  for (std::size_t f = 0; f < p.values.cols; ++f) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.values.rows; ++k) {
      if (p.values(k, f) > p.values(best, f)) best = k;
    }
    CHECK(best == 10);
  }
}

TEST_CASE("log power values") {
  ComplexStft s{ComplexMatrix(1, 3), StftConfig{}};
  s.values.data = {{1.0, 0.0}, {0.0, 0.0}, {3.0, 4.0}};
  const Spectrogram p = LogPower(s);
  CHECK(p.values.data[0] == doctest::Approx(1e-12).epsilon(1e-6));
  CHECK(p.values.data[1] == doctest::Approx(std::log(1e-12)));
  CHECK(p.values.data[1] == doctest::Approx(-27.6310211159));
  CHECK(p.values.data[2] == doctest::Approx(std::log(25.0)));
}

TEST_CASE("normalisation and stacking") {
  Spectrogram p;
  p.values = RealMatrix(2, 2);
  p.values.data = {-27.63, 0.0, 4.2, 1.0};
  const StackedSpectrogram s = Stack3(p);
  CHECK(s.plane.data[0] == 0.0f);
  CHECK(s.plane.data[2] == 1.0f);
  CHECK(s.plane.data[1] == doctest::Approx(27.63 / 31.83));
  for (std::size_t c = 0; c < 3; ++c) CHECK(s.component(c) == s.plane);
  CHECK_THROWS_AS(s.component(3), Error);

  Spectrogram flat;
  flat.values = RealMatrix(3, 4, -5.0);
  const StackedSpectrogram z = Stack3(flat);
  for (float v : z.plane.data) CHECK(v == 0.0f);
}

TEST_CASE("image quantisation") {
  RealMatrix m(2, 3);
  m.data = {0.0, 1.0, 2.0, 3.0, 4.0, 10.0};
  const auto img = QuantizeForImage(m);
  // Row 0 (lowest frequency) becomes the bottom image row.
  CHECK(img(1, 0) == 0);
  CHECK(img(1, 2) == 51);
  CHECK(img(0, 2) == 255);
  CHECK(img(0, 0) == 77);  // 255 * 0.3 = 76.5 rounds up

  const auto flat = QuantizeForImage(RealMatrix(4, 4, 3.0));
  for (auto v : flat.data) CHECK(v == 0);
}

TEST_CASE("pgm and png export") {
  const auto dir = ScratchDir("images");
  std::mt19937_64 gen(3);
  const auto x = oracle::RandomSignal(788, gen);
  const Spectrogram p = LogPower(Stft(x, PaperStftConfig()));
  ExportImage(p, dir / "a.pgm", ImageFormat::kPgm);
  const std::string pgm = oracle::ReadFile(dir / "a.pgm");
  const std::string header = "P5\n224 224\n255\n";
  REQUIRE(pgm.size() == header.size() + 224 * 224);
  CHECK(pgm.substr(0, header.size()) == header);
  const auto img = QuantizeForImage(p.values);
  CHECK(std::equal(img.data.begin(), img.data.end(), pgm.begin() + static_cast<long>(header.size()),
                   [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); }));
  CHECK(*std::max_element(img.data.begin(), img.data.end()) == 255);

  ExportImage(p, dir / "a.png", ImageFormat::kPng);
  const std::string png = oracle::ReadFile(dir / "a.png");
  REQUIRE(png.size() > 33);
  CHECK(png.substr(1, 3) == "PNG");
  CHECK(png.substr(12, 4) == "IHDR");
  // Big-endian width and height.
  CHECK(static_cast<unsigned char>(png[18]) == 0);
  CHECK(static_cast<unsigned char>(png[19]) == 224);
  CHECK(static_cast<unsigned char>(png[23]) == 224);
}

TEST_CASE("spectrogram dump round-trip") {
  const auto dir = ScratchDir("spg");
  RealMatrix m(3, 5);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = std::sqrt(static_cast<double>(i)) - 1.7;
  WriteSpectrogramDump(m, dir / "m.spg");
  CHECK(std::filesystem::file_size(dir / "m.spg") == 16 + 15 * 8);
  CHECK(ReadSpectrogramDump(dir / "m.spg") == m);
  std::string bytes = oracle::ReadFile(dir / "m.spg");
  bytes.resize(bytes.size() - 1);
  std::ofstream(dir / "t.spg", std::ios::binary) << bytes;
  CHECK_FAILS_WITH(ReadSpectrogramDump(dir / "t.spg"), ErrorCode::kFormat, "truncated");
}
