#include "eegspec/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "eegspec/error.hpp"

namespace eegspec {
namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;
constexpr double kStabilityMargin = 1e-12;

// Both roots of z^2 + b*z + c, computed without cancellation in the smaller
// root.
std::pair<cd, cd> QuadraticRoots(cd b, cd c) {
  const cd disc = std::sqrt(b * b - 4.0 * c);
  cd q = (std::real(std::conj(b) * disc) >= 0.0) ? -0.5 * (b + disc) : -0.5 * (b - disc);
  if (q == cd(0.0)) return {cd(0.0), cd(0.0)};
  return {q, c / q};
}

Biquad SectionFromRoots(cd zero1, cd zero2, cd pole1, cd pole2) {
  Biquad s;
  s.b0 = 1.0;
  s.b1 = -std::real(zero1 + zero2);
  s.b2 = std::real(zero1 * zero2);
  s.a1 = -std::real(pole1 + pole2);
  s.a2 = std::real(pole1 * pole2);
  return s;
}

}  // namespace

std::pair<cd, cd> Biquad::Poles() const { return QuadraticRoots(cd(a1), cd(a2)); }

bool Biquad::IsStable() const {
  const auto [p1, p2] = Poles();
  return std::abs(p1) < 1.0 - kStabilityMargin && std::abs(p2) < 1.0 - kStabilityMargin;
}

cd Biquad::Response(cd z_inv) const {
  const cd z_inv2 = z_inv * z_inv;
  return (b0 + b1 * z_inv + b2 * z_inv2) / (1.0 + a1 * z_inv + a2 * z_inv2);
}

void SosCascade::Validate() const {
  if (sections.empty()) Fail(ErrorCode::kInvalidArgument, "cascade has no sections");
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (!sections[i].IsStable()) {
      Fail(ErrorCode::kInvalidArgument, "section " + std::to_string(i) + " has a pole on or outside the unit circle");
    }
  }
  if (!std::isfinite(overall_gain)) Fail(ErrorCode::kInvalidArgument, "cascade gain is not finite");
}

SosCascade IdentityCascade() { return SosCascade{{Biquad{}}, 1.0}; }

SosCascade DesignChebyBandpass(int order, double low_hz, double high_hz, double fs, double ripple_db) {
  if (order < 2 || order % 2 != 0) {
    Fail(ErrorCode::kInvalidArgument, "Chebyshev order must be even and >= 2, got " + std::to_string(order));
  }
  if (!(fs > 0.0)) Fail(ErrorCode::kInvalidArgument, "fs must be positive");
  if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    Fail(ErrorCode::kInvalidArgument, "band edges must satisfy 0 <= low < high < fs/2");
  }
  if (!(ripple_db > 0.0)) Fail(ErrorCode::kInvalidArgument, "ripple_db must be positive");

  // Analog lowpass prototype, cutoff 1 rad/s.
  const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / eps) / order;
  std::vector<cd> proto;
  for (int k = 1; k <= order; ++k) {
    const double theta = kPi * (2.0 * k - 1.0) / (2.0 * order);
    proto.emplace_back(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
  }
  // Even order: DC gain sits at the bottom of the ripple band.
  cd proto_gain = 1.0;
  for (const cd& p : proto) proto_gain *= -p;
  double gain = std::real(proto_gain) / std::sqrt(1.0 + eps * eps);

  // Prewarped band edges in rad/s.
  const double fs2 = 2.0 * fs;
  const double w_lo = fs2 * std::tan(kPi * low_hz / fs);
  const double w_hi = fs2 * std::tan(kPi * high_hz / fs);
  const bool lowpass = (low_hz == 0.0);

  std::vector<cd> analog_poles;
  int zeros_at_origin = 0;
  if (lowpass) {
    // s -> s / w_hi; all zeros stay at infinity.
    for (const cd& p : proto) analog_poles.push_back(p * w_hi);
    gain *= std::pow(w_hi, order);
  } else {
    // s -> (s^2 + w0^2) / (bw s): each prototype pole p yields the roots of
    // s^2 - p*bw*s + w0^2. Zeros: `order` at s = 0, `order` at infinity.
    const double bw = w_hi - w_lo;
    for (const cd& p : proto) {
      const auto [s1, s2] = QuadraticRoots(-p * bw, cd(w_lo * w_hi));
      analog_poles.push_back(s1);
      analog_poles.push_back(s2);
    }
    gain *= std::pow(bw, order);
    zeros_at_origin = order;
  }

  // Bilinear map z = (fs2 + s) / (fs2 - s). Zeros at s = 0 go to z = 1,
  // zeros at infinity go to z = -1.
  std::vector<cd> digital_poles;
  cd gain_ratio = 1.0;
  for (const cd& s : analog_poles) {
    digital_poles.push_back((fs2 + s) / (fs2 - s));
    gain_ratio /= (fs2 - s);
  }
  for (int i = 0; i < zeros_at_origin; ++i) gain_ratio *= fs2;
  gain *= std::real(gain_ratio);

  // Pair each upper-half-plane pole with its conjugate. Real poles pair
  // with each other.
  std::vector<cd> upper, real_poles;
  for (const cd& z : digital_poles) {
    if (std::abs(z.imag()) <= 1e-14 * std::max(1.0, std::abs(z))) {
      real_poles.emplace_back(z.real(), 0.0);
    } else if (z.imag() > 0.0) {
      upper.push_back(z);
    }
  }
  std::sort(upper.begin(), upper.end(), [](const cd& x, const cd& y) { return std::arg(x) < std::arg(y); });
  std::sort(real_poles.begin(), real_poles.end(), [](const cd& x, const cd& y) { return x.real() < y.real(); });
  if (upper.size() * 2 + real_poles.size() != digital_poles.size() || real_poles.size() % 2 != 0) {
    Fail(ErrorCode::kNumeric, "Chebyshev design produced unpaired poles");
  }

  // Each section is normalised to unit magnitude at the band centre (DC for
  // the lowpass case); the remainder is carried in overall_gain.
  const double f_center = lowpass ? 0.0 : fs / kPi * std::atan(std::sqrt(w_lo * w_hi) / fs2);
  const cd z_inv_center = std::polar(1.0, -2.0 * kPi * f_center / fs);
  const cd zero_a = lowpass ? cd(-1.0) : cd(1.0);

  SosCascade cascade;
  auto add_section = [&](cd p1, cd p2) {
    Biquad s = SectionFromRoots(zero_a, cd(-1.0), p1, p2);
    const double mag = std::abs(s.Response(z_inv_center));
    s.b0 /= mag;
    s.b1 /= mag;
    s.b2 /= mag;
    gain *= mag;
    cascade.sections.push_back(s);
  };
  for (const cd& p : upper) add_section(p, std::conj(p));
  for (std::size_t i = 0; i < real_poles.size(); i += 2) add_section(real_poles[i], real_poles[i + 1]);
  cascade.overall_gain = gain;
  cascade.Validate();
  return cascade;
}

SosCascade DesignNotch(double f0_hz, double fs, double q) {
  if (!(fs > 0.0)) Fail(ErrorCode::kInvalidArgument, "fs must be positive");
  if (!(f0_hz > 0.0 && f0_hz < fs / 2.0)) {
    Fail(ErrorCode::kInvalidArgument, "notch frequency must lie in (0, fs/2)");
  }
  if (!(q > 0.0)) Fail(ErrorCode::kInvalidArgument, "notch q must be positive");

  const double w0 = 2.0 * kPi * f0_hz / fs;
  const double bw = w0 / q;
  // -3 dB bandwidth design: beta = tan(bw/2), unit gain at DC and Nyquist.
  const double g = 1.0 / (1.0 + std::tan(bw / 2.0));
  const double c = std::cos(w0);

  Biquad s;
  s.b0 = g;
  s.b1 = -2.0 * c * g;
  s.b2 = g;
  s.a1 = -2.0 * c * g;
  s.a2 = 2.0 * g - 1.0;
  SosCascade cascade{{s}, 1.0};
  cascade.Validate();
  return cascade;
}

std::vector<double> ApplySos(const SosCascade& cascade, std::span<const double> signal) {
  for (std::size_t n = 0; n < signal.size(); ++n) {
    if (!std::isfinite(signal[n])) {
      Fail(ErrorCode::kNumeric, "non-finite input sample at index " + std::to_string(n));
    }
  }
  std::vector<double> y(signal.begin(), signal.end());
  for (const Biquad& s : cascade.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double x = v;
      const double out = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * out + z2;
      z2 = s.b2 * x - s.a2 * out;
      v = out;
    }
  }
  for (double& v : y) v *= cascade.overall_gain;
  return y;
}

std::vector<cd> FrequencyResponse(const SosCascade& cascade, std::span<const double> freqs_hz, double fs) {
  if (!(fs > 0.0)) Fail(ErrorCode::kInvalidArgument, "fs must be positive");
  std::vector<cd> out;
  out.reserve(freqs_hz.size());
  for (double f : freqs_hz) {
    if (!(f >= 0.0 && f <= fs / 2.0)) {
      Fail(ErrorCode::kInvalidArgument, "frequency " + std::to_string(f) + " Hz outside [0, fs/2]");
    }
    const cd z_inv = std::polar(1.0, -2.0 * kPi * f / fs);
    cd h = cascade.overall_gain;
    for (const Biquad& s : cascade.sections) h *= s.Response(z_inv);
    out.push_back(h);
  }
  return out;
}

std::string CascadeToJson(const SosCascade& cascade) {
  nlohmann::json j;
  j["gain"] = cascade.overall_gain;
  j["sections"] = nlohmann::json::array();
  for (const Biquad& s : cascade.sections) {
    j["sections"].push_back({{"b0", s.b0}, {"b1", s.b1}, {"b2", s.b2}, {"a1", s.a1}, {"a2", s.a2}});
  }
  return j.dump(2);
}

SosCascade CascadeFromJson(const std::string& text) {
  SosCascade cascade;
  try {
    const auto j = nlohmann::json::parse(text);
    cascade.overall_gain = j.at("gain").get<double>();
    for (const auto& s : j.at("sections")) {
      cascade.sections.push_back({s.at("b0").get<double>(), s.at("b1").get<double>(), s.at("b2").get<double>(),
                                  s.at("a1").get<double>(), s.at("a2").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("bad cascade JSON: ") + e.what());
  }
  cascade.Validate();
  return cascade;
}

}  // namespace eegspec
