#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace eegspec {

// H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  // Roots of z^2 + a1 z + a2.
  std::pair<std::complex<double>, std::complex<double>> Poles() const;
  bool IsStable() const;
  std::complex<double> Response(std::complex<double> z_inv) const;
};

struct SosCascade {
  std::vector<Biquad> sections;
  double overall_gain = 1.0;

  // Throws kInvalidArgument if empty or any section has a pole with
  // magnitude >= 1 - 1e-12.
  void Validate() const;
};

SosCascade IdentityCascade();

// Chebyshev type I bandpass: analog prototype of `order` poles, lowpass to
// bandpass transform with prewarped edges, bilinear map at fs. Yields
// `order` biquads (2 * order poles). low_hz == 0 designs the plain lowpass
// instead (order / 2 biquads).
SosCascade DesignChebyBandpass(int order, double low_hz, double high_hz, double fs, double ripple_db);

// Second-order notch with zeros on the unit circle at +-2*pi*f0/fs and unit
// gain at DC and Nyquist. q = f0 / (-3 dB bandwidth).
SosCascade DesignNotch(double f0_hz, double fs, double q);

// Causal transposed direct form II, zero initial state per call.
std::vector<double> ApplySos(const SosCascade& cascade, std::span<const double> signal);

std::vector<std::complex<double>> FrequencyResponse(const SosCascade& cascade, std::span<const double> freqs_hz,
                                                    double fs);

// {"gain": g, "sections": [{"b0":..,"b1":..,"b2":..,"a1":..,"a2":..}, ...]}
std::string CascadeToJson(const SosCascade& cascade);
SosCascade CascadeFromJson(const std::string& json);

}  // namespace eegspec
