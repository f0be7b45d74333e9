#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "anr/representation.hpp"
#include "anr/sampling.hpp"

namespace anr::spectral {

using Complex = std::complex<double>;

/// One term A sin(<omega, x> + phi); omega is angular (radians per unit).
struct WaveComponent {
  std::vector<double> omega;
  double amplitude = 1.0;
  double phase = 0.0;
};

/// Psi(x) = sum A sin(<omega, x> + phi).
struct WaveSet {
  std::vector<WaveComponent> components;

  /// `count` distinct integer bins k in [1, max_bin] (cycles per domain length),
  /// amplitudes U(0.5, 1) / count, phases U(0, 2 pi).
  static WaveSet random_line(Prng& rng, std::size_t count, std::size_t max_bin, double domain_length = 2.0);
  /// Single component with k cycles over `domain_length`.
  static WaveSet tone(std::size_t k, double amplitude = 1.0, double phase = 0.0, double domain_length = 2.0);

  [[nodiscard]] WaveSet concat(const WaveSet& other) const;
  /// Cycles per domain of each component (rounded), for 1D sets.
  [[nodiscard]] std::vector<std::size_t> bins(double domain_length = 2.0) const;
};

/// Exact evaluation at coordinates [q x C]; returns [q x 1].
Tensor synth_wave(const WaveSet& set, const Tensor& coords);

/// Forward DFT X_k = sum_t x_t exp(-2 pi i k t / n); radix-2 FFT for powers of two,
/// direct summation otherwise. Parseval: sum |x|^2 = sum |X|^2 / n.
std::vector<Complex> dft(std::span<const Complex> x);
std::vector<Complex> dft(std::span<const double> x);
/// Inverse with the 1/n factor, so idft(dft(x)) == x.
std::vector<Complex> idft(std::span<const Complex> X);

/// Energy per one-sided bin: index k in [0, n/2] holds (|X_k|^2 + |X_{n-k}|^2) / n.
std::vector<double> bin_energy(std::span<const Complex> X);

struct SpectrumReport {
  std::size_t samples = 0;
  std::size_t max_target_bin = 0;
  std::vector<double> energy;  // one-sided, index = cycles per domain
  double total = 0.0;
  double in_band = 0.0;      // energy at the target bins exactly
  double out_of_band = 0.0;  // energy in bins strictly above the highest target bin
  double ratio = 0.0;        // out_of_band / total
};

SpectrumReport spectrum_report(std::span<const double> samples, std::span<const std::size_t> target_bins);

/// Evaluates a 1D model on an upsample x dense grid of the training line
/// [lo, hi) and measures energy above the highest target frequency.
SpectrumReport aliased_energy(repr::CoordinateModel& model, std::size_t trained_n, std::size_t upsample,
                              const WaveSet& target, double lo = -1.0, double hi = 1.0);

struct ContinuityReport {
  double max_jump = 0.0;
  double total_variation = 0.0;
};

/// Adjacent differences along every grid axis of values [count x S] laid out as make_grid(grid).
ContinuityReport continuity_metric(const Tensor& values, const sampling::GridSpec& grid);
ContinuityReport continuity_metric(repr::CoordinateModel& model, const sampling::GridSpec& grid,
                                   std::size_t upsample);

struct GradcheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Gradients below this magnitude are compared on this absolute scale.
  double floor = 1e-4;
  /// Check at most this many elements per parameter (evenly strided); 0 checks all.
  std::size_t max_per_param = 0;
};

struct GradcheckReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // perturbation crossed a kink (relu, max, threshold)
  std::vector<std::string> failures;

  [[nodiscard]] bool passed() const { return failures.empty() && checked > 0; }
};

using LossFn = std::function<Var(Tape&)>;

/// Central finite differences against reverse-mode gradients for every element of `params`.
GradcheckReport gradcheck(const std::string& name, const LossFn& loss, const ParamList& params,
                          const GradcheckOptions& options = {});

}  // namespace anr::spectral
