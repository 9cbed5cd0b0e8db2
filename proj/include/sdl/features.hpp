#ifndef SDL_FEATURES_HPP
#define SDL_FEATURES_HPP

#include <complex>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "sdl/common.hpp"

namespace sdl {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  void validate() const {
    require(!samples.empty(), "audio clip is empty");
    require(sample_rate > 0, "sample rate must be positive");
  }
};

/// Magnitude STFT, one column per frame. Rows are bins 0..window/2.
struct Spectrogram {
  Matrix magnitudes;
  double bin_hz = 0.0;
  int window_size = 0;
  int hop = 0;

  int bins() const { return static_cast<int>(magnitudes.rows()); }
  int frames() const { return static_cast<int>(magnitudes.cols()); }
};

enum class FeatureKind { pooled_spectrogram, chroma, interpolated_psd };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::pooled_spectrogram: return "pooled_spectrogram";
    case FeatureKind::chroma: return "chroma";
    case FeatureKind::interpolated_psd: return "interpolated_psd";
  }
  return "unknown";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "pooled_spectrogram" || s == "pooled" || s == "spectrogram")
    return FeatureKind::pooled_spectrogram;
  if (s == "chroma") return FeatureKind::chroma;
  if (s == "interpolated_psd" || s == "psd") return FeatureKind::interpolated_psd;
  throw Error("unknown feature kind '" + s + "'");
}

struct FeatureVector {
  Vector values;
  FeatureKind kind = FeatureKind::pooled_spectrogram;
};

inline constexpr int kDefaultWindow = 4096;
inline constexpr int kDefaultHop = 32;
inline constexpr int kDefaultPooledDim = 256;
inline constexpr double kDefaultChromaFmin = 55.0;
inline constexpr double kDefaultChromaFmax = 8000.0;
inline constexpr int kDefaultPsdNotes = 96;
inline constexpr int kDefaultPsdBaseMidi = 24;

inline double midi_to_freq(int midi) {
  require(midi >= 0 && midi <= 127, "MIDI note must be in 0..127");
  return 440.0 * std::pow(2.0, (midi - 69) / 12.0);
}

/// Periodic Hann window.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

/// Frames that would overrun the clip are dropped; no padding.
inline Spectrogram stft_magnitude(const AudioClip& clip,
                                  int window_size = kDefaultWindow,
                                  int hop = kDefaultHop) {
  clip.validate();
  require(window_size >= 2 && window_size % 2 == 0,
          "window size must be even and >= 2");
  require(hop >= 1, "hop must be >= 1");
  const auto len = static_cast<int>(clip.samples.size());
  if (len < window_size) throw Error("clip too short");

  const int frames = 1 + (len - window_size) / hop;
  const int bins = window_size / 2 + 1;
  Spectrogram spec;
  spec.magnitudes.resize(bins, frames);
  spec.bin_hz = static_cast<double>(clip.sample_rate) / window_size;
  spec.window_size = window_size;
  spec.hop = hop;

  const auto window = hann_window(window_size);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(window_size);
  std::vector<std::complex<double>> out;
  for (int t = 0; t < frames; ++t) {
    const double* src = clip.samples.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < window_size; ++i) frame[i] = src[i] * window[i];
    fft.fwd(out, frame);
    for (int f = 0; f < bins; ++f) spec.magnitudes(f, t) = std::abs(out[f]);
  }
  return spec;
}

/// Contiguous bin groups of size bins/target_dim; the last group absorbs the
/// remainder. Returns the [begin, end) bin range of each group.
inline std::vector<std::pair<int, int>> bin_groups(int bins, int target_dim) {
  require(target_dim >= 1, "target dimension must be >= 1");
  require(target_dim <= bins, "target dimension exceeds bin count");
  const int width = bins / target_dim;
  std::vector<std::pair<int, int>> groups(target_dim);
  for (int g = 0; g < target_dim; ++g) {
    groups[g] = {g * width, g == target_dim - 1 ? bins : (g + 1) * width};
  }
  return groups;
}

/// Time mean, then log(1+v), then bin-group average, then unit l2 norm.
inline FeatureVector pool_time(const Spectrogram& spec, int target_dim = kDefaultPooledDim) {
  require(spec.frames() >= 1, "spectrogram has no frames");
  const auto groups = bin_groups(spec.bins(), target_dim);
  const Vector mean = spec.magnitudes.rowwise().mean();
  const Vector logged = mean.array().log1p().matrix();

  FeatureVector fv;
  fv.kind = FeatureKind::pooled_spectrogram;
  fv.values.resize(target_dim);
  for (int g = 0; g < target_dim; ++g) {
    const auto [b, e] = groups[g];
    fv.values(g) = logged.segment(b, e - b).mean();
  }
  const double norm = fv.values.norm();
  if (norm > 0.0) fv.values /= norm;
  return fv;
}

/// Time-averaged power per bin.
inline Vector mean_power(const Spectrogram& spec) {
  require(spec.frames() >= 1, "spectrogram has no frames");
  return spec.magnitudes.array().square().rowwise().mean().matrix();
}

/// Pitch class 0 = C, ..., 9 = A, relative to A4 = 440 Hz.
inline int pitch_class(double freq_hz) {
  const long midi = std::lround(12.0 * std::log2(freq_hz / 440.0)) + 69;
  return static_cast<int>(((midi % 12) + 12) % 12);
}

inline FeatureVector chroma(const Spectrogram& spec, int sample_rate,
                            double fmin = kDefaultChromaFmin,
                            double fmax = kDefaultChromaFmax) {
  require(sample_rate > 0, "sample rate must be positive");
  require(fmin > 0.0 && fmin < fmax && fmax <= 0.5 * sample_rate,
          "chroma band must satisfy 0 < fmin < fmax <= Nyquist");
  const Vector power = mean_power(spec);
  FeatureVector fv;
  fv.kind = FeatureKind::chroma;
  fv.values = Vector::Zero(12);
  for (int f = 1; f < spec.bins(); ++f) {
    const double hz = f * spec.bin_hz;
    if (hz < fmin || hz > fmax) continue;
    fv.values(pitch_class(hz)) += power(f);
  }
  const double total = fv.values.sum();
  if (total > 0.0) fv.values /= total;
  return fv;
}

/// Power spectrum sampled at equal-tempered note frequencies by linear
/// interpolation between neighbouring bins. Notes above Nyquist give 0.
inline FeatureVector interpolated_psd(const Spectrogram& spec, int sample_rate,
                                      int note_count = kDefaultPsdNotes,
                                      int base_midi = kDefaultPsdBaseMidi) {
  require(sample_rate > 0, "sample rate must be positive");
  require(note_count >= 1, "note count must be >= 1");
  const Vector power = mean_power(spec);
  const double nyquist = 0.5 * sample_rate;
  FeatureVector fv;
  fv.kind = FeatureKind::interpolated_psd;
  fv.values = Vector::Zero(note_count);
  for (int m = 0; m < note_count; ++m) {
    const double hz = midi_to_freq(base_midi + m);
    if (hz > nyquist) continue;
    const double pos = hz / spec.bin_hz;
    const int lo = static_cast<int>(std::floor(pos));
    if (lo >= spec.bins() - 1) {
      fv.values(m) = power(spec.bins() - 1);
      continue;
    }
    const double frac = pos - lo;
    fv.values(m) = (1.0 - frac) * power(lo) + frac * power(lo + 1);
  }
  return fv;
}

}  // namespace sdl

#endif  // SDL_FEATURES_HPP
