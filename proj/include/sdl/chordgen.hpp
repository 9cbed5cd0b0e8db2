#ifndef SDL_CHORDGEN_HPP
#define SDL_CHORDGEN_HPP

#include <array>
#include <string>
#include <vector>

#include "sdl/features.hpp"

namespace sdl {

struct ChordType {
  std::string name;
  std::vector<int> intervals;  // semitone steps, each 3 or 4

  int note_count() const { return static_cast<int>(intervals.size()) + 1; }
};

/// The fourteen tertian thirds, triads and sevenths. Label = index + 1.
inline const std::vector<ChordType>& chord_types() {
  static const std::vector<ChordType> types = {
      {"Minor third", {3}},
      {"Major third", {4}},
      {"Diminished triad", {3, 3}},
      {"Minor triad", {3, 4}},
      {"Major triad", {4, 3}},
      {"Augmented triad", {4, 4}},
      {"Diminished seventh", {3, 3, 3}},
      {"Half-diminished seventh", {3, 3, 4}},
      {"Minor seventh", {3, 4, 3}},
      {"Minor major seventh", {3, 4, 4}},
      {"Dominant seventh", {4, 3, 3}},
      {"Major seventh", {4, 3, 4}},
      {"Augmented major seventh", {4, 4, 3}},
      {"Augmented augmented seventh", {4, 4, 4}},
  };
  return types;
}

inline constexpr int kChordClasses = 14;

struct InstrumentProfile {
  std::string name;
  std::vector<double> harmonic_amplitudes;
  double attack = 0.01;   // seconds
  double release = 0.05;  // seconds
  double inharmonicity_jitter = 0.002;

  void validate(double duration) const {
    require(!harmonic_amplitudes.empty() && harmonic_amplitudes[0] > 0.0,
            "instrument '" + name + "' needs a positive fundamental amplitude");
    for (double a : harmonic_amplitudes)
      require(a >= 0.0 && std::isfinite(a), "instrument amplitudes must be non-negative");
    require(attack >= 0.0 && release >= 0.0 && attack + release < duration,
            "instrument '" + name + "' envelope exceeds clip duration");
    require(inharmonicity_jitter >= 0.0 && inharmonicity_jitter < 0.05,
            "inharmonicity jitter out of range");
  }
};

/// Eleven harmonic-decay families: geometric partial ratios 0.3..0.8,
/// 4..12 partials and staggered envelopes.
inline std::vector<InstrumentProfile> default_instruments() {
  std::vector<InstrumentProfile> out;
  for (int i = 0; i < 11; ++i) {
    InstrumentProfile p;
    p.name = "harmonic_" + std::to_string(i + 1);
    const double ratio = 0.3 + 0.05 * i;
    const int partials = 4 + (8 * i) / 10;
    for (int h = 0; h < partials; ++h) p.harmonic_amplitudes.push_back(std::pow(ratio, h));
    p.attack = 0.005 + 0.01 * (i % 4);
    p.release = 0.05 + 0.05 * (i % 3);
    p.inharmonicity_jitter = 0.002;
    out.push_back(std::move(p));
  }
  return out;
}

struct ChordDatasetConfig {
  std::vector<int> roots;
  std::vector<InstrumentProfile> instruments;
  double duration = 1.0;
  int sample_rate = 22050;
  std::uint64_t seed = 1;

  /// 14 roots (MIDI 48..61) x 11 instruments = 154 clips per class.
  static ChordDatasetConfig paper_scale() {
    ChordDatasetConfig c;
    for (int r = 48; r < 62; ++r) c.roots.push_back(r);
    c.instruments = default_instruments();
    return c;
  }

  /// First `root_count` default roots and first `instrument_count` instruments.
  static ChordDatasetConfig reduced(int root_count, int instrument_count) {
    auto c = paper_scale();
    require(root_count >= 1 && root_count <= static_cast<int>(c.roots.size()),
            "root count must be in 1..14");
    require(instrument_count >= 1 &&
                instrument_count <= static_cast<int>(c.instruments.size()),
            "instrument count must be in 1..11");
    c.roots.resize(root_count);
    c.instruments.resize(instrument_count);
    return c;
  }

  void validate() const {
    require(!roots.empty(), "dataset needs at least one root");
    require(!instruments.empty(), "dataset needs at least one instrument");
    require(duration > 0.0, "duration must be positive");
    require(sample_rate > 0, "sample rate must be positive");
    for (const auto& inst : instruments) inst.validate(duration);
  }
};

inline std::vector<int> chord_pitches(int root, const ChordType& type) {
  require(root >= 0 && root <= 127, "root must be a MIDI note in 0..127");
  require(!type.intervals.empty() && type.intervals.size() <= 3,
          "chord type must have 1..3 intervals");
  std::vector<int> pitches{root};
  for (int step : type.intervals) {
    require(step == 3 || step == 4, "tertian intervals are 3 or 4 semitones");
    pitches.push_back(pitches.back() + step);
  }
  if (pitches.back() > 127) throw Error("chord exceeds MIDI note 127");
  return pitches;
}

/// Additive synthesis of a chord: partials above Nyquist are dropped; output
/// is peak-normalized to 0.9.
inline AudioClip synth_chord(const std::vector<int>& pitches,
                             const InstrumentProfile& instrument, double duration,
                             int sample_rate, Rng& rng) {
  require(!pitches.empty(), "empty pitch list");
  require(sample_rate > 0 && duration > 0.0, "invalid duration or sample rate");
  instrument.validate(duration);
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  require(n >= 1, "clip has no samples");
  const double nyquist = 0.5 * sample_rate;

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(n, 0.0);
  for (int pitch : pitches) {
    const double f0 = midi_to_freq(pitch);
    for (std::size_t h = 0; h < instrument.harmonic_amplitudes.size(); ++h) {
      // Draws happen for every partial so the stream layout does not depend
      // on the sample rate.
      const double jitter = instrument.inharmonicity_jitter * rng.uniform(-1.0, 1.0);
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const double amp = instrument.harmonic_amplitudes[h];
      const double freq = f0 * static_cast<double>(h + 1) * (1.0 + jitter);
      if (freq >= nyquist || amp == 0.0) continue;
      const double w = 2.0 * M_PI * freq / sample_rate;
      for (std::size_t i = 0; i < n; ++i) clip.samples[i] += amp * std::sin(w * i + phase);
    }
  }

  const double attack_n = instrument.attack * sample_rate;
  const double release_n = instrument.release * sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    double env = 1.0;
    const double t = static_cast<double>(i);
    if (attack_n > 0.0 && t < attack_n) env = t / attack_n;
    const double remaining = static_cast<double>(n - 1 - i);
    if (release_n > 0.0 && remaining < release_n) env = std::min(env, remaining / release_n);
    clip.samples[i] *= env;
  }

  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  require(peak > 0.0, "synthesized clip is silent");
  const double scale = 0.9 / peak;
  for (double& s : clip.samples) s *= scale;
  return clip;
}

struct LabeledClip {
  AudioClip clip;
  int label = 0;  // chord type index + 1
  int root = 0;
  int instrument = 0;  // index into the config's instrument list
};

inline std::uint64_t clip_seed(std::uint64_t seed, int label, int root, int instrument) {
  return derive_seed(seed, {static_cast<std::uint64_t>(label), static_cast<std::uint64_t>(root),
                            static_cast<std::uint64_t>(instrument)});
}

/// One clip per (type, root, instrument), ordered type-major.
inline std::vector<LabeledClip> generate_dataset(const ChordDatasetConfig& config,
                                                 int jobs = 1) {
  config.validate();
  const auto& types = chord_types();
  const std::size_t per_type = config.roots.size() * config.instruments.size();
  std::vector<LabeledClip> out(types.size() * per_type);
  parallel_for(out.size(), jobs, [&](std::size_t idx) {
    const int t = static_cast<int>(idx / per_type);
    const std::size_t rem = idx % per_type;
    const int r = static_cast<int>(rem / config.instruments.size());
    const int i = static_cast<int>(rem % config.instruments.size());
    LabeledClip lc;
    lc.label = t + 1;
    lc.root = config.roots[r];
    lc.instrument = i;
    Rng rng(clip_seed(config.seed, lc.label, lc.root, i));
    lc.clip = synth_chord(chord_pitches(lc.root, types[t]), config.instruments[i],
                          config.duration, config.sample_rate, rng);
    out[idx] = std::move(lc);
  });
  return out;
}

}  // namespace sdl

#endif  // SDL_CHORDGEN_HPP
