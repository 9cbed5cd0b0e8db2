// Small end-to-end run: synthesize a few chords, learn per-class
// dictionaries on pooled spectrograms, and classify held-out clips.

#include <iostream>

#include "sdl/sdl.hpp"

int main() {
  using namespace sdl;
  auto dataset = ChordDatasetConfig::reduced(3, 2);
  dataset.duration = 0.5;
  const auto clips = generate_dataset(dataset);

  FeatureConfig fc;
  fc.hop = 128;
  const auto data = featurize_dataset(clips, fc, 1);

  Rng rng(7);
  const Split split = stratified_split(data.labels, kChordClasses, 2.0 / 3.0, rng);

  TrainOptions opt;
  opt.base.iterations = 30;
  opt.grid.lambda = {0.1};
  opt.grid.gamma1 = {0.1};
  opt.grid.gamma2 = {0.1};
  opt.grid.atoms_per_class = {4};
  const auto outcome = train_pipeline(select_columns(data.pooled, split.train),
                                      select_items(data.labels, split.train), kChordClasses, fc, opt);

  const auto report = evaluate_bundle(outcome.bundle, select_columns(data.pooled, split.test),
                                      select_items(data.labels, split.test));
  std::cout << "train clips " << split.train.size() << ", test clips " << split.test.size() << "\n"
            << "dictionary iterations " << outcome.trace.records.size() << " (" << outcome.stop_reason
            << ")\n"
            << "test accuracy " << report.accuracy << "\n";
  return 0;
}
