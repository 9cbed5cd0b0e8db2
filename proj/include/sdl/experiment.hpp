#ifndef SDL_EXPERIMENT_HPP
#define SDL_EXPERIMENT_HPP

#include <filesystem>
#include <set>

#include "sdl/chordgen.hpp"
#include "sdl/ksvd.hpp"
#include "sdl/model_store.hpp"

namespace sdl {

// ---------------------------------------------------------------------------
// Featurization

struct ClipFeatures {
  Vector pooled;
  Vector chroma;
  Vector psd;
};

/// All three representations from a single STFT.
inline ClipFeatures extract_features(const AudioClip& clip, const FeatureConfig& cfg) {
  const Spectrogram spec = stft_magnitude(clip, cfg.window, cfg.hop);
  ClipFeatures out;
  out.pooled = pool_time(spec, cfg.dim).values;
  out.chroma = chroma(spec, clip.sample_rate, cfg.chroma_fmin,
                      std::min(cfg.chroma_fmax, 0.5 * clip.sample_rate)).values;
  out.psd = interpolated_psd(spec, clip.sample_rate, kDefaultPsdNotes, cfg.psd_base_midi).values;
  return out;
}

inline Vector extract_feature(const AudioClip& clip, const FeatureConfig& cfg) {
  const Spectrogram spec = stft_magnitude(clip, cfg.window, cfg.hop);
  switch (cfg.kind) {
    case FeatureKind::chroma:
      return chroma(spec, clip.sample_rate, cfg.chroma_fmin,
                    std::min(cfg.chroma_fmax, 0.5 * clip.sample_rate)).values;
    case FeatureKind::interpolated_psd:
      return interpolated_psd(spec, clip.sample_rate, kDefaultPsdNotes, cfg.psd_base_midi).values;
    default:
      return pool_time(spec, cfg.dim).values;
  }
}

/// Unit l2 norm per column; zero columns stay zero.
inline Matrix normalize_columns(Matrix m) {
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const double n = m.col(i).norm();
    if (n > 0.0) m.col(i) /= n;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Configuration

struct GridSpec {
  std::vector<double> lambda{0.1, 0.3};
  std::vector<double> gamma1{0.1, 0.3};
  std::vector<double> gamma2{0.1, 0.3};
  std::vector<int> atoms_per_class{10};

  static GridSpec desk() { return {}; }
  static GridSpec paper() {
    return {{0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}, {10, 20, 30}};
  }

  std::size_t size() const {
    return lambda.size() * gamma1.size() * gamma2.size() * atoms_per_class.size();
  }

  void validate() const {
    require(size() > 0, "hyperparameter grid is empty");
  }

  /// Grid point i, varying lambda slowest and K' fastest.
  HyperParams point(std::size_t i, HyperParams base) const {
    base.atoms_per_class = atoms_per_class[i % atoms_per_class.size()];
    i /= atoms_per_class.size();
    base.gamma2 = gamma2[i % gamma2.size()];
    i /= gamma2.size();
    base.gamma1 = gamma1[i % gamma1.size()];
    i /= gamma1.size();
    base.lambda = lambda[i];
    return base;
  }
};

struct ExperimentConfig {
  ChordDatasetConfig dataset = ChordDatasetConfig::reduced(6, 5);
  FeatureConfig features;
  HyperParams hyper;
  GridSpec grid;
  std::vector<double> c_grid = default_c_grid();
  KsvdParams ksvd;
  double train_fraction = 2.0 / 3.0;
  int splits = 10;
  int resamples = 2;
  std::uint64_t seed = 1;
  int jobs = 1;

  void validate() const {
    dataset.validate();
    hyper.validate();
    grid.validate();
    require(!c_grid.empty(), "C grid is empty");
    require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
    require(splits >= 1, "split count must be >= 1");
    require(resamples >= 1, "resample count must be >= 1");
    require(features.kind == FeatureKind::pooled_spectrogram,
            "dictionary learning input must be the pooled spectrogram");
  }
};

/// Reads the JSON config schema documented in the README. Unknown keys are
/// rejected so that typos do not silently fall back to defaults.
inline ExperimentConfig experiment_config_from_json(const Json& j, ExperimentConfig c = {}) {
  static const std::set<std::string> known = {"dataset",  "features", "hyper",  "grid",
                                              "c_grid",   "ksvd",     "train_fraction",
                                              "splits",   "resamples", "seed", "jobs"};
  require(j.is_object(), "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.count(it.key()) > 0, "unknown config key '" + it.key() + "'");
  try {
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      const int root_count = d.value("root_count", static_cast<int>(c.dataset.roots.size()));
      const int inst_count = d.value("instrument_count", static_cast<int>(c.dataset.instruments.size()));
      auto ds = ChordDatasetConfig::reduced(root_count, inst_count);
      if (d.contains("roots")) ds.roots = d["roots"].get<std::vector<int>>();
      ds.duration = d.value("duration", c.dataset.duration);
      ds.sample_rate = d.value("sample_rate", c.dataset.sample_rate);
      c.dataset = ds;
    }
    if (j.contains("features")) {
      const auto& f = j["features"];
      c.features.dim = f.value("dim", c.features.dim);
      c.features.window = f.value("window", c.features.window);
      c.features.hop = f.value("hop", c.features.hop);
      c.features.chroma_fmin = f.value("chroma_fmin", c.features.chroma_fmin);
      c.features.chroma_fmax = f.value("chroma_fmax", c.features.chroma_fmax);
      c.features.psd_base_midi = f.value("psd_base_midi", c.features.psd_base_midi);
    }
    if (j.contains("hyper")) c.hyper = hyper_params_from_json(j["hyper"], c.hyper);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("lambda")) c.grid.lambda = g["lambda"].get<std::vector<double>>();
      if (g.contains("gamma1")) c.grid.gamma1 = g["gamma1"].get<std::vector<double>>();
      if (g.contains("gamma2")) c.grid.gamma2 = g["gamma2"].get<std::vector<double>>();
      if (g.contains("atoms_per_class"))
        c.grid.atoms_per_class = g["atoms_per_class"].get<std::vector<int>>();
    }
    if (j.contains("c_grid")) c.c_grid = j["c_grid"].get<std::vector<double>>();
    if (j.contains("ksvd")) {
      c.ksvd.iterations = j["ksvd"].value("iterations", c.ksvd.iterations);
      c.ksvd.sparsity = j["ksvd"].value("sparsity", c.ksvd.sparsity);
    }
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.splits = j.value("splits", c.splits);
    c.resamples = j.value("resamples", c.resamples);
    c.seed = j.value("seed", c.seed);
    c.dataset.seed = c.seed;
    c.jobs = j.value("jobs", c.jobs);
  } catch (const Json::exception& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Splits

struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Per class, round(fraction * n_c) examples (kept within [1, n_c - 1] when
/// n_c >= 2) go to training after a seeded shuffle.
inline Split stratified_split(const std::vector<int>& labels, int classes, double fraction, Rng& rng) {
  require(fraction > 0.0 && fraction < 1.0, "train fraction must lie in (0, 1)");
  Split s;
  for (int c = 1; c <= classes; ++c) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
    if (idx.empty()) continue;
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    else n_train = 1;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? s.train : s.test).push_back(idx[i]);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Throws unless train and test are disjoint and every class appears in both.
inline void check_split(const Split& s, const std::vector<int>& labels, int classes) {
  std::vector<char> seen(labels.size(), 0);
  for (auto i : s.train) seen[static_cast<std::size_t>(i)] |= 1;
  for (auto i : s.test) {
    require((seen[static_cast<std::size_t>(i)] & 1) == 0, "train and test splits overlap");
    seen[static_cast<std::size_t>(i)] |= 2;
  }
  for (int c = 1; c <= classes; ++c) {
    bool in_train = false, in_test = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      in_train |= (seen[i] & 1) != 0;
      in_test |= (seen[i] & 2) != 0;
    }
    require(in_train && in_test, "class " + std::to_string(c) + " missing from a split side");
  }
}

// ---------------------------------------------------------------------------
// Training

struct GridRow {
  HyperParams hyper;
  double best_c = 0.0;
  double mean_accuracy = 0.0;
  std::vector<double> resample_accuracy;  // at best_c
};

struct TrainOptions {
  HyperParams base;
  GridSpec grid;
  std::vector<double> c_grid = default_c_grid();
  KsvdParams ksvd;
  int resamples = 2;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct TrainOutcome {
  ModelBundle bundle;
  FitTrace trace;
  std::string stop_reason;
  std::vector<GridRow> grid_report;  // empty when the grid has one point
  std::size_t best_index = 0;
  CSelection c_selection;
};

/// Learns dictionaries with `h`, then returns Lasso codes of `X` over them.
struct DictionaryFit {
  FitResult fit;
  Matrix codes;
};

inline DictionaryFit fit_and_encode(const Matrix& X, const std::vector<int>& y, int classes,
                                    const HyperParams& h, const KsvdParams& ksvd, int jobs) {
  const auto d0 = init_class_dictionaries(X, y, classes, h.atoms_per_class, ksvd, jobs);
  DictionaryFit out;
  out.fit = fit(X, y, h, d0, jobs);
  out.codes = encode_all(X, out.fit.dictionary, h.lambda, jobs, h.max_sweeps, h.coding_tol);
  return out;
}

/// Grid search over (lambda, gamma1, gamma2, K') by averaged validation
/// accuracy on stratified half/half resamples of the training data, then a
/// refit of the winner on all of it with C_svm chosen by select_C.
inline TrainOutcome train_pipeline(const Matrix& X, const std::vector<int>& y, int classes,
                                   const FeatureConfig& features, const TrainOptions& opt) {
  opt.grid.validate();
  require(!opt.c_grid.empty(), "C grid is empty");
  check_labels(y, classes);
  TrainOutcome out;
  const std::size_t points = opt.grid.size();

  if (points > 1) {
    std::vector<HalfSplit> halves;
    for (int r = 0; r < opt.resamples; ++r) {
      Rng rng(derive_seed(opt.seed, {0x76616cULL, static_cast<std::uint64_t>(r)}));
      halves.push_back(stratified_half_split(y, classes, rng));
    }
    const std::size_t tasks = points * static_cast<std::size_t>(opt.resamples);
    std::vector<std::vector<double>> scores(tasks);
    parallel_for(tasks, opt.jobs, [&](std::size_t task) {
      const std::size_t g = task / static_cast<std::size_t>(opt.resamples);
      const std::size_t r = task % static_cast<std::size_t>(opt.resamples);
      const HyperParams h = opt.grid.point(g, opt.base);
      const auto& hs = halves[r];
      const Matrix learn_x = select_columns(X, hs.learn);
      const auto learn_y = select_items(y, hs.learn);
      KsvdParams kp = opt.ksvd;
      kp.seed = derive_seed(opt.seed, {0x696e6974ULL, g, r});
      const auto df = fit_and_encode(learn_x, learn_y, classes, h, kp, 1);
      const Matrix val_codes = encode_all(select_columns(X, hs.validate), df.fit.dictionary, h.lambda,
                                          1, h.max_sweeps, h.coding_tol);
      SvmOptions so;
      so.seed = derive_seed(opt.seed, {0x73766dULL, g, r});
      scores[task] = c_grid_scores(df.codes, learn_y, val_codes, select_items(y, hs.validate),
                                   classes, opt.c_grid, so);
    });

    for (std::size_t g = 0; g < points; ++g) {
      GridRow row;
      row.hyper = opt.grid.point(g, opt.base);
      std::size_t best_c = 0;
      double best_mean = -1.0;
      for (std::size_t ci = 0; ci < opt.c_grid.size(); ++ci) {
        double mean = 0.0;
        for (int r = 0; r < opt.resamples; ++r) mean += scores[g * opt.resamples + r][ci];
        mean /= opt.resamples;
        if (mean > best_mean) {
          best_mean = mean;
          best_c = ci;
        }
      }
      row.best_c = opt.c_grid[best_c];
      row.mean_accuracy = best_mean;
      for (int r = 0; r < opt.resamples; ++r)
        row.resample_accuracy.push_back(scores[g * opt.resamples + r][best_c]);
      out.grid_report.push_back(row);
    }
    for (std::size_t g = 1; g < points; ++g)
      if (out.grid_report[g].mean_accuracy > out.grid_report[out.best_index].mean_accuracy)
        out.best_index = g;
  }

  const HyperParams best = opt.grid.point(out.best_index, opt.base);
  KsvdParams kp = opt.ksvd;
  kp.seed = derive_seed(opt.seed, {0x726566ULL});
  auto df = fit_and_encode(X, y, classes, best, kp, opt.jobs);
  SvmOptions so;
  so.seed = derive_seed(opt.seed, {0x73766dULL, 0xffffULL});
  out.c_selection = select_C(df.codes, y, classes, opt.c_grid, opt.resamples,
                             derive_seed(opt.seed, {0x73656cULL}), so);
  out.bundle.svm = train_ova(df.codes, y, classes, out.c_selection.best_c, so, opt.jobs);
  out.bundle.dictionary = std::move(df.fit.dictionary);
  out.bundle.hyper = best;
  out.bundle.features = features;
  out.trace = std::move(df.fit.trace);
  out.stop_reason = df.fit.stop_reason;
  return out;
}

inline std::string grid_report_csv(const std::vector<GridRow>& rows) {
  std::string out = "lambda,gamma1,gamma2,atoms_per_class,best_c,mean_accuracy,resample_accuracies\n";
  for (const auto& r : rows) {
    out += format_g17(r.hyper.lambda) + "," + format_g17(r.hyper.gamma1) + "," +
           format_g17(r.hyper.gamma2) + "," + std::to_string(r.hyper.atoms_per_class) + "," +
           format_g17(r.best_c) + "," + format_g17(r.mean_accuracy) + ",";
    for (std::size_t i = 0; i < r.resample_accuracy.size(); ++i)
      out += (i ? ";" : "") + format_g17(r.resample_accuracy[i]);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the test set
  Matrix confusion;                        // rows = true class, cols = predicted
};

inline EvalReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& pred,
                                       int classes) {
  require(!truth.empty(), "empty test set");
  EvalReport rep;
  rep.accuracy = accuracy(truth, pred);
  rep.confusion = Matrix::Zero(classes, classes);
  for (std::size_t i = 0; i < truth.size(); ++i) rep.confusion(truth[i] - 1, pred[i] - 1) += 1.0;
  for (int c = 0; c < classes; ++c) {
    const double total = rep.confusion.row(c).sum();
    rep.per_class_accuracy.push_back(total > 0 ? rep.confusion(c, c) / total
                                               : std::numeric_limits<double>::quiet_NaN());
  }
  return rep;
}

inline EvalReport evaluate_bundle(const ModelBundle& b, const Matrix& X, const std::vector<int>& y,
                                  int jobs = 1) {
  require(X.cols() > 0, "empty test set");
  check_labels(y, b.dictionary.classes());
  const Matrix codes = encode_all(X, b.dictionary, b.hyper.lambda, jobs, b.hyper.max_sweeps,
                                  b.hyper.coding_tol);
  return evaluate_predictions(y, predict(b.svm, codes), b.dictionary.classes());
}

inline double sample_mean(const std::vector<double>& v) {
  require(!v.empty(), "mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// "0.66 ± 0.01"
inline std::string format_mean_sd(double mean, double sd) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean, sd);
  return buf;
}

// ---------------------------------------------------------------------------
// Full experiment

struct MethodResult {
  std::string name;
  std::vector<double> split_accuracy;
  double mean() const { return sample_mean(split_accuracy); }
  double sd() const { return sample_sd(split_accuracy); }
};

struct ExperimentReport {
  std::vector<MethodResult> methods;  // chroma, interpolated_psd, spectrogram_pooling, dictionary_learning
  std::vector<Matrix> similarity;     // learned dictionary similarity per split
  std::vector<std::string> grid_csv;  // per split
  std::vector<FitTrace> traces;       // per split

  const MethodResult& method(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return m;
    throw Error("no method '" + name + "' in report");
  }
};

inline std::string report_csv(const ExperimentReport& rep) {
  std::string out = "feature,mean,std,formatted";
  const std::size_t splits = rep.methods.empty() ? 0 : rep.methods[0].split_accuracy.size();
  for (std::size_t s = 0; s < splits; ++s) out += ",split_" + std::to_string(s + 1);
  out += "\n";
  char buf[32];
  for (const auto& m : rep.methods) {
    out += m.name;
    std::snprintf(buf, sizeof(buf), ",%.6f", m.mean());
    out += buf;
    std::snprintf(buf, sizeof(buf), ",%.6f", m.sd());
    out += buf;
    out += "," + format_mean_sd(m.mean(), m.sd());
    for (double a : m.split_accuracy) {
      std::snprintf(buf, sizeof(buf), ",%.6f", a);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

struct DatasetFeatures {
  Matrix pooled, chroma, psd;  // one column per clip
  std::vector<int> labels;
  std::vector<int> roots;
  std::vector<int> instruments;
};

inline DatasetFeatures featurize_dataset(const std::vector<LabeledClip>& clips, const FeatureConfig& cfg,
                                         int jobs) {
  require(!clips.empty(), "no clips to featurize");
  DatasetFeatures df;
  const auto n = static_cast<Eigen::Index>(clips.size());
  df.pooled.resize(cfg.dim, n);
  df.chroma.resize(12, n);
  df.psd.resize(kDefaultPsdNotes, n);
  parallel_for(clips.size(), jobs, [&](std::size_t i) {
    const auto f = extract_features(clips[i].clip, cfg);
    const auto col = static_cast<Eigen::Index>(i);
    df.pooled.col(col) = f.pooled;
    df.chroma.col(col) = f.chroma;
    df.psd.col(col) = f.psd;
  });
  for (const auto& c : clips) {
    df.labels.push_back(c.label);
    df.roots.push_back(c.root);
    df.instruments.push_back(c.instrument);
  }
  return df;
}

/// Baseline: l2-normalized features straight into the one-vs-all SVM.
inline double run_baseline(const Matrix& features, const std::vector<int>& labels, int classes,
                           const Split& split, const std::vector<double>& c_grid, int resamples,
                           std::uint64_t seed) {
  const Matrix f = normalize_columns(features);
  const Matrix train_f = select_columns(f, split.train);
  const auto train_y = select_items(labels, split.train);
  SvmOptions so;
  so.seed = derive_seed(seed, {0x62736cULL});
  const auto sel = select_C(train_f, train_y, classes, c_grid, resamples, derive_seed(seed, {0x63ULL}), so);
  const auto model = train_ova(train_f, train_y, classes, sel.best_c, so);
  return accuracy(select_items(labels, split.test), predict(model, select_columns(f, split.test)));
}

/// Splits, trains and evaluates the dictionary pipeline and the three
/// baselines on identical splits of the synthetic chord dataset.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const DatasetFeatures& data) {
  cfg.validate();
  const int classes = kChordClasses;
  ExperimentReport rep;
  rep.methods = {{"chroma", {}}, {"interpolated_psd", {}}, {"spectrogram_pooling", {}},
                 {"dictionary_learning", {}}};
  for (int s = 0; s < cfg.splits; ++s) {
    Rng rng(derive_seed(cfg.seed, {0x73706c6974ULL, static_cast<std::uint64_t>(s)}));
    const Split split = stratified_split(data.labels, classes, cfg.train_fraction, rng);
    check_split(split, data.labels, classes);
    const std::uint64_t split_seed = derive_seed(cfg.seed, {0x6a6f62ULL, static_cast<std::uint64_t>(s)});

    rep.methods[0].split_accuracy.push_back(
        run_baseline(data.chroma, data.labels, classes, split, cfg.c_grid, cfg.resamples, split_seed));
    rep.methods[1].split_accuracy.push_back(
        run_baseline(data.psd, data.labels, classes, split, cfg.c_grid, cfg.resamples, split_seed));
    rep.methods[2].split_accuracy.push_back(
        run_baseline(data.pooled, data.labels, classes, split, cfg.c_grid, cfg.resamples, split_seed));

    TrainOptions to;
    to.base = cfg.hyper;
    to.grid = cfg.grid;
    to.c_grid = cfg.c_grid;
    to.ksvd = cfg.ksvd;
    to.resamples = cfg.resamples;
    to.seed = split_seed;
    to.jobs = cfg.jobs;
    const Matrix train_x = select_columns(data.pooled, split.train);
    const auto train_y = select_items(data.labels, split.train);
    const auto outcome = train_pipeline(train_x, train_y, classes, cfg.features, to);
    const auto ev = evaluate_bundle(outcome.bundle, select_columns(data.pooled, split.test),
                                    select_items(data.labels, split.test), cfg.jobs);
    rep.methods[3].split_accuracy.push_back(ev.accuracy);
    rep.similarity.push_back(dictionary_similarity(outcome.bundle.dictionary));
    rep.grid_csv.push_back(grid_report_csv(outcome.grid_report));
    rep.traces.push_back(outcome.trace);
  }
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto clips = generate_dataset(cfg.dataset, cfg.jobs);
  const auto data = featurize_dataset(clips, cfg.features, cfg.jobs);
  return run_experiment(cfg, data);
}

/// Writes report.csv plus per-split similarity, grid and trace CSVs.
inline void write_experiment_outputs(const ExperimentReport& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  store_detail::write_file(dir + "/report.csv", report_csv(rep));
  for (std::size_t s = 0; s < rep.similarity.size(); ++s) {
    const std::string tag = std::to_string(s + 1);
    save_matrix_csv(rep.similarity[s], dir + "/similarity_split" + tag + ".csv");
    store_detail::write_file(dir + "/grid_split" + tag + ".csv", rep.grid_csv[s]);
    save_trace_csv(rep.traces[s], dir + "/trace_split" + tag + ".csv");
  }
}

}  // namespace sdl

#endif  // SDL_EXPERIMENT_HPP
