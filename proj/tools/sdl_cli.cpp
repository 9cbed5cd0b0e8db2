// Command-line front end: gen-chords, featurize, train, eval, similarity,
// experiment. Errors are reported as one JSON line on stderr.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "sdl/sdl.hpp"

namespace fs = std::filesystem;
using namespace sdl;

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = ".";
  bool paper_grid = false;
  int jobs = 1;
};

Json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config '" + path + "'");
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error("config '" + path + "' is not valid JSON: " + e.what());
  }
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config.empty()) cfg = experiment_config_from_json(load_json_file(flags.config));
  if (flags.seed_set) {
    cfg.seed = flags.seed;
    cfg.dataset.seed = flags.seed;
  }
  if (flags.paper_grid) cfg.grid = GridSpec::paper();
  cfg.jobs = std::max(1, flags.jobs);
  return cfg;
}

void print_class_counts(const std::vector<int>& labels) {
  std::map<int, int> counts;
  for (int y : labels) ++counts[y];
  std::cout << "label,chord_type,count\n";
  for (const auto& [label, n] : counts)
    std::cout << label << "," << chord_types()[label - 1].name << "," << n << "\n";
  std::cout << "total," << labels.size() << "\n";
}

std::string clip_name(const LabeledClip& c) {
  return "wav/chord" + std::to_string(c.label) + "_root" + std::to_string(c.root) + "_inst" +
         std::to_string(c.instrument + 1) + ".wav";
}

struct ManifestRow {
  std::string path;
  int label = 0;
  int root = 0;
  int instrument = 0;
};

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  std::string line;
  std::vector<ManifestRow> rows;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("path,", 0) == 0) continue;
    }
    std::stringstream ss(line);
    ManifestRow r;
    std::string label, root, inst;
    if (!std::getline(ss, r.path, ',') || !std::getline(ss, label, ','))
      throw Error("malformed manifest line '" + line + "'");
    std::getline(ss, root, ',');
    std::getline(ss, inst, ',');
    try {
      r.label = std::stoi(label);
      r.root = root.empty() ? 0 : std::stoi(root);
      r.instrument = inst.empty() ? 0 : std::stoi(inst);
    } catch (const std::exception&) {
      throw Error("malformed manifest line '" + line + "'");
    }
    if (fs::path(r.path).is_relative()) r.path = (base / r.path).string();
    rows.push_back(r);
  }
  if (rows.empty()) throw Error("manifest '" + path + "' lists no clips");
  return rows;
}

FeatureSet featurize_clips(const std::vector<AudioClip>& clips, const std::vector<int>& labels,
                           const FeatureConfig& cfg, int jobs) {
  FeatureSet out;
  out.config = cfg;
  out.config.dim = cfg.output_dim();
  out.classes = 0;
  for (int y : labels) out.classes = std::max(out.classes, y);
  out.labels = labels;
  out.X.resize(out.config.output_dim(), static_cast<Eigen::Index>(clips.size()));
  parallel_for(clips.size(), jobs, [&](std::size_t i) {
    out.X.col(static_cast<Eigen::Index>(i)) = extract_feature(clips[i], out.config);
  });
  return out;
}

int cmd_gen_chords(const CommonFlags& flags, int roots, int instruments, double duration,
                   int sample_rate, const std::string& featurize_kind, int dim) {
  auto cfg = resolve_config(flags);
  auto ds = cfg.dataset;
  if (roots > 0 || instruments > 0) {
    ds = ChordDatasetConfig::reduced(roots > 0 ? roots : static_cast<int>(ds.roots.size()),
                                     instruments > 0 ? instruments : static_cast<int>(ds.instruments.size()));
    ds.duration = cfg.dataset.duration;
    ds.sample_rate = cfg.dataset.sample_rate;
  }
  if (duration > 0) ds.duration = duration;
  if (sample_rate > 0) ds.sample_rate = sample_rate;
  ds.seed = flags.seed_set ? flags.seed : cfg.seed;

  const auto clips = generate_dataset(ds, cfg.jobs);
  fs::create_directories(flags.out);
  std::vector<int> labels;
  for (const auto& c : clips) labels.push_back(c.label);

  if (!featurize_kind.empty()) {
    FeatureConfig fc = cfg.features;
    fc.kind = feature_kind_from_string(featurize_kind);
    if (dim > 0) fc.dim = dim;
    std::vector<AudioClip> audio;
    for (const auto& c : clips) audio.push_back(c.clip);
    auto set = featurize_clips(audio, labels, fc, cfg.jobs);
    set.classes = kChordClasses;
    for (const auto& c : clips) {
      set.roots.push_back(c.root);
      set.instruments.push_back(c.instrument + 1);
    }
    const std::string path = flags.out + "/features.sdlm";
    save_features(set, path);
    std::cout << "wrote " << path << " (" << set.size() << " x " << set.X.rows() << ")\n";
  } else {
    fs::create_directories(flags.out + "/wav");
    std::ofstream manifest(flags.out + "/manifest.csv");
    if (!manifest) throw Error("cannot write manifest in '" + flags.out + "'");
    manifest << "path,label,root,instrument\n";
    for (const auto& c : clips) {
      const std::string rel = clip_name(c);
      write_wav(flags.out + "/" + rel, c.clip);
      manifest << rel << "," << c.label << "," << c.root << "," << c.instrument + 1 << "\n";
    }
    std::cout << "wrote " << clips.size() << " clips and " << flags.out << "/manifest.csv\n";
  }
  print_class_counts(labels);
  return 0;
}

int cmd_featurize(const CommonFlags& flags, const std::string& manifest, const std::string& kind,
                  int dim, const std::string& output) {
  auto cfg = resolve_config(flags);
  const auto rows = read_manifest(manifest);
  FeatureConfig fc = cfg.features;
  fc.kind = feature_kind_from_string(kind);
  if (dim > 0) fc.dim = dim;
  if (fc.kind != FeatureKind::pooled_spectrogram && dim > 0 && dim != fc.output_dim())
    std::cerr << "note: " << to_string(fc.kind) << " has fixed dimension " << fc.output_dim()
              << "; --dim ignored\n";
  std::vector<AudioClip> clips(rows.size());
  std::vector<int> labels;
  parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) { clips[i] = read_wav(rows[i].path); });
  for (const auto& r : rows) labels.push_back(r.label);
  auto set = featurize_clips(clips, labels, fc, cfg.jobs);
  for (const auto& r : rows) {
    set.roots.push_back(r.root);
    set.instruments.push_back(r.instrument);
  }
  const std::string path = output.empty() ? flags.out + "/features_" + to_string(fc.kind) + ".sdlm" : output;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  save_features(set, path);
  std::cout << "kind,examples,dim,classes,path\n"
            << to_string(fc.kind) << "," << set.size() << "," << set.X.rows() << "," << set.classes
            << "," << path << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& features) {
  const auto cfg = resolve_config(flags);
  const auto set = load_features(features);
  require(set.config.kind == FeatureKind::pooled_spectrogram,
          "dictionary training expects pooled spectrogram features");
  TrainOptions to;
  to.base = cfg.hyper;
  to.grid = cfg.grid;
  to.c_grid = cfg.c_grid;
  to.ksvd = cfg.ksvd;
  to.resamples = cfg.resamples;
  to.seed = cfg.seed;
  to.jobs = cfg.jobs;
  const auto outcome = train_pipeline(set.X, set.labels, set.classes, set.config, to);

  fs::create_directories(flags.out);
  save_bundle(outcome.bundle, flags.out + "/model.sdlm");
  save_trace_csv(outcome.trace, flags.out + "/trace.csv");
  store_detail::write_file(flags.out + "/grid.csv", grid_report_csv(outcome.grid_report));
  const auto& h = outcome.bundle.hyper;
  std::cout << grid_report_csv(outcome.grid_report);
  std::cout << "selected lambda=" << h.lambda << " gamma1=" << h.gamma1 << " gamma2=" << h.gamma2
            << " atoms_per_class=" << h.atoms_per_class << " C_svm=" << outcome.bundle.svm.c_svm
            << " iterations=" << outcome.trace.records.size() << " (" << outcome.stop_reason << ")\n";
  std::cout << "wrote " << flags.out << "/model.sdlm, trace.csv, grid.csv\n";
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& model, const std::vector<std::string>& features) {
  const auto cfg = resolve_config(flags);
  const auto bundle = load_bundle(model);
  fs::create_directories(flags.out);
  std::vector<double> accs;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto set = load_features(features[i]);
    require(set.size() > 0, "empty test set");
    require(set.X.rows() == bundle.dictionary.dim(), "test features do not match the model dimension");
    const auto rep = evaluate_bundle(bundle, set.X, set.labels, cfg.jobs);
    accs.push_back(rep.accuracy);
    const std::string suffix = features.size() == 1 ? "" : "_" + std::to_string(i + 1);
    std::vector<std::string> header;
    for (int c = 1; c <= bundle.dictionary.classes(); ++c) header.push_back("pred_" + std::to_string(c));
    save_matrix_csv(rep.confusion, flags.out + "/confusion" + suffix + ".csv", header);
    std::cout << "file," << features[i] << "\naccuracy," << format_g17(rep.accuracy) << "\nclass,accuracy\n";
    for (std::size_t c = 0; c < rep.per_class_accuracy.size(); ++c)
      std::cout << c + 1 << "," << format_g17(rep.per_class_accuracy[c]) << "\n";
  }
  std::cout << "mean_accuracy," << format_mean_sd(sample_mean(accs), sample_sd(accs)) << "\n";
  return 0;
}

int cmd_similarity(const CommonFlags& flags, const std::string& model, const std::string& output) {
  const auto bundle = load_bundle(model);
  const Matrix s = dictionary_similarity(bundle.dictionary);
  const std::string path = output.empty() ? flags.out + "/similarity.csv" : output;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  save_matrix_csv(s, path);
  const Matrix back = load_matrix_csv(path);
  require(back.rows() == s.rows() && (back - back.transpose()).cwiseAbs().maxCoeff() == 0.0,
          "similarity matrix is not symmetric");
  std::cout << "wrote " << path << " (" << s.rows() << "x" << s.cols()
            << "), mean off-diagonal " << format_g17(mean_off_diagonal(s)) << "\n";
  return 0;
}

int cmd_experiment(const CommonFlags& flags, int splits, bool smoke) {
  auto cfg = resolve_config(flags);
  if (splits > 0) cfg.splits = splits;
  if (smoke) cfg.splits = 1;
  if (flags.seed_set) cfg.dataset.seed = flags.seed;
  const auto rep = run_experiment(cfg);
  write_experiment_outputs(rep, flags.out);
  std::cout << report_csv(rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised per-class dictionary learning for audio classification"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string command;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON experiment config");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) {
      flags.seed = s;
      flags.seed_set = true;
    }, "Master seed");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_flag("--paper-grid", flags.paper_grid, "Use the full hyperparameter grid");
    sub->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  int roots = 0, instruments = 0, sample_rate = 0, dim = 0, splits = 0;
  double duration = 0.0;
  std::string featurize_kind, manifest, kind = "pooled_spectrogram", output, features, model;
  std::vector<std::string> eval_features;
  bool smoke = false;

  auto* gen = app.add_subcommand("gen-chords", "Synthesize the chord dataset");
  add_common(gen);
  gen->add_option("--roots", roots, "Number of roots (from MIDI 48)");
  gen->add_option("--instruments", instruments, "Number of instruments");
  gen->add_option("--duration", duration, "Clip duration in seconds");
  gen->add_option("--sample-rate", sample_rate, "Sample rate in Hz");
  gen->add_option("--featurize", featurize_kind, "Write a feature file of this kind instead of WAVs");
  gen->add_option("--dim", dim, "Pooled spectrogram dimension");

  auto* feat = app.add_subcommand("featurize", "Turn a WAV manifest into a feature file");
  add_common(feat);
  feat->add_option("--manifest", manifest, "Manifest CSV (path,label,root,instrument)")->required();
  feat->add_option("--kind", kind, "pooled_spectrogram | chroma | interpolated_psd");
  feat->add_option("--dim", dim, "Pooled spectrogram dimension");
  feat->add_option("--output", output, "Output file (default OUT/features_KIND.sdlm)");

  auto* train = app.add_subcommand("train", "Grid-search, fit dictionaries and the SVM");
  add_common(train);
  train->add_option("--features", features, "Training feature file")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a model bundle on test feature files");
  add_common(eval);
  eval->add_option("--model", model, "Model bundle")->required();
  eval->add_option("--features", eval_features, "Test feature file(s)")->required();

  auto* sim = app.add_subcommand("similarity", "Export the dictionary similarity matrix");
  add_common(sim);
  sim->add_option("--model", model, "Model bundle")->required();
  sim->add_option("--output", output, "Output CSV (default OUT/similarity.csv)");

  auto* exp = app.add_subcommand("experiment", "Run the chord comparison experiment");
  add_common(exp);
  exp->add_option("--splits", splits, "Number of train/test splits");
  exp->add_flag("--smoke", smoke, "Single split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_gen_chords(flags, roots, instruments, duration, sample_rate, featurize_kind, dim);
    if (*feat) return cmd_featurize(flags, manifest, kind, dim, output);
    if (*train) return cmd_train(flags, features);
    if (*eval) return cmd_eval(flags, model, eval_features);
    if (*sim) return cmd_similarity(flags, model, output);
    if (*exp) return cmd_experiment(flags, splits, smoke);
  } catch (const std::exception& e) {
    const std::string name = app.get_subcommands().empty() ? "" : app.get_subcommands()[0]->get_name();
    std::cerr << Json{{"status", "error"}, {"command", name}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
