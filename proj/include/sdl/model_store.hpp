#ifndef SDL_MODEL_STORE_HPP
#define SDL_MODEL_STORE_HPP

// SDLM container layout, little-endian throughout:
//   bytes 0..7   magic "SDLM0001"
//   bytes 8..15  u64 header length L
//   next L bytes UTF-8 JSON header; header["matrices"] lists {name, rows, cols}
//   payload      each listed matrix in order, row-major IEEE-754 binary64

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sdl/dictionary_learning.hpp"
#include "sdl/features.hpp"
#include "sdl/svm.hpp"

namespace sdl {

using Json = nlohmann::json;

inline constexpr char kSdlmMagic[8] = {'S', 'D', 'L', 'M', '0', '0', '0', '1'};
inline constexpr int kFormatVersion = 1;

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct Container {
  Json header;
  std::vector<NamedMatrix> matrices;

  const Matrix& get(const std::string& name) const {
    for (const auto& m : matrices)
      if (m.name == name) return m.value;
    throw Error("container has no matrix '" + name + "'");
  }
};

namespace store_detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

inline double get_f64(const unsigned char* p) {
  const std::uint64_t bits = get_u64(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  os.flush();
  if (!os) throw Error("write failed for '" + path + "'");
}

}  // namespace store_detail

inline std::string encode_container(Json header, const std::vector<NamedMatrix>& matrices) {
  using namespace store_detail;
  Json listing = Json::array();
  for (const auto& m : matrices)
    listing.push_back({{"name", m.name}, {"rows", m.value.rows()}, {"cols", m.value.cols()}});
  header["matrices"] = listing;
  if (!header.contains("format_version")) header["format_version"] = kFormatVersion;
  const std::string text = header.dump();

  std::string out(kSdlmMagic, 8);
  put_u64(out, text.size());
  out += text;
  for (const auto& m : matrices)
    for (Eigen::Index r = 0; r < m.value.rows(); ++r)
      for (Eigen::Index c = 0; c < m.value.cols(); ++c) put_f64(out, m.value(r, c));
  return out;
}

inline Container decode_container(const std::string& bytes, const std::string& where = "input") {
  using namespace store_detail;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8 || std::memcmp(p, kSdlmMagic, 8) != 0)
    throw Error("'" + where + "': not an SDLM file");
  if (bytes.size() < 16) throw Error("'" + where + "': truncated header length");
  const std::uint64_t hlen = get_u64(p + 8);
  if (hlen > bytes.size() - 16) throw Error("'" + where + "': truncated header");

  Container c;
  try {
    c.header = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const Json::exception& e) {
    throw Error("'" + where + "': corrupt header (" + std::string(e.what()) + ")");
  }
  if (!c.header.is_object()) throw Error("'" + where + "': header is not a JSON object");
  const int version = c.header.value("format_version", 0);
  if (version > kFormatVersion) throw Error("'" + where + "': unsupported version " + std::to_string(version));
  if (version < 1) throw Error("'" + where + "': missing or invalid format_version");
  if (!c.header.contains("matrices") || !c.header["matrices"].is_array())
    throw Error("'" + where + "': header lacks a matrices listing");

  std::uint64_t expected = 0;
  std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>> shapes;
  for (const auto& m : c.header["matrices"]) {
    if (!m.is_object() || !m.contains("name") || !m.contains("rows") || !m.contains("cols") ||
        !m["rows"].is_number_integer() || !m["cols"].is_number_integer())
      throw Error("'" + where + "': malformed matrix entry in header");
    const auto rows = m["rows"].get<std::int64_t>();
    const auto cols = m["cols"].get<std::int64_t>();
    if (rows < 0 || cols < 0 || (rows > 0 && cols > (std::int64_t{1} << 40) / rows))
      throw Error("'" + where + "': invalid matrix shape");
    expected += static_cast<std::uint64_t>(rows * cols) * 8;
    shapes.push_back({m["name"].get<std::string>(), {rows, cols}});
  }
  const std::uint64_t payload = bytes.size() - 16 - hlen;
  if (payload != expected)
    throw Error("'" + where + "': payload size mismatch (expected " + std::to_string(expected) +
                " bytes, found " + std::to_string(payload) + ")");

  const unsigned char* q = p + 16 + hlen;
  for (const auto& [name, shape] : shapes) {
    Matrix m(shape.first, shape.second);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index col = 0; col < m.cols(); ++col, q += 8) m(r, col) = get_f64(q);
    c.matrices.push_back({name, std::move(m)});
  }
  return c;
}

inline void write_container(const std::string& path, const Json& header,
                            const std::vector<NamedMatrix>& matrices) {
  store_detail::write_file(path, encode_container(header, matrices));
}

inline Container read_container(const std::string& path) {
  return decode_container(store_detail::read_file(path), path);
}

// ---------------------------------------------------------------------------
// Pipeline types

struct FeatureConfig {
  FeatureKind kind = FeatureKind::pooled_spectrogram;
  int dim = kDefaultPooledDim;
  int window = kDefaultWindow;
  int hop = kDefaultHop;
  double chroma_fmin = kDefaultChromaFmin;
  double chroma_fmax = kDefaultChromaFmax;
  int psd_base_midi = kDefaultPsdBaseMidi;

  /// Output length for the configured kind.
  int output_dim() const {
    switch (kind) {
      case FeatureKind::chroma: return 12;
      case FeatureKind::interpolated_psd: return kDefaultPsdNotes;
      default: return dim;
    }
  }
};

inline Json to_json(const FeatureConfig& f) {
  return {{"kind", to_string(f.kind)}, {"dim", f.output_dim()}, {"window", f.window},
          {"hop", f.hop}, {"chroma_fmin", f.chroma_fmin}, {"chroma_fmax", f.chroma_fmax},
          {"psd_base_midi", f.psd_base_midi}};
}

inline FeatureConfig feature_config_from_json(const Json& j) {
  FeatureConfig f;
  f.kind = feature_kind_from_string(j.at("kind").get<std::string>());
  f.dim = j.at("dim").get<int>();
  f.window = j.at("window").get<int>();
  f.hop = j.at("hop").get<int>();
  f.chroma_fmin = j.at("chroma_fmin").get<double>();
  f.chroma_fmax = j.at("chroma_fmax").get<double>();
  f.psd_base_midi = j.at("psd_base_midi").get<int>();
  return f;
}

inline Json to_json(const HyperParams& h) {
  return {{"mu", h.mu}, {"lambda", h.lambda}, {"gamma1", h.gamma1}, {"gamma2", h.gamma2},
          {"atoms_per_class", h.atoms_per_class}, {"iterations", h.iterations},
          {"alpha", h.alpha}, {"eta0", h.eta0}, {"max_sweeps", h.max_sweeps},
          {"coding_tol", h.coding_tol}, {"backtrack_cap", h.backtrack_cap},
          {"early_stop", h.early_stop}, {"stall_tol", h.stall_tol},
          {"stall_patience", h.stall_patience}};
}

/// Missing keys keep their defaults, so config files may be partial.
inline HyperParams hyper_params_from_json(const Json& j, HyperParams h = {}) {
  h.mu = j.value("mu", h.mu);
  h.lambda = j.value("lambda", h.lambda);
  h.gamma1 = j.value("gamma1", h.gamma1);
  h.gamma2 = j.value("gamma2", h.gamma2);
  h.atoms_per_class = j.value("atoms_per_class", h.atoms_per_class);
  h.iterations = j.value("iterations", h.iterations);
  h.alpha = j.value("alpha", h.alpha);
  h.eta0 = j.value("eta0", h.eta0);
  h.max_sweeps = j.value("max_sweeps", h.max_sweeps);
  h.coding_tol = j.value("coding_tol", h.coding_tol);
  h.backtrack_cap = j.value("backtrack_cap", h.backtrack_cap);
  h.early_stop = j.value("early_stop", h.early_stop);
  h.stall_tol = j.value("stall_tol", h.stall_tol);
  h.stall_patience = j.value("stall_patience", h.stall_patience);
  return h;
}

struct ModelBundle {
  DictionarySet dictionary;
  LinearSvmModel svm;
  HyperParams hyper;
  FeatureConfig features;
  int format_version = kFormatVersion;
};

inline constexpr double kAtomNormLoadBound = 1.0 + 1e-6;

inline void validate_bundle(const ModelBundle& b) {
  const auto& d = b.dictionary;
  require(d.block_size() >= 1 && d.classes() >= 1, "bundle: empty dictionary");
  require(d.atoms().allFinite(), "bundle: non-finite dictionary entries");
  const double worst = d.max_atom_norm();
  if (worst > kAtomNormLoadBound)
    throw Error("bundle: atom norm " + std::to_string(worst) + " violates the unit-norm bound");
  require(b.svm.weights.rows() == d.classes(), "bundle: SVM machine count does not match class count");
  require(b.svm.weights.cols() == d.total_atoms(), "bundle: SVM weight length does not match atom count");
  require(b.svm.biases.size() == d.classes(), "bundle: SVM bias count does not match class count");
  require(b.svm.weights.allFinite() && b.svm.biases.allFinite(), "bundle: non-finite SVM parameters");
  require(b.features.output_dim() == d.dim(), "bundle: feature dimension does not match dictionary");
}

inline std::string encode_bundle(const ModelBundle& b) {
  validate_bundle(b);
  Json h;
  h["format_version"] = b.format_version;
  h["type"] = "model_bundle";
  h["classes"] = b.dictionary.classes();
  h["atoms_per_class"] = b.dictionary.block_size();
  h["dim"] = b.dictionary.dim();
  h["hyper"] = to_json(b.hyper);
  h["features"] = to_json(b.features);
  h["svm_c"] = b.svm.c_svm;
  return encode_container(h, {{"dictionary", b.dictionary.atoms()},
                              {"svm_weights", b.svm.weights},
                              {"svm_biases", Matrix(b.svm.biases)}});
}

inline ModelBundle decode_bundle(const std::string& bytes, const std::string& where = "input") {
  const Container c = decode_container(bytes, where);
  try {
    if (c.header.value("type", std::string()) != "model_bundle")
      throw Error("container is not a model bundle");
    ModelBundle b;
    b.format_version = c.header.at("format_version").get<int>();
    const int classes = c.header.at("classes").get<int>();
    const int kp = c.header.at("atoms_per_class").get<int>();
    const int dim = c.header.at("dim").get<int>();
    const Matrix& atoms = c.get("dictionary");
    require(atoms.rows() == dim && atoms.cols() == static_cast<Eigen::Index>(classes) * kp,
            "dictionary shape does not match header");
    b.dictionary = DictionarySet(atoms, kp);
    b.hyper = hyper_params_from_json(c.header.at("hyper"));
    b.features = feature_config_from_json(c.header.at("features"));
    b.svm.c_svm = c.header.at("svm_c").get<double>();
    b.svm.weights = c.get("svm_weights");
    const Matrix& biases = c.get("svm_biases");
    require(biases.cols() == 1, "svm_biases must be a column");
    b.svm.biases = biases.col(0);
    validate_bundle(b);
    return b;
  } catch (const Json::exception& e) {
    throw Error("'" + where + "': invalid bundle header (" + std::string(e.what()) + ")");
  } catch (const Error& e) {
    throw Error("'" + where + "': " + e.what());
  }
}

inline void save_bundle(const ModelBundle& b, const std::string& path) {
  store_detail::write_file(path, encode_bundle(b));
}

inline ModelBundle load_bundle(const std::string& path) {
  return decode_bundle(store_detail::read_file(path), path);
}

/// Labeled feature matrix; one example per column.
struct FeatureSet {
  Matrix X;
  std::vector<int> labels;
  int classes = 0;
  FeatureConfig config;
  std::vector<int> roots;        // optional provenance per example
  std::vector<int> instruments;  // optional provenance per example

  Eigen::Index size() const { return X.cols(); }
};

inline void save_features(const FeatureSet& fs, const std::string& path) {
  require(static_cast<Eigen::Index>(fs.labels.size()) == fs.X.cols(), "feature/label count mismatch");
  check_labels(fs.labels, fs.classes);
  Json h;
  h["type"] = "feature_set";
  h["classes"] = fs.classes;
  h["features"] = to_json(fs.config);
  Matrix labels(fs.X.cols(), 1);
  for (std::size_t i = 0; i < fs.labels.size(); ++i) labels(static_cast<Eigen::Index>(i), 0) = fs.labels[i];
  std::vector<NamedMatrix> mats{{"features", fs.X.transpose()}, {"labels", labels}};
  if (fs.roots.size() == fs.labels.size() && fs.instruments.size() == fs.labels.size()) {
    Matrix prov(fs.X.cols(), 2);
    for (std::size_t i = 0; i < fs.labels.size(); ++i) {
      prov(static_cast<Eigen::Index>(i), 0) = fs.roots[i];
      prov(static_cast<Eigen::Index>(i), 1) = fs.instruments[i];
    }
    mats.push_back({"provenance", prov});
  }
  write_container(path, h, mats);
}

inline FeatureSet load_features(const std::string& path) {
  const Container c = read_container(path);
  try {
    if (c.header.value("type", std::string()) != "feature_set")
      throw Error("container is not a feature set");
    FeatureSet fs;
    fs.classes = c.header.at("classes").get<int>();
    fs.config = feature_config_from_json(c.header.at("features"));
    fs.X = c.get("features").transpose();
    const Matrix& labels = c.get("labels");
    require(labels.cols() == 1 && labels.rows() == fs.X.cols(), "labels shape does not match features");
    for (Eigen::Index i = 0; i < labels.rows(); ++i) {
      const double v = labels(i, 0);
      require(v == std::floor(v), "labels must be integers");
      fs.labels.push_back(static_cast<int>(v));
    }
    check_labels(fs.labels, fs.classes);
    for (const auto& m : c.matrices) {
      if (m.name != "provenance") continue;
      require(m.value.rows() == fs.X.cols() && m.value.cols() == 2, "provenance shape mismatch");
      for (Eigen::Index i = 0; i < m.value.rows(); ++i) {
        fs.roots.push_back(static_cast<int>(m.value(i, 0)));
        fs.instruments.push_back(static_cast<int>(m.value(i, 1)));
      }
    }
    require(fs.X.allFinite(), "non-finite features");
    return fs;
  } catch (const Json::exception& e) {
    throw Error("'" + path + "': invalid feature header (" + std::string(e.what()) + ")");
  } catch (const Error& e) {
    throw Error("'" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string matrix_csv(const Matrix& m, std::vector<std::string> header = {}) {
  if (header.empty())
    for (Eigen::Index c = 0; c < m.cols(); ++c) header.push_back("c" + std::to_string(c + 1));
  require(static_cast<Eigen::Index>(header.size()) == m.cols(), "CSV header width mismatch");
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ",";
      out += format_g17(m(r, c));
    }
    out += "\n";
  }
  return out;
}

inline void save_matrix_csv(const Matrix& m, const std::string& path,
                            std::vector<std::string> header = {}) {
  store_detail::write_file(path, matrix_csv(m, std::move(header)));
}

/// Parses a headered numeric CSV written by save_matrix_csv.
inline Matrix load_matrix_csv(const std::string& path) {
  std::istringstream in(store_detail::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + path + "': empty CSV");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw Error("'" + path + "': non-numeric cell '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw Error("'" + path + "': ragged CSV");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

inline std::string trace_csv(const FitTrace& trace) {
  std::string out = "iteration,J,J1,J2,J3,J4,J5,coded_J,step,backtracks,kkt_max\n";
  for (const auto& r : trace.records) {
    const auto& o = r.objective;
    out += std::to_string(r.iteration);
    for (double v : {o.J, o.J1, o.J2, o.J3, o.J4, o.J5, r.coded_J, r.step}) out += "," + format_g17(v);
    out += "," + std::to_string(r.backtracks) + "," + format_g17(r.kkt_max) + "\n";
  }
  return out;
}

inline void save_trace_csv(const FitTrace& trace, const std::string& path) {
  store_detail::write_file(path, trace_csv(trace));
}

}  // namespace sdl

#endif  // SDL_MODEL_STORE_HPP
