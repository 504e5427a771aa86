#include "tempalign/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "tempalign/errors.hpp"

namespace tempalign {

using nlohmann::json;

std::string_view to_string(PosClass p) {
  switch (p) {
    case PosClass::Noun: return "NOUN";
    case PosClass::Verb: return "VERB";
    case PosClass::Adj: return "ADJ";
    case PosClass::Adv: return "ADV";
    case PosClass::Other: return "OTHER";
  }
  return "OTHER";
}

PosClass parse_pos_class(std::string_view s) {
  if (s == "NOUN") return PosClass::Noun;
  if (s == "VERB") return PosClass::Verb;
  if (s == "ADJ") return PosClass::Adj;
  if (s == "ADV") return PosClass::Adv;
  if (s == "OTHER") return PosClass::Other;
  throw ValidationError("unknown pos_class '" + std::string(s) + "'");
}

std::vector<double> WordManifest::onsets() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.onset);
  return out;
}

void WordManifest::validate() const {
  if (context_length < 0) throw ValidationError("manifest: negative context_length");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto where = "manifest word " + std::to_string(i) + ": ";
    if (e.index != i) throw ValidationError(where + "index " + std::to_string(e.index) + " does not match position");
    if (!std::isfinite(e.onset) || e.onset < 0.0) throw ValidationError(where + "onset must be finite and >= 0");
    if (i > 0 && !(e.onset > entries[i - 1].onset))
      throw ValidationError(where + "onsets must be strictly increasing");
    if (e.is_content != is_content_class(e.pos_class))
      throw ValidationError(where + "is_content disagrees with pos_class " + std::string(to_string(e.pos_class)));
    if (e.predictability && !(*e.predictability > 0.0 && *e.predictability <= 1.0))
      throw ValidationError(where + "predictability must lie in (0, 1]");
  }
}

WordManifest parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  WordManifest m;
  try {
    m.source_id = doc.at("source_id").get<std::string>();
    m.context_length = doc.at("context_length").get<int>();
    for (const auto& w : doc.at("words")) {
      WordEvent e;
      e.index = w.at("index").get<std::size_t>();
      e.onset = w.at("onset").get<double>();
      e.pos_class = parse_pos_class(w.at("pos_class").get<std::string>());
      e.is_content = w.contains("is_content") ? w.at("is_content").get<bool>() : is_content_class(e.pos_class);
      if (w.contains("predictability") && !w.at("predictability").is_null())
        e.predictability = w.at("predictability").get<double>();
      m.entries.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

std::string serialize_manifest(const WordManifest& m) {
  m.validate();
  json words = json::array();
  for (const auto& e : m.entries) {
    json w = {{"index", e.index},
              {"onset", e.onset},
              {"pos_class", std::string(to_string(e.pos_class))},
              {"is_content", e.is_content}};
    if (e.predictability) w["predictability"] = *e.predictability;
    words.push_back(std::move(w));
  }
  json doc = {{"source_id", m.source_id}, {"context_length", m.context_length}, {"words", std::move(words)}};
  return doc.dump(1) + "\n";
}

WordManifest read_manifest(const std::filesystem::path& path) { return parse_manifest(read_file(path)); }

void write_manifest(const std::filesystem::path& path, const WordManifest& m) {
  write_file(path, serialize_manifest(m));
}

WordManifest subset_manifest(const WordManifest& m, const std::vector<std::size_t>& indices) {
  WordManifest out;
  out.source_id = m.source_id;
  out.context_length = m.context_length;
  for (auto i : indices) {
    if (i >= m.size()) throw ShapeError("manifest: word index out of range");
    auto e = m.entries[i];
    e.index = out.entries.size();
    out.entries.push_back(e);
  }
  return out;
}

WordSelection parse_word_selection(std::string_view s) {
  if (s == "content-only" || s == "content") return WordSelection::ContentOnly;
  if (s == "all") return WordSelection::All;
  throw ParameterError("unknown word selection '" + std::string(s) + "'");
}

std::string_view to_string(WordSelection s) { return s == WordSelection::All ? "all" : "content-only"; }

std::vector<std::size_t> select_words(const WordManifest& m, WordSelection mode) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    if (mode == WordSelection::All || m.entries[i].is_content) out.push_back(i);
  if (out.empty()) throw EmptySelectionError("word selection '" + std::string(to_string(mode)) + "' is empty");
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> make_time_axis(double tmin, double sample_rate, std::size_t n_times) {
  std::vector<double> t(n_times);
  for (std::size_t k = 0; k < n_times; ++k) t[k] = tmin + static_cast<double>(k) / sample_rate;
  return t;
}

EpochTensor::EpochTensor(std::size_t n_words, std::size_t n_sensors, std::vector<double> times, double sample_rate,
                         std::vector<double> data)
    : n_words_(n_words), n_sensors_(n_sensors), times_(std::move(times)), sample_rate_(sample_rate),
      data_(std::move(data)) {
  if (!(sample_rate_ > 0.0)) throw ParameterError("epochs: sample_rate must be positive");
  if (data_.size() != n_words_ * n_sensors_ * times_.size()) throw ShapeError("epochs: data size mismatch");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    const double expected = times_.front() + static_cast<double>(k) / sample_rate_;
    if (std::abs(times_[k] - expected) > 1e-9)
      throw ValidationError("epochs: time axis not uniform at sample " + std::to_string(k));
  }
}

Eigen::MatrixXd EpochTensor::timepoint(std::size_t t) const {
  Eigen::MatrixXd x(n_words_, n_sensors_);
  const auto nt = times_.size();
  for (std::size_t w = 0; w < n_words_; ++w)
    for (std::size_t s = 0; s < n_sensors_; ++s) x(w, s) = data_[(w * n_sensors_ + s) * nt + t];
  return x;
}

EpochTensor EpochTensor::subset(const std::vector<std::size_t>& word_indices) const {
  const auto stride = n_sensors_ * times_.size();
  std::vector<double> d;
  d.reserve(word_indices.size() * stride);
  for (auto w : word_indices) {
    if (w >= n_words_) throw ShapeError("epochs: word index out of range");
    d.insert(d.end(), data_.begin() + w * stride, data_.begin() + (w + 1) * stride);
  }
  return EpochTensor(word_indices.size(), n_sensors_, times_, sample_rate_, std::move(d));
}

EpochTensor EpochTensor::with_data(std::vector<double> data) const {
  return EpochTensor(n_words_, n_sensors_, times_, sample_rate_, std::move(data));
}

Tensor EpochTensor::to_tensor() const {
  Tensor t;
  t.shape = {n_words_, n_sensors_, times_.size()};
  t.values.assign(data_.begin(), data_.end());
  return t;
}

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p += ".json";
  return p;
}

EpochTensor read_epochs(const std::filesystem::path& path) {
  const auto t = read_tensor(path);
  if (t.rank() != 3) throw ShapeError(path.string() + ": epochs must be rank 3 (words, sensors, times)");
  json side;
  try {
    side = json::parse(read_file(sidecar_path(path)));
  } catch (const json::exception& e) {
    throw FormatError(sidecar_path(path).string() + ": " + e.what());
  }
  double rate = 0.0, tmin = 0.0;
  try {
    rate = side.at("sample_rate").get<double>();
    tmin = side.at("tmin").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(sidecar_path(path).string() + ": " + e.what());
  }
  return EpochTensor(t.shape[0], t.shape[1], make_time_axis(tmin, rate, t.shape[2]), rate,
                     std::vector<double>(t.values.begin(), t.values.end()));
}

EpochBookkeeping read_epoch_bookkeeping(const std::filesystem::path& path) {
  EpochBookkeeping b;
  try {
    const auto side = json::parse(read_file(sidecar_path(path)));
    if (side.contains("kept_words")) side.at("kept_words").get_to(b.kept_words);
    if (side.contains("dropped_words")) side.at("dropped_words").get_to(b.dropped_words);
    if (side.contains("degenerate_cells")) side.at("degenerate_cells").get_to(b.degenerate_cells);
  } catch (const json::exception& e) {
    throw FormatError(sidecar_path(path).string() + ": " + e.what());
  }
  return b;
}

void write_epochs(const std::filesystem::path& path, const EpochTensor& epochs, const EpochBookkeeping& book) {
  write_tensor(path, epochs.to_tensor());
  json side = {{"sample_rate", epochs.sample_rate()},
               {"tmin", epochs.times().empty() ? 0.0 : epochs.times().front()},
               {"n_times", epochs.n_times()},
               {"kept_words", book.kept_words},
               {"dropped_words", book.dropped_words},
               {"degenerate_cells", book.degenerate_cells}};
  write_file(sidecar_path(path), side.dump(1) + "\n");
}

// ---------------------------------------------------------------------------

ActivationSet::ActivationSet(std::vector<LayerActivations> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (!(l.depth > 0.0 && l.depth < 1.0)) throw ValidationError("activations: depth must lie in (0, 1)");
    if (i > 0 && !(l.depth > layers_[i - 1].depth))
      throw ValidationError("activations: depths must be strictly increasing");
    if (l.values.rows() != layers_.front().values.rows())
      throw ShapeError("activations: layers disagree on word count");
  }
}

std::size_t ActivationSet::n_words() const noexcept {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().values.rows());
}

std::vector<double> ActivationSet::depths() const {
  std::vector<double> d;
  for (const auto& l : layers_) d.push_back(l.depth);
  return d;
}

ActivationSet ActivationSet::subset(const std::vector<std::size_t>& word_indices) const {
  std::vector<LayerActivations> out;
  for (const auto& l : layers_) {
    Eigen::MatrixXd m(word_indices.size(), l.values.cols());
    for (std::size_t i = 0; i < word_indices.size(); ++i) {
      if (word_indices[i] >= static_cast<std::size_t>(l.values.rows()))
        throw ShapeError("activations: word index out of range");
      m.row(i) = l.values.row(word_indices[i]);
    }
    out.push_back({l.depth, std::move(m)});
  }
  return ActivationSet(std::move(out));
}

ActivationSet read_activations(const std::filesystem::path& dir) {
  json index;
  const auto index_path = dir / "activations.json";
  try {
    index = json::parse(read_file(index_path));
  } catch (const json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
  std::vector<LayerActivations> layers;
  try {
    for (const auto& l : index.at("layers")) {
      const auto m = read_tensor(dir / l.at("file").get<std::string>());
      layers.push_back({l.at("depth").get<double>(), m.to_matrix()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(index_path.string() + ": " + e.what());
  }
  return ActivationSet(std::move(layers));
}

void write_activations(const std::filesystem::path& dir, const ActivationSet& set) {
  json layers = json::array();
  for (std::size_t i = 0; i < set.n_layers(); ++i) {
    const auto file = "layer_" + std::to_string(i) + ".npy";
    write_tensor(dir / file, Tensor::from_matrix(set.layers()[i].values));
    layers.push_back({{"depth", set.layers()[i].depth}, {"file", file}});
  }
  write_file(dir / "activations.json", json{{"layers", layers}}.dump(1) + "\n");
}

void check_word_counts(const WordManifest& m, const EpochTensor& e, const ActivationSet& a) {
  if (e.n_words() != m.size() || a.n_words() != m.size()) {
    std::ostringstream ss;
    ss << "word count mismatch: manifest " << m.size() << ", epochs " << e.n_words() << ", activations "
       << a.n_words();
    throw ShapeError(ss.str());
  }
}

double AlignmentCurve::max_score() const {
  if (scores.empty()) throw ShapeError("alignment curve is empty");
  return *std::max_element(scores.begin(), scores.end());
}

double AlignmentCurve::argmax_time() const {
  if (scores.empty()) throw ShapeError("alignment curve is empty");
  return times[std::max_element(scores.begin(), scores.end()) - scores.begin()];
}

}  // namespace tempalign
