#include "tempalign/config.hpp"

#include <algorithm>
#include <set>

#include "tempalign/errors.hpp"
#include "tempalign/tensor_io.hpp"

namespace tempalign {

using nlohmann::json;

namespace {

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& path) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

template <class T>
void maybe(const json& obj, const std::string& key, const std::string& path, T& target) {
  if (obj.contains(key)) target = get_field<T>(obj, key, path);
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [k, _] : obj.items())
    if (!known.count(k)) throw ConfigError(prefix.empty() ? k : prefix + "." + k, "unknown key");
}

template <class F>
auto enum_field(const json& obj, const std::string& key, const std::string& path, F parse) {
  const auto s = get_field<std::string>(obj, key, path);
  try {
    return parse(s);
  } catch (const ParameterError& e) {
    throw ConfigError(path, e.what());
  }
}

void parse_analysis(const json& doc, RunConfig& c) {
  maybe(doc, "folds", "folds", c.folds);
  if (c.folds < 2) throw ConfigError("folds", "must be >= 2");
  if (doc.contains("fold_mode")) c.fold_mode = enum_field(doc, "fold_mode", "fold_mode", parse_fold_mode);
  maybe(doc, "fold_seed", "fold_seed", c.fold_seed);
  if (doc.contains("word_selection"))
    c.selection = enum_field(doc, "word_selection", "word_selection", parse_word_selection);
  if (doc.contains("dim_weighting"))
    c.weighting = enum_field(doc, "dim_weighting", "dim_weighting", parse_dim_weighting);
  if (doc.contains("depths")) {
    c.depths = get_field<std::vector<double>>(doc, "depths", "depths");
    if (c.depths->empty()) throw ConfigError("depths", "must not be empty");
  }
  maybe(doc, "threads", "threads", c.threads);

  if (doc.contains("alphas")) {
    const auto& a = doc.at("alphas");
    try {
      if (a.is_array()) {
        c.alphas = AlphaGrid(a.get<std::vector<double>>());
      } else if (a.is_object()) {
        reject_unknown(a, {"min_exponent", "max_exponent", "per_decade"}, "alphas");
        c.alphas = AlphaGrid::log_spaced(a.value("min_exponent", -4.0), a.value("max_exponent", 8.0),
                                         a.value("per_decade", 1));
      } else {
        throw ConfigError("alphas", "expected a list or {min_exponent, max_exponent, per_decade}");
      }
    } catch (const ParameterError& e) {
      throw ConfigError("alphas", e.what());
    } catch (const json::exception& e) {
      throw ConfigError("alphas", e.what());
    }
  }

  if (doc.contains("epoch_window")) {
    const auto& w = doc.at("epoch_window");
    reject_unknown(w, {"tmin", "tmax"}, "epoch_window");
    maybe(w, "tmin", "epoch_window.tmin", c.tmin);
    maybe(w, "tmax", "epoch_window.tmax", c.tmax);
    if (!(c.tmin < 0.0 && c.tmax > 0.0)) throw ConfigError("epoch_window", "need tmin < 0 < tmax");
  }
  if (doc.contains("preprocess")) {
    const auto& p = doc.at("preprocess");
    reject_unknown(p, {"low", "high", "target_rate"}, "preprocess");
    maybe(p, "low", "preprocess.low", c.band_low);
    maybe(p, "high", "preprocess.high", c.band_high);
    maybe(p, "target_rate", "preprocess.target_rate", c.target_rate);
  }
  if (doc.contains("pca")) {
    const auto& p = doc.at("pca");
    reject_unknown(p, {"enabled", "n_components", "per_fold"}, "pca");
    maybe(p, "enabled", "pca.enabled", c.pca_enabled);
    maybe(p, "n_components", "pca.n_components", c.pca_components);
    maybe(p, "per_fold", "pca.per_fold", c.pca_per_fold);
    if (c.pca_components < 1) throw ConfigError("pca.n_components", "must be >= 1");
  }
  if (doc.contains("tmax")) {
    const auto& t = doc.at("tmax");
    reject_unknown(t, {"threshold", "mode", "window"}, "tmax");
    maybe(t, "threshold", "tmax.threshold", c.tmax_options.threshold);
    if (!(c.tmax_options.threshold > 0.0 && c.tmax_options.threshold <= 1.0))
      throw ConfigError("tmax.threshold", "must lie in (0, 1]");
    if (t.contains("mode")) c.tmax_options.mode = enum_field(t, "mode", "tmax.mode", parse_tmax_mode);
    if (t.contains("window") && !t.at("window").is_null()) {
      const auto w = get_field<std::vector<double>>(t, "window", "tmax.window");
      if (w.size() != 2 || !(w[0] < w[1])) throw ConfigError("tmax.window", "expected [lo, hi] with lo < hi");
      c.tmax_options.window = std::make_pair(w[0], w[1]);
    }
  }
  if (doc.contains("label")) {
    const auto& l = doc.at("label");
    reject_unknown(l, {"model", "size", "context", "subject"}, "label");
    try {
      c.label = RunLabel::from_json(l);
    } catch (const json::exception& e) {
      throw ConfigError("label", e.what());
    }
  }
}

const std::set<std::string> kAnalysisKeys = {"folds",        "fold_mode", "fold_seed", "word_selection",
                                             "dim_weighting", "depths",    "threads",   "alphas",
                                             "epoch_window", "preprocess", "pca",      "tmax",
                                             "label"};

json parse_doc(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("<document>", e.what());
  }
}

void require_exists(const std::optional<std::filesystem::path>& p, const std::string& field) {
  if (p && !std::filesystem::exists(*p)) throw ConfigError(field, "'" + p->string() + "' does not exist");
}

}  // namespace

json RunConfig::align_settings() const {
  json a = json::array();
  for (double v : alphas.values()) a.push_back(v);
  return {{"folds", folds},
          {"fold_mode", fold_mode == FoldMode::Shuffled ? "shuffled" : "contiguous"},
          {"fold_seed", fold_seed},
          {"alphas", a},
          {"word_selection", std::string(to_string(selection))},
          {"dim_weighting", weighting == DimWeighting::Variance ? "variance" : "uniform"},
          {"depths", depths ? json(*depths) : json()},
          {"pca_per_fold", pca_per_fold ? json(pca_components) : json()},
          {"label", label.to_json()}};
}

json RunConfig::temporal_settings() const {
  return {{"threshold", tmax_options.threshold},
          {"mode", tmax_options.mode == TmaxMode::Contiguous ? "contiguous" : "union"},
          {"window", tmax_options.window ? json{tmax_options.window->first, tmax_options.window->second} : json()}};
}

RunConfig parse_analysis_config(std::string_view json_text) {
  const auto doc = parse_doc(json_text);
  if (!doc.is_object()) throw ConfigError("<root>", "expected an object");
  RunConfig c;
  json filtered = json::object();
  for (const auto& [k, v] : doc.items())
    if (kAnalysisKeys.count(k)) filtered[k] = v;
  parse_analysis(filtered, c);
  c.source = doc;
  return c;
}

RunConfig parse_run_config(std::string_view json_text) {
  const auto doc = parse_doc(json_text);
  auto known = kAnalysisKeys;
  known.insert({"out", "epochs", "activations", "manifest", "synth", "raw", "stages"});
  reject_unknown(doc, known, "");

  RunConfig c;
  c.source = doc;
  parse_analysis(doc, c);

  if (!doc.contains("out")) throw ConfigError("out", "required");
  c.out = get_field<std::string>(doc, "out", "out");
  for (const char* key : {"epochs", "activations", "manifest"})
    if (doc.contains(key)) {
      const std::filesystem::path p = get_field<std::string>(doc, key, key);
      if (std::string(key) == "epochs") c.epochs = p;
      else if (std::string(key) == "activations") c.activations = p;
      else c.manifest = p;
    }

  if (doc.contains("synth")) {
    const auto& s = doc.at("synth");
    if (s.is_string()) {
      const std::filesystem::path p = s.get<std::string>();
      if (!std::filesystem::exists(p)) throw ConfigError("synth", "'" + p.string() + "' does not exist");
      c.synth = parse_synth_spec(read_file(p));
    } else {
      c.synth = parse_synth_spec(s.dump());
    }
  }
  if (doc.contains("raw")) {
    const auto& r = doc.at("raw");
    reject_unknown(r, {"input", "sample_rate"}, "raw");
    if (!r.contains("input")) throw ConfigError("raw.input", "required");
    if (!r.contains("sample_rate")) throw ConfigError("raw.sample_rate", "required");
    c.raw = RawInput{get_field<std::string>(r, "input", "raw.input"), get_field<double>(r, "sample_rate", "raw.sample_rate")};
    if (!(c.raw->sample_rate > 0.0)) throw ConfigError("raw.sample_rate", "must be positive");
  }

  if (doc.contains("stages")) {
    c.stages = get_field<std::vector<std::string>>(doc, "stages", "stages");
    for (const auto& s : c.stages)
      if (std::find(kStageOrder.begin(), kStageOrder.end(), s) == kStageOrder.end())
        throw ConfigError("stages", "unknown stage '" + s + "'");
  } else {
    if (c.synth) c.stages.push_back("synth");
    if (c.raw) c.stages.push_back("preprocess");
    if (c.pca_enabled && !c.pca_per_fold) c.stages.push_back("reduce");
    c.stages.push_back("align");
    c.stages.push_back("temporal");
  }
  // Dependency order regardless of how they were listed.
  std::vector<std::string> ordered;
  for (const auto& s : kStageOrder)
    if (std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end()) ordered.push_back(s);
  c.stages = ordered;

  auto has = [&](const char* s) { return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end(); };
  if (has("synth") && !c.synth) throw ConfigError("synth", "required by stage 'synth'");
  if (has("preprocess")) {
    if (!c.raw) throw ConfigError("raw", "required by stage 'preprocess'");
    if (!c.manifest) throw ConfigError("manifest", "required by stage 'preprocess'");
  }
  const bool needs_inputs = has("align") || has("reduce");
  if (needs_inputs && !has("synth")) {
    if (!has("preprocess") && !c.epochs && has("align")) throw ConfigError("epochs", "required by stage 'align'");
    if (!c.activations) throw ConfigError("activations", "required by stage 'align'");
    if (!c.manifest) throw ConfigError("manifest", "required by stage 'align'");
  }
  if (!has("synth")) {
    require_exists(c.epochs, "epochs");
    require_exists(c.activations, "activations");
    require_exists(c.manifest, "manifest");
  }
  if (c.raw) require_exists(c.raw->input, "raw.input");
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("<config>", "'" + path.string() + "' does not exist");
  return parse_run_config(read_file(path));
}

}  // namespace tempalign
