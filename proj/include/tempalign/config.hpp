#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tempalign/align.hpp"
#include "tempalign/report.hpp"
#include "tempalign/ridge.hpp"
#include "tempalign/synth.hpp"
#include "tempalign/temporal.hpp"

namespace tempalign {

struct RawInput {
  std::filesystem::path input;  // sensors x samples NPY
  double sample_rate = 0.0;
};

/// Parsed run configuration. Every field has the documented default; unknown
/// keys are rejected so typos fail loudly.
struct RunConfig {
  std::filesystem::path out;
  std::optional<std::filesystem::path> epochs;
  std::optional<std::filesystem::path> activations;
  std::optional<std::filesystem::path> manifest;
  std::optional<SynthSpec> synth;
  std::optional<RawInput> raw;
  std::vector<std::string> stages;

  std::optional<std::vector<double>> depths;  // restrict to these layers
  int folds = 5;
  FoldMode fold_mode = FoldMode::Contiguous;
  std::uint64_t fold_seed = 0;
  AlphaGrid alphas;
  double tmin = -2.5;
  double tmax = 3.0;
  double band_low = 0.1;
  double band_high = 20.0;
  double target_rate = 30.0;
  bool pca_enabled = true;
  Eigen::Index pca_components = 50;
  bool pca_per_fold = false;
  WordSelection selection = WordSelection::ContentOnly;
  DimWeighting weighting = DimWeighting::Uniform;
  TmaxOptions tmax_options;
  unsigned threads = 0;
  RunLabel label;

  nlohmann::json source;  // the document as parsed, for hashing

  /// Settings that change alignment results (no paths, no thread count).
  nlohmann::json align_settings() const;
  nlohmann::json temporal_settings() const;
};

inline const std::vector<std::string> kStageOrder = {"synth", "preprocess", "reduce", "align", "temporal"};

/// Throws ConfigError naming the offending field.
RunConfig parse_run_config(std::string_view json_text);
RunConfig read_run_config(const std::filesystem::path& path);

/// Only the analysis settings (folds, alphas, selection, ...) of a config
/// document; paths and stages are ignored. Used by the per-stage subcommands.
RunConfig parse_analysis_config(std::string_view json_text);

}  // namespace tempalign
