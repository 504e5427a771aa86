#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempalign/config.hpp"
#include "tempalign/synth.hpp"
#include "tempalign/temporal.hpp"

namespace tempalign {

std::string sha256_hex(std::string_view bytes);
/// Hash of a file, or of every regular file (relative path + contents, sorted) under a directory.
std::string hash_path(const std::filesystem::path& p);

// --- stages, each callable on its own (CLI subcommands) or from run_pipeline ---

struct SynthPaths {
  std::filesystem::path epochs, activations, manifest;
};
SynthPaths synth_paths(const std::filesystem::path& dir);
/// Writes z-scored epochs, raw activations, the manifest and the spec under `dir`.
void run_synth_stage(const SynthSpec& spec, const std::filesystem::path& dir, unsigned threads);

struct PreprocessSettings {
  double sample_rate = 0.0;  // of the input recording
  double low = 0.1, high = 20.0, target_rate = 30.0;
  double tmin = -2.5, tmax = 3.0;
  unsigned threads = 1;
};
/// Band-pass, resample, epoch at the manifest onsets, z-score. Returns the bookkeeping written to the sidecar.
EpochBookkeeping run_preprocess_stage(const std::filesystem::path& input, const std::filesystem::path& manifest,
                                      const std::filesystem::path& out, const PreprocessSettings& s);

/// PCA per layer to min(n_components, W - 1, D_in) components.
void run_reduce_stage(const std::filesystem::path& activations, Eigen::Index n_components,
                      const std::filesystem::path& out_dir);

/// Loads epochs/activations/manifest, reconciles dropped words, applies word
/// selection and layer restriction, and computes every layer's curve.
std::vector<AlignmentCurve> run_align_stage(const std::filesystem::path& epochs,
                                            const std::filesystem::path& activations,
                                            const std::filesystem::path& manifest, const RunConfig& cfg,
                                            const std::filesystem::path& out_dir);

/// Reads align outputs, writes `<out>.json` style temporal result plus a band CSV beside it.
TemporalResult run_temporal_stage(const std::filesystem::path& align_dir, const TmaxOptions& opts,
                                  const std::filesystem::path& out_json);

/// Quartile split of every word; when epochs are given, also the per-quartile
/// temporal scores and the most-expected minus most-surprising T_max test.
nlohmann::json run_quartiles_stage(const std::filesystem::path& manifest,
                                   const std::optional<std::filesystem::path>& epochs,
                                   const std::optional<std::filesystem::path>& activations, const RunConfig& cfg,
                                   const std::filesystem::path& out_dir);

/// Summary table, averaged curves and dispersion across run directories.
std::vector<RunSummary> run_report_stage(const std::string& runs_glob, const std::filesystem::path& out_dir,
                                         const TmaxOptions& opts);

/// Correlation of temporal scores with best alignment (and optionally with a factor column).
nlohmann::json run_meta_stage(const std::filesystem::path& summary_csv, const std::optional<std::string>& factor,
                              bool log_scale, const std::filesystem::path& out_json);

// --- orchestration -------------------------------------------------------

struct StageRecord {
  std::string name;
  std::string fingerprint;
  bool skipped = false;
  nlohmann::json outputs;  // relative path -> sha256
};

struct RunOutcome {
  std::vector<StageRecord> stages;
  std::string manifest_hash;
  nlohmann::json manifest;
};

/// Executes the configured stages in dependency order inside cfg.out and
/// writes run_manifest.json. A stage whose fingerprint and outputs are
/// unchanged is skipped unless `force`.
RunOutcome run_pipeline(const RunConfig& cfg, bool force = false);

struct SelftestResult {
  TemporalResult temporal;
  std::vector<AlignmentCurve> curves;
  double seconds = 0.0;
};
/// Planted-latency fixture end to end, in memory.
SelftestResult run_selftest(const SynthSpec& spec, unsigned threads, const AlphaGrid& grid = AlphaGrid(), int folds = 5);

std::string version_string();

}  // namespace tempalign
