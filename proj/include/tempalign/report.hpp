#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempalign/data_model.hpp"
#include "tempalign/temporal.hpp"

namespace tempalign {

/// Pointwise unweighted mean of curves sharing a time axis (ShapeError otherwise).
AlignmentCurve average_curves(const std::vector<AlignmentCurve>& curves);

/// One curve set per run; curves are matched by depth across runs.
std::vector<AlignmentCurve> average_curve_sets(const std::vector<std::vector<AlignmentCurve>>& runs);

/// Sample standard deviation (n - 1) of T_max per depth across models.
DepthMap tmax_dispersion(const std::vector<DepthMap>& tmaxes);

/// Sample standard deviation across subjects of each model's maximum score.
std::map<std::string, double> subject_dispersion(const std::map<std::string, std::vector<double>>& max_scores);

/// Optional run labels carried from the config into every summary.
struct RunLabel {
  std::string model;
  double size = 0.0;      // parameters; 0 when unknown
  double context = 0.0;   // context length in words; 0 when unknown
  std::string subject;

  nlohmann::json to_json() const;
  static RunLabel from_json(const nlohmann::json& j);
};

// --- alignment outputs: one CSV per layer plus summary.json ---------------

std::string curve_to_csv(const AlignmentCurve& curve);
AlignmentCurve curve_from_csv(std::string_view text, double depth);

void write_alignment_outputs(const std::filesystem::path& dir, const std::vector<AlignmentCurve>& curves,
                             const RunLabel& label, const nlohmann::json& extra = nlohmann::json::object());
std::vector<AlignmentCurve> read_alignment_outputs(const std::filesystem::path& dir);
RunLabel read_alignment_label(const std::filesystem::path& dir);

// --- temporal outputs -----------------------------------------------------

nlohmann::json correlation_to_json(const CorrelationStat& s);
nlohmann::json temporal_to_json(const TemporalResult& r);
TemporalResult temporal_from_json(const nlohmann::json& j);
/// depth, t_max, fit, ci_lower, ci_upper
std::string temporal_band_csv(const TemporalResult& r);

// --- cross-run summary table ------------------------------------------------

struct RunSummary {
  std::string run;
  RunLabel label;
  double temporal_r = 0.0;
  double p_value = 1.0;
  double max_alignment = 0.0;
};

/// Each run directory holds an align/ output and temporal.json.
RunSummary load_run_summary(const std::filesystem::path& run_dir);
std::string summary_csv(const std::vector<RunSummary>& rows);
std::vector<RunSummary> parse_summary_csv(std::string_view text);

std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace tempalign
