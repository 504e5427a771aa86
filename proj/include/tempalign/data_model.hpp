#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tempalign/tensor_io.hpp"

namespace tempalign {

enum class PosClass { Noun, Verb, Adj, Adv, Other };

std::string_view to_string(PosClass p);
PosClass parse_pos_class(std::string_view s);  // throws ValidationError
constexpr bool is_content_class(PosClass p) { return p != PosClass::Other; }

struct WordEvent {
  std::size_t index = 0;
  double onset = 0.0;  // seconds
  PosClass pos_class = PosClass::Other;
  bool is_content = false;
  std::optional<double> predictability;  // probability in (0, 1]
};

/// Per-word metadata shared by the brain and activation files. Row i of every
/// tensor in a run belongs to entries[i].
struct WordManifest {
  std::vector<WordEvent> entries;
  std::string source_id;
  int context_length = 0;

  std::size_t size() const noexcept { return entries.size(); }
  std::vector<double> onsets() const;
  /// Throws ValidationError on the first broken invariant.
  void validate() const;
};

WordManifest parse_manifest(std::string_view json_text);
std::string serialize_manifest(const WordManifest& m);
WordManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const WordManifest& m);

/// Entries at `indices`, renumbered from 0.
WordManifest subset_manifest(const WordManifest& m, const std::vector<std::size_t>& indices);

enum class WordSelection { ContentOnly, All };
WordSelection parse_word_selection(std::string_view s);
std::string_view to_string(WordSelection s);

/// Indices of the selected words in manifest order. Throws EmptySelectionError.
std::vector<std::size_t> select_words(const WordManifest& m, WordSelection mode);

/// Words x sensors x timepoints, C order, with a uniform time axis.
class EpochTensor {
 public:
  EpochTensor() = default;
  EpochTensor(std::size_t n_words, std::size_t n_sensors, std::vector<double> times, double sample_rate,
              std::vector<double> data);

  std::size_t n_words() const noexcept { return n_words_; }
  std::size_t n_sensors() const noexcept { return n_sensors_; }
  std::size_t n_times() const noexcept { return times_.size(); }
  double sample_rate() const noexcept { return sample_rate_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double operator()(std::size_t w, std::size_t s, std::size_t t) const {
    return data_[(w * n_sensors_ + s) * times_.size() + t];
  }

  /// The words x sensors slice at timepoint t.
  Eigen::MatrixXd timepoint(std::size_t t) const;
  EpochTensor subset(const std::vector<std::size_t>& word_indices) const;
  EpochTensor with_data(std::vector<double> data) const;

  Tensor to_tensor() const;

 private:
  std::size_t n_words_ = 0;
  std::size_t n_sensors_ = 0;
  std::vector<double> times_;
  double sample_rate_ = 0.0;
  std::vector<double> data_;
};

/// times[k] = tmin + k / rate, the axis every epoch and curve uses.
std::vector<double> make_time_axis(double tmin, double sample_rate, std::size_t n_times);

/// What preprocessing did to the words and cells of an epoch file.
struct EpochBookkeeping {
  std::vector<std::size_t> kept_words;        // manifest index of each tensor row
  std::vector<std::size_t> dropped_words;     // windows outside the recording
  std::vector<std::size_t> degenerate_cells;  // sensor * n_times + timepoint
};

/// Epochs live in `<path>` (NPY) plus `<path>.json` (time axis and bookkeeping).
EpochTensor read_epochs(const std::filesystem::path& path);
EpochBookkeeping read_epoch_bookkeeping(const std::filesystem::path& path);
void write_epochs(const std::filesystem::path& path, const EpochTensor& epochs, const EpochBookkeeping& book = {});
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

struct LayerActivations {
  double depth = 0.0;  // relative depth in (0, 1)
  Eigen::MatrixXd values;  // words x components
};

/// Per-layer activation matrices ordered by strictly increasing depth.
class ActivationSet {
 public:
  ActivationSet() = default;
  explicit ActivationSet(std::vector<LayerActivations> layers);

  const std::vector<LayerActivations>& layers() const noexcept { return layers_; }
  std::size_t n_layers() const noexcept { return layers_.size(); }
  std::size_t n_words() const noexcept;
  std::vector<double> depths() const;
  ActivationSet subset(const std::vector<std::size_t>& word_indices) const;

 private:
  std::vector<LayerActivations> layers_;
};

inline const std::vector<double> kDefaultDepths = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

/// Directory layout: `activations.json` ({"layers": [{"depth", "file"}]}) plus one NPY per layer.
ActivationSet read_activations(const std::filesystem::path& dir);
void write_activations(const std::filesystem::path& dir, const ActivationSet& set);

/// Throws ShapeError unless all three agree on the word count.
void check_word_counts(const WordManifest& m, const EpochTensor& e, const ActivationSet& a);

struct AlignmentCurve {
  double layer_depth = 0.0;
  std::vector<double> times;
  std::vector<double> scores;      // mean over folds
  Eigen::MatrixXd fold_scores;     // folds x times
  std::vector<std::size_t> skipped_dims;  // per timepoint, summed over folds

  double max_score() const;
  double argmax_time() const;  // first time reaching the max
};

}  // namespace tempalign
