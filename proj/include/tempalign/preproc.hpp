#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "tempalign/data_model.hpp"

namespace tempalign {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Sensors x samples, one row per sensor.
struct ContinuousRecording {
  RowMatrix data;
  double sample_rate = 0.0;

  std::size_t n_sensors() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t n_samples() const noexcept { return static_cast<std::size_t>(data.cols()); }
  double duration() const noexcept { return static_cast<double>(n_samples()) / sample_rate; }
};

/// Linear-phase band-pass kernel (Hamming-windowed sinc). The -6 dB points of
/// a single pass sit half a transition width outside [low, high].
struct FirKernel {
  std::vector<double> taps;  // odd length, symmetric
  double sample_rate = 0.0;
  double low = 0.0, high = 0.0;
  double low_transition = 0.0, high_transition = 0.0;

  std::size_t length() const noexcept { return taps.size(); }
};

FirKernel design_bandpass(double low, double high, double sample_rate);

/// |H(f)| of one pass, by direct evaluation of the kernel's DTFT.
double kernel_gain(const FirKernel& k, double freq);
/// Gain of the zero-phase forward-backward application: |H(f)|^2.
double zero_phase_gain(const FirKernel& k, double freq);

/// Zero-phase FIR band-pass; output length equals input length.
ContinuousRecording bandpass(const ContinuousRecording& rec, double low = 0.1, double high = 20.0,
                             unsigned threads = 1);

struct Ratio {
  long up = 1;
  long down = 1;
};
Ratio rational_ratio(double target_rate, double source_rate);

/// Polyphase rational resampling to round(N * target / source) samples.
ContinuousRecording resample(const ContinuousRecording& rec, double target_rate = 30.0, unsigned threads = 1);

struct EpochResult {
  EpochTensor epochs;                 // rows are the kept words, in input order
  std::vector<std::size_t> kept;      // indices into the onset list
  std::vector<std::size_t> dropped;   // windows that leave the recording
};

EpochResult epoch(const ContinuousRecording& rec, const std::vector<double>& onsets, double tmin = -2.5,
                  double tmax = 3.0);

std::size_t epoch_length(double tmin, double tmax, double sample_rate);

struct ZScoreResult {
  EpochTensor epochs;
  std::vector<std::size_t> degenerate_cells;  // sensor * n_times + timepoint
};

/// Per (sensor, timepoint) standardisation across words with population std.
ZScoreResult zscore(const EpochTensor& epochs);

}  // namespace tempalign
