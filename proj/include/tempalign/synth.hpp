#pragma once

#include <cstdint>
#include <string_view>

#include "tempalign/data_model.hpp"
#include "tempalign/temporal.hpp"

namespace tempalign {

/// Synthetic brain/model pair with a known latency per layer.
struct SynthSpec {
  std::size_t n_words = 2000;
  std::size_t n_sensors = 40;
  std::size_t n_latents = 4;
  DepthMap latencies;          // depth -> seconds
  double kernel_width = 0.1;   // s.d. of the Gaussian temporal kernel, seconds
  double snr = 10.0;           // sensor noise s.d. is 1/snr; +inf disables it
  std::uint64_t seed = 0;
  double sample_rate = 30.0;
  double tmin = -2.5;
  double tmax = 3.0;
  double activation_noise = 0.1;  // s.d. of the noise added to the latent codes
  double word_spacing = 0.3;      // seconds between consecutive onsets
  bool null_activations = false;  // activations independent of the brain data

  /// Throws ParameterError.
  void validate() const;
  std::vector<double> times() const;
};

/// 9 layers at depths 0.1..0.9 with latency 0.05 + 0.4 * depth.
SynthSpec default_synth_spec(std::uint64_t seed = 0);

struct SynthData {
  EpochTensor epochs;
  ActivationSet activations;
  WordManifest manifest;
};

/// For each layer, latent word codes are projected onto the sensors by a
/// random mixing matrix and modulated in time by a Gaussian centred on the
/// layer's latency; white noise is added on top. Activations are the latent
/// codes plus small independent noise. Deterministic given the spec.
SynthData generate(const SynthSpec& spec, unsigned threads = 1);
SynthData generate(const SynthSpec& spec, const std::vector<double>& times, unsigned threads = 1);

SynthSpec parse_synth_spec(std::string_view json_text);
std::string serialize_synth_spec(const SynthSpec& spec);

}  // namespace tempalign
