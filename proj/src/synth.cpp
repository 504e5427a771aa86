#include "tempalign/synth.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "tempalign/errors.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/preproc.hpp"
#include "tempalign/rng.hpp"

namespace tempalign {

namespace {

enum Stream : std::uint64_t { kLatent = 1, kMixing = 2, kSensorNoise = 3, kActivationNoise = 4, kManifest = 5 };

constexpr std::uint64_t stream_key(Stream s, std::uint64_t index) { return (static_cast<std::uint64_t>(s) << 40) | index; }

constexpr std::array<PosClass, 4> kContentCycle = {PosClass::Noun, PosClass::Verb, PosClass::Adj, PosClass::Adv};

}  // namespace

void SynthSpec::validate() const {
  if (n_words < 10 || n_sensors < 1 || n_latents < 1) throw ParameterError("synth: sizes too small");
  if (latencies.empty()) throw ParameterError("synth: no layers");
  if (!(sample_rate > 0.0) || !(tmin < 0.0 && tmax > 0.0)) throw ParameterError("synth: bad epoch window");
  if (!(kernel_width > 2.0 / sample_rate)) throw ParameterError("synth: kernel_width must exceed 2 / sample_rate");
  if (!(snr > 0.0)) throw ParameterError("synth: snr must be positive");
  if (!(activation_noise >= 0.0) || !(word_spacing > 0.0)) throw ParameterError("synth: bad noise or spacing");
  for (const auto& [depth, lat] : latencies) {
    if (!(depth > 0.0 && depth < 1.0)) throw ParameterError("synth: depth must lie in (0, 1)");
    if (!(lat >= tmin && lat <= tmax))
      throw ParameterError("synth: latency " + std::to_string(lat) + " s lies outside the epoch window");
  }
}

std::vector<double> SynthSpec::times() const {
  return make_time_axis(tmin, sample_rate, epoch_length(tmin, tmax, sample_rate));
}

SynthSpec default_synth_spec(std::uint64_t seed) {
  SynthSpec s;
  s.seed = seed;
  for (double d : kDefaultDepths) s.latencies[d] = 0.05 + 0.4 * d;
  return s;
}

SynthData generate(const SynthSpec& spec, unsigned threads) { return generate(spec, spec.times(), threads); }

SynthData generate(const SynthSpec& spec, const std::vector<double>& times, unsigned threads) {
  spec.validate();
  const auto W = spec.n_words, S = spec.n_sensors, K = spec.n_latents, T = times.size();
  const auto L = spec.latencies.size();
  std::vector<double> depths, lats;
  for (const auto& [d, l] : spec.latencies) {
    depths.push_back(d);
    lats.push_back(l);
  }

  std::vector<Eigen::MatrixXd> latent(L), mixing(L);
  for (std::size_t l = 0; l < L; ++l) {
    CounterRng z(spec.seed, stream_key(kLatent, l));
    latent[l].resize(W, K);
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t k = 0; k < K; ++k) latent[l](w, k) = z.normal();
    CounterRng m(spec.seed, stream_key(kMixing, l));
    mixing[l].resize(S, K);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t k = 0; k < K; ++k) mixing[l](s, k) = m.normal() / std::sqrt(static_cast<double>(K));
  }

  Eigen::MatrixXd gain(L, T);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t t = 0; t < T; ++t) {
      const double u = (times[t] - lats[l]) / spec.kernel_width;
      gain(l, t) = std::exp(-0.5 * u * u);
    }

  const double noise_sd = std::isinf(spec.snr) ? 0.0 : 1.0 / spec.snr;
  std::vector<double> data(W * S * T);
  parallel_for(W, threads, [&](std::size_t w) {
    // Sensor pattern of each layer for this word.
    Eigen::MatrixXd pattern(S, L);
    for (std::size_t l = 0; l < L; ++l) pattern.col(l) = mixing[l] * latent[l].row(w).transpose();
    const Eigen::MatrixXd signal = pattern * gain;  // S x T
    CounterRng noise(spec.seed, stream_key(kSensorNoise, w));
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t t = 0; t < T; ++t) {
        double v = signal(s, t);
        if (noise_sd > 0.0) v += noise_sd * noise.normal();
        data[(w * S + s) * T + t] = v;
      }
  });

  std::vector<LayerActivations> layers(L);
  for (std::size_t l = 0; l < L; ++l) {
    CounterRng noise(spec.seed, stream_key(kActivationNoise, l));
    Eigen::MatrixXd a(W, K);
    for (std::size_t w = 0; w < W; ++w)
      for (std::size_t k = 0; k < K; ++k) {
        const double e = noise.normal();
        a(w, k) = spec.null_activations ? e : latent[l](w, k) + spec.activation_noise * e;
      }
    layers[l] = {depths[l], std::move(a)};
  }

  WordManifest manifest;
  manifest.source_id = "synth-seed-" + std::to_string(spec.seed);
  manifest.context_length = 0;
  CounterRng pred(spec.seed, stream_key(kManifest, 0));
  for (std::size_t w = 0; w < W; ++w) {
    WordEvent e;
    e.index = w;
    e.onset = -spec.tmin + static_cast<double>(w) * spec.word_spacing;
    e.pos_class = kContentCycle[w % kContentCycle.size()];
    e.is_content = true;
    e.predictability = 1.0 - pred.uniform();  // (0, 1]
    manifest.entries.push_back(e);
  }

  return {EpochTensor(W, S, times, spec.sample_rate, std::move(data)), ActivationSet(std::move(layers)),
          std::move(manifest)};
}

using nlohmann::json;

SynthSpec parse_synth_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("synth", e.what());
  }
  if (!doc.is_object()) throw ConfigError("synth", "expected an object");
  static const std::set<std::string> known = {"n_words",      "n_sensors", "n_latents",        "latencies",
                                              "kernel_width", "snr",       "seed",             "sample_rate",
                                              "tmin",         "tmax",      "activation_noise", "word_spacing",
                                              "null_activations"};
  for (const auto& [k, v] : doc.items())
    if (!known.count(k)) throw ConfigError("synth." + k, "unknown key");
  SynthSpec s = default_synth_spec();
  auto field = [&](const char* key, auto& target) {
    if (!doc.contains(key)) return;
    try {
      doc.at(key).get_to(target);
    } catch (const json::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
  field("n_words", s.n_words);
  field("n_sensors", s.n_sensors);
  field("n_latents", s.n_latents);
  field("kernel_width", s.kernel_width);
  field("seed", s.seed);
  field("sample_rate", s.sample_rate);
  field("tmin", s.tmin);
  field("tmax", s.tmax);
  field("activation_noise", s.activation_noise);
  field("word_spacing", s.word_spacing);
  field("null_activations", s.null_activations);
  if (doc.contains("snr")) {
    const auto& v = doc.at("snr");
    if (v.is_string() && v.get<std::string>() == "inf") s.snr = std::numeric_limits<double>::infinity();
    else if (v.is_number()) s.snr = v.get<double>();
    else throw ConfigError("snr", "expected a positive number or \"inf\"");
  }
  if (doc.contains("latencies")) {
    s.latencies.clear();
    try {
      for (const auto& l : doc.at("latencies")) s.latencies[l.at("depth").get<double>()] = l.at("latency").get<double>();
    } catch (const json::exception& e) {
      throw ConfigError("latencies", e.what());
    }
  }
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("synth", e.what());
  }
  return s;
}

std::string serialize_synth_spec(const SynthSpec& s) {
  json lat = json::array();
  for (const auto& [d, l] : s.latencies) lat.push_back({{"depth", d}, {"latency", l}});
  json doc = {{"n_words", s.n_words},
              {"n_sensors", s.n_sensors},
              {"n_latents", s.n_latents},
              {"latencies", lat},
              {"kernel_width", s.kernel_width},
              {"seed", s.seed},
              {"sample_rate", s.sample_rate},
              {"tmin", s.tmin},
              {"tmax", s.tmax},
              {"activation_noise", s.activation_noise},
              {"word_spacing", s.word_spacing},
              {"null_activations", s.null_activations}};
  if (std::isinf(s.snr)) doc["snr"] = "inf";
  else doc["snr"] = s.snr;
  return doc.dump(1) + "\n";
}

}  // namespace tempalign
