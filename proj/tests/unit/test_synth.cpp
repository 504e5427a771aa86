#include <doctest.h>

#include <algorithm>

#include "tempalign/align.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/preproc.hpp"
#include "tempalign/rng.hpp"
#include "tempalign/synth.hpp"
#include "tempalign/temporal.hpp"

using namespace tempalign;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
  auto s = default_synth_spec(seed);
  s.n_words = 500;
  s.tmin = -0.5;
  s.tmax = 1.5;
  return s;
}

std::vector<double> recovered_tmax(const SynthSpec& spec) {
  const auto data = generate(spec);
  const auto z = zscore(data.epochs);
  const auto curves = alignment_curves(z.epochs, data.activations, make_folds(spec.n_words, 5), AlphaGrid());
  std::vector<double> out;
  for (const auto& c : curves) out.push_back(t_max(c));
  return out;
}

std::vector<std::size_t> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size()), r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  for (std::size_t i = 0; i < v.size(); ++i) r[idx[i]] = i;
  return r;
}

}  // namespace

TEST_CASE("counter RNG matches the SplitMix64 reference stream") {
  // Reference outputs of SplitMix64 seeded with 0.
  CHECK(mix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(mix64(0x9E3779B97F4A7C15ULL) == 0x6E789E6AA1B965F4ULL);
  CounterRng a(5, 7), b(5, 7);
  CHECK(a.next_u64() == b.at(0));
  CHECK(a.next_u64() == b.at(1));
  CHECK(CounterRng(5, 8).at(0) != b.at(0));
  CounterRng u(1);
  double lo = 1, hi = 0, sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    lo = std::min(lo, x), hi = std::max(hi, x), sum += x;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.02));
  CounterRng g(2);
  double m = 0, v = 0;
  for (int i = 0; i < 20000; ++i) {
    const double x = g.normal();
    m += x, v += x * x;
  }
  CHECK(std::abs(m / 20000) < 0.03);
  CHECK(v / 20000 == doctest::Approx(1.0).epsilon(0.03));
  for (int i = 0; i < 100; ++i) CHECK(g.below(7) < 7);
}

TEST_CASE("fixture shapes and manifest") {
  const auto spec = small_spec(1);
  const auto d = generate(spec);
  CHECK(d.epochs.n_words() == 500);
  CHECK(d.epochs.n_sensors() == 40);
  CHECK(d.epochs.n_times() == 61);
  CHECK(d.activations.n_layers() == 9);
  CHECK(d.activations.layers()[0].values.cols() == 4);
  CHECK(d.activations.depths() == kDefaultDepths);
  CHECK_NOTHROW(d.manifest.validate());
  CHECK(d.manifest.size() == 500);
  for (const auto& e : d.manifest.entries) REQUIRE(e.predictability.has_value());
}

TEST_CASE("generation is deterministic across runs and threads") {
  const auto spec = small_spec(3);
  const auto a = generate(spec, 1), b = generate(spec, 1), c = generate(spec, 4);
  CHECK(a.epochs.data() == b.epochs.data());
  CHECK(a.epochs.data() == c.epochs.data());
  for (std::size_t l = 0; l < 9; ++l) CHECK(a.activations.layers()[l].values == c.activations.layers()[l].values);
  CHECK(generate(small_spec(4), 1).epochs.data() != a.epochs.data());
}

TEST_CASE("a single layer peaks at its latency") {
  // With sensor noise the signal-to-noise ratio, and so the score, follows the
  // temporal kernel. Without noise every sample with any signal is an exact
  // linear image of the latents and the curve is flat.
  auto spec = small_spec(5);
  spec.latencies = {{0.5, 0.4}};
  const auto d = generate(spec);
  const auto c = alignment_curve(zscore(d.epochs).epochs, d.activations.layers()[0].values, 0.5,
                                 make_folds(spec.n_words, 5), AlphaGrid());
  CHECK(std::abs(c.argmax_time() - 0.4) <= 1.0 / spec.sample_rate + 1e-9);
}

TEST_CASE("planted order is recovered for a different assignment") {
  auto spec = small_spec(6);
  spec.latencies.clear();
  for (int i = 1; i <= 9; ++i) spec.latencies[0.1 * i] = -0.3 + 0.1 * i;  // 3 samples apart
  const auto tm = recovered_tmax(spec);
  const auto r = ranks(tm);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < 9; ++i) hits += r[i] == i;
  CHECK(hits >= 8);
}

TEST_CASE("shuffled plant permutes recovered T_max") {
  auto spec = small_spec(7);
  const std::vector<double> lat{0.3, 0.05, 0.7, 0.5, 0.15, 0.9, 0.6, 0.4, 0.8};
  spec.latencies.clear();
  for (std::size_t i = 0; i < 9; ++i) spec.latencies[0.1 * static_cast<double>(i + 1)] = lat[i];
  const auto tm = recovered_tmax(spec);
  CHECK(ranks(tm) == ranks(lat));
}

TEST_CASE("null activations carry no alignment") {
  auto spec = small_spec(8);
  spec.null_activations = true;
  const auto d = generate(spec);
  const auto c = alignment_curve(zscore(d.epochs).epochs, d.activations.layers()[4].values, 0.5,
                                 make_folds(spec.n_words, 5), AlphaGrid());
  CHECK(c.max_score() < 3.0 / std::sqrt(100.0));
}

TEST_CASE("spec validation and JSON") {
  auto spec = default_synth_spec(9);
  spec.latencies[0.5] = 3.5;
  CHECK_THROWS_AS(spec.validate(), ParameterError);
  CHECK_THROWS_AS(generate(spec), ParameterError);
  auto narrow = default_synth_spec();
  narrow.kernel_width = 0.05;
  CHECK_THROWS_AS(narrow.validate(), ParameterError);

  auto s = default_synth_spec(42);
  s.snr = std::numeric_limits<double>::infinity();
  const auto text = serialize_synth_spec(s);
  const auto back = parse_synth_spec(text);
  CHECK(back.seed == 42);
  CHECK(std::isinf(back.snr));
  CHECK(back.latencies == s.latencies);
  CHECK(serialize_synth_spec(back) == text);
  CHECK(parse_synth_spec(R"({"seed": 3})").n_words == 2000);
  CHECK_THROWS_AS(parse_synth_spec(R"({"sed": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_synth_spec(R"({"snr": "loud"})"), ConfigError);
  CHECK_THROWS_AS(parse_synth_spec(R"({"latencies": [{"depth": 0.5, "latency": 9.0}]})"), ConfigError);
}
