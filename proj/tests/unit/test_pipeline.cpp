#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "tempalign/config.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/pipeline.hpp"
#include "tmpdir.hpp"

using namespace tempalign;
namespace fs = std::filesystem;

namespace {

std::string small_config(const fs::path& out, const std::string& extra = "") {
  return R"({"out": ")" + out.string() +
         R"(", "synth": {"seed": 3, "n_words": 300, "n_sensors": 20, "tmin": -0.5, "tmax": 1.5})" + extra + "}";
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("synth -> reduce -> align -> temporal, then idempotent rerun") {
  TempDir dir("pipe");
  auto cfg = parse_run_config(small_config(dir / "run", R"(, "pca": {"n_components": 3})"));
  cfg.threads = 1;
  const auto first = run_pipeline(cfg);
  REQUIRE(first.stages.size() == 4);
  for (const auto& s : first.stages) CHECK_FALSE(s.skipped);
  const auto temporal = read_json(dir / "run/temporal.json");
  CHECK(temporal["r"].get<double>() >= 0.95);
  CHECK(fs::exists(dir / "run/temporal.csv"));
  CHECK(fs::exists(dir / "run/align/curve_8.csv"));
  CHECK(fs::exists(dir / "run/reduced/pca_0/pca.json"));
  CHECK(read_json(dir / "run/reduced/reduce.json")["layers"][0]["n_components"] == 3);

  const auto manifest = read_json(dir / "run/run_manifest.json");
  for (const char* k : {"config_sha256", "version", "stages", "wall_time_s", "manifest_hash"}) CHECK(manifest.contains(k));

  const auto second = run_pipeline(cfg);
  for (const auto& s : second.stages) CHECK(s.skipped);
  CHECK(second.manifest_hash == first.manifest_hash);

  const auto forced = run_pipeline(cfg, true);
  for (const auto& s : forced.stages) CHECK_FALSE(s.skipped);
  CHECK(forced.manifest_hash == first.manifest_hash);

  // A changed output invalidates its stage and everything after it.
  write_file(dir / "run/align/curve_0.csv", "time_s,score\n");
  const auto repaired = run_pipeline(cfg);
  CHECK(repaired.stages[0].skipped);
  CHECK(repaired.stages[1].skipped);
  CHECK_FALSE(repaired.stages[2].skipped);
  CHECK(repaired.manifest_hash == first.manifest_hash);
}

TEST_CASE("outputs are bit-identical across thread counts") {
  TempDir dir("threads");
  std::string hash;
  for (unsigned t : {1u, 3u}) {
    auto cfg = parse_run_config(small_config(dir / ("run" + std::to_string(t)), R"(, "pca": {"enabled": false})"));
    cfg.threads = t;
    const auto out = run_pipeline(cfg);
    if (hash.empty()) hash = out.manifest_hash;
    CHECK(out.manifest_hash == hash);
  }
  CHECK(hash_path(dir / "run1/align") == hash_path(dir / "run3/align"));
}

TEST_CASE("per-fold PCA and layer restriction") {
  TempDir dir("perfold");
  auto cfg = parse_run_config(
      small_config(dir / "run", R"(, "pca": {"per_fold": true, "n_components": 2}, "depths": [0.1, 0.5, 0.9])"));
  CHECK(cfg.stages == std::vector<std::string>{"synth", "align", "temporal"});
  run_pipeline(cfg);
  const auto summary = read_json(dir / "run/align/summary.json");
  CHECK(summary["layers"].size() == 3);
  CHECK(read_json(dir / "run/temporal.json")["n"] == 3);
}

TEST_CASE("quartiles, report and meta stages") {
  TempDir dir("stages");
  std::vector<fs::path> runs;
  for (int i = 0; i < 3; ++i) {
    auto cfg = parse_run_config(
        R"({"out": ")" + (dir / ("runs/r" + std::to_string(i))).string() +
        R"(", "pca": {"enabled": false}, "synth": {"seed": )" + std::to_string(10 + i) +
        R"(, "n_words": 200, "n_sensors": 16, "tmin": -0.5, "tmax": 1.5, "snr": )" + std::to_string(2 + 4 * i) +
        R"(}, "label": {"model": "m)" + std::to_string(i % 2) + R"(", "size": )" + std::to_string(1000 * (i + 1)) +
        R"(, "context": 5, "subject": "s)" + std::to_string(i) + "\"}}");
    run_pipeline(cfg);
    runs.push_back(cfg.out);
  }

  auto qcfg = parse_analysis_config(R"({"word_selection": "all"})");
  const auto synth = synth_paths(runs[0] / "synth");
  const auto q = run_quartiles_stage(synth.manifest, synth.epochs, synth.activations, qcfg, dir / "q");
  CHECK(q["quartiles"].size() == 4);
  CHECK(q["temporal"].size() == 4);
  CHECK(q.contains("difference"));
  CHECK(fs::exists(dir / "q/q4/temporal.json"));
  const auto split_only = run_quartiles_stage(synth.manifest, std::nullopt, std::nullopt, qcfg, dir / "q2");
  CHECK_FALSE(split_only.contains("temporal"));

  const auto rows = run_report_stage((dir / "runs/r*").string(), dir / "report", {});
  CHECK(rows.size() == 3);
  CHECK(fs::exists(dir / "report/summary.csv"));
  CHECK(fs::exists(dir / "report/average_pooled/summary.json"));
  CHECK(fs::exists(dir / "report/average_models_then_subjects_temporal.json"));
  CHECK(fs::exists(dir / "report/tmax_dispersion.csv"));
  CHECK(fs::exists(dir / "report/subject_dispersion.csv"));
  CHECK_THROWS_AS(run_report_stage((dir / "none*").string(), dir / "r2", {}), EmptySelectionError);

  const auto meta = run_meta_stage(dir / "report/summary.csv", "size", true, dir / "meta.json");
  CHECK(meta.contains("score_correlation"));
  CHECK(meta["trend"]["factor"] == "size");
  CHECK_THROWS_AS(run_meta_stage(dir / "report/summary.csv", "depth", false, dir / "m2.json"), ParameterError);
}

TEST_CASE("raw recording through the preprocess stage") {
  TempDir dir("raw");
  // 6 sensors of noise at 200 Hz for 120 s, with 60 word onsets.
  const std::size_t S = 6, N = 24000;
  std::vector<float> vals(S * N);
  std::uint64_t x = 1;
  for (auto& v : vals) {
    x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    v = static_cast<float>(static_cast<double>(x >> 11) * 0x1.0p-53 - 0.5);
  }
  write_tensor(dir / "raw.npy", Tensor({S, N}, vals));
  WordManifest m;
  m.source_id = "raw";
  for (std::size_t i = 0; i < 60; ++i)
    m.entries.push_back({i, 1.0 + 1.9 * static_cast<double>(i), i % 3 ? PosClass::Noun : PosClass::Other, i % 3 != 0, 0.5});
  write_manifest(dir / "manifest.json", m);
  PreprocessSettings s;
  s.sample_rate = 200.0;
  const auto book = run_preprocess_stage(dir / "raw.npy", dir / "manifest.json", dir / "epochs.npy", s);
  CHECK(book.kept_words.size() + book.dropped_words.size() == 60);
  CHECK(book.dropped_words.front() == 0);
  const auto e = read_epochs(dir / "epochs.npy");
  CHECK(e.n_words() == book.kept_words.size());
  CHECK(e.n_times() == 166);
  CHECK(read_epoch_bookkeeping(dir / "epochs.npy").dropped_words == book.dropped_words);

  // Alignment reconciles the dropped words against the full manifest.
  Eigen::MatrixXd acts(60, 2);
  for (Eigen::Index i = 0; i < 60; ++i) acts(i, 0) = std::sin(0.3 * static_cast<double>(i)), acts(i, 1) = std::cos(0.7 * static_cast<double>(i));
  write_activations(dir / "acts", ActivationSet({{0.5, acts}}));
  auto cfg = parse_analysis_config(R"({"folds": 3})");
  const auto curves = run_align_stage(dir / "epochs.npy", dir / "acts", dir / "manifest.json", cfg, dir / "align");
  REQUIRE(curves.size() == 1);
  CHECK(read_json(dir / "align/summary.json")["settings"]["n_words"].get<std::size_t>() < book.kept_words.size());
}

TEST_CASE("command-line exit codes") {
  const std::string cli = TEMPALIGN_CLI_PATH;
  if (cli.empty()) return;
  TempDir dir("cli");
  auto run = [&](const std::string& args) {
    const int rc = std::system((cli + " " + args + " >" + (dir / "log").string() + " 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  write_file(dir / "missing.json", R"({"out": ")" + (dir / "o").string() + "\"}");
  CHECK(run("run --config " + (dir / "missing.json").string()) == 2);
  CHECK(read_file(dir / "log").find("epochs") != std::string::npos);
  CHECK(run("align --epochs /nonexistent.npy --activations /x --manifest /y --out " + (dir / "a").string()) == 3);
  CHECK(run("frobnicate") == 2);
  CHECK(run("--version") == 0);
  CHECK(run("synth --out " + (dir / "syn").string() + " --threads 2") == 0);
  CHECK(fs::exists(dir / "syn/epochs.npy.json"));
}
