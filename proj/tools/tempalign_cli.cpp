// tempalign: command-line entry point. Exit codes: 0 ok, 1 selftest oracle
// failed, 2 configuration/usage error, 3 data error, 4 internal error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "tempalign/config.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/pipeline.hpp"
#include "tempalign/report.hpp"

namespace fs = std::filesystem;
using namespace tempalign;

namespace {

RunConfig analysis_config(const std::string& path) {
  if (path.empty()) return parse_analysis_config("{}");
  if (!fs::exists(path)) throw ConfigError("config", "'" + path + "' does not exist");
  return parse_analysis_config(read_file(path));
}

void print_temporal(const TemporalResult& r) {
  std::printf("temporal_r=%.6f p=%.3g n=%zu slope=%.6g\n", r.stat.r, r.stat.p_value, r.stat.n, r.stat.slope);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal alignment between model layers and brain responses"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  unsigned threads = 0;
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker cap (default: TA_THREADS or all cores)");
  };

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Band-pass, resample, epoch and z-score a continuous recording");
  std::string pre_input, pre_onsets, pre_out;
  PreprocessSettings pre_s;
  pre->add_option("--input", pre_input, "Continuous recording NPY (sensors x samples)")->required();
  pre->add_option("--rate", pre_s.sample_rate, "Sampling rate of the input in Hz")->required();
  pre->add_option("--onsets", pre_onsets, "Word manifest JSON")->required();
  pre->add_option("--out", pre_out, "Output epochs NPY (sidecar written to <out>.json)")->required();
  pre->add_option("--low", pre_s.low, "High-pass edge in Hz")->capture_default_str();
  pre->add_option("--high", pre_s.high, "Low-pass edge in Hz")->capture_default_str();
  pre->add_option("--target-rate", pre_s.target_rate, "Output sampling rate in Hz")->capture_default_str();
  pre->add_option("--tmin", pre_s.tmin, "Epoch start relative to onset (s)")->capture_default_str();
  pre->add_option("--tmax", pre_s.tmax, "Epoch end relative to onset (s)")->capture_default_str();
  add_threads(pre);

  // reduce
  auto* red = app.add_subcommand("reduce", "PCA-reduce every layer of an activation set");
  std::string red_in, red_out;
  Eigen::Index red_n = 50;
  red->add_option("--activations", red_in, "Activation directory")->required();
  red->add_option("--n", red_n, "Components per layer")->capture_default_str();
  red->add_option("--out", red_out, "Output directory")->required();
  add_threads(red);

  // align
  auto* ali = app.add_subcommand("align", "Time-resolved alignment curves for every layer");
  std::string ali_epochs, ali_acts, ali_manifest, ali_config, ali_out;
  ali->add_option("--epochs", ali_epochs, "Epochs NPY")->required();
  ali->add_option("--activations", ali_acts, "Activation directory")->required();
  ali->add_option("--manifest", ali_manifest, "Word manifest JSON")->required();
  ali->add_option("--config", ali_config, "Analysis config JSON");
  ali->add_option("--out", ali_out, "Output directory")->required();
  add_threads(ali);

  // temporal
  auto* tem = app.add_subcommand("temporal", "Peak-latency vs depth statistic from align outputs");
  std::string tem_align, tem_out, tem_config;
  tem->add_option("--align", tem_align, "Align output directory")->required();
  tem->add_option("--out", tem_out, "Output JSON (band CSV written beside it)")->required();
  tem->add_option("--config", tem_config, "Analysis config JSON");
  add_threads(tem);

  // quartiles
  auto* qua = app.add_subcommand("quartiles", "Predictability quartile split and per-quartile temporal scores");
  std::string qua_manifest, qua_epochs, qua_acts, qua_config, qua_out, qua_selection = "all";
  qua->add_option("--manifest", qua_manifest, "Word manifest JSON")->required();
  qua->add_option("--epochs", qua_epochs, "Epochs NPY (enables per-quartile alignment)");
  qua->add_option("--activations", qua_acts, "Activation directory");
  qua->add_option("--config", qua_config, "Analysis config JSON");
  qua->add_option("--selection", qua_selection, "Words to split: all or content-only")->capture_default_str();
  qua->add_option("--out", qua_out, "Output directory")->required();
  add_threads(qua);

  // meta
  auto* met = app.add_subcommand("meta", "Correlate scores across runs; optional trend against size or context");
  std::string met_summary, met_out, met_factor;
  bool met_log = false;
  met->add_option("--summary", met_summary, "summary.csv from report")->required();
  met->add_option("--factor", met_factor, "size or context");
  met->add_flag("--log", met_log, "Use log10 of the factor");
  met->add_option("--out", met_out, "Output JSON")->required();
  add_threads(met);

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a planted-latency fixture");
  std::string syn_spec, syn_out;
  std::optional<std::uint64_t> syn_seed;
  syn->add_option("--spec", syn_spec, "Synth spec JSON (default fixture if omitted)");
  syn->add_option("--seed", syn_seed, "Override the seed");
  syn->add_option("--out", syn_out, "Output directory")->required();
  add_threads(syn);

  // report
  auto* rep = app.add_subcommand("report", "Summary table and averaged curves across run directories");
  std::string rep_runs, rep_out, rep_config;
  rep->add_option("--runs", rep_runs, "Glob matching run directories")->required();
  rep->add_option("--out", rep_out, "Output directory")->required();
  rep->add_option("--config", rep_config, "Analysis config JSON (T_max settings)");
  add_threads(rep);

  // selftest
  auto* sel = app.add_subcommand("selftest", "Run the planted-latency oracle in memory");
  std::uint64_t sel_seed = 0;
  bool sel_null = false;
  std::string sel_out;
  sel->add_option("--seed", sel_seed, "Fixture seed")->capture_default_str();
  sel->add_flag("--null", sel_null, "Null activations (expect no alignment)");
  sel->add_option("--out", sel_out, "Optional JSON result path");
  add_threads(sel);

  // run
  auto* run = app.add_subcommand("run", "Execute the stages of a run config");
  std::string run_config;
  bool run_force = false;
  run->add_option("--config", run_config, "Run config JSON")->required();
  run->add_flag("--force", run_force, "Re-run stages even when outputs are current");
  add_threads(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const unsigned t = resolve_threads(threads);
    if (*pre) {
      pre_s.threads = t;
      const auto book = run_preprocess_stage(pre_input, pre_onsets, pre_out, pre_s);
      std::printf("kept %zu words, dropped %zu, degenerate cells %zu\n", book.kept_words.size(),
                  book.dropped_words.size(), book.degenerate_cells.size());
    } else if (*red) {
      run_reduce_stage(red_in, red_n, red_out);
    } else if (*ali) {
      auto cfg = analysis_config(ali_config);
      cfg.threads = t;
      const auto curves = run_align_stage(ali_epochs, ali_acts, ali_manifest, cfg, ali_out);
      for (const auto& c : curves)
        std::printf("depth=%.3f max=%.4f at %.3fs\n", c.layer_depth, c.max_score(), c.argmax_time());
    } else if (*tem) {
      const auto cfg = analysis_config(tem_config);
      print_temporal(run_temporal_stage(tem_align, cfg.tmax_options, tem_out));
    } else if (*qua) {
      auto cfg = analysis_config(qua_config);
      cfg.threads = t;
      cfg.selection = parse_word_selection(qua_selection);
      std::optional<fs::path> e, a;
      if (!qua_epochs.empty()) e = qua_epochs;
      if (!qua_acts.empty()) a = qua_acts;
      const auto out = run_quartiles_stage(qua_manifest, e, a, cfg, qua_out);
      if (out.contains("difference")) std::printf("%s\n", out["difference"]["outcome"].get<std::string>().c_str());
    } else if (*met) {
      std::optional<std::string> f;
      if (!met_factor.empty()) f = met_factor;
      const auto out = run_meta_stage(met_summary, f, met_log, met_out);
      std::printf("score correlation r=%.4f p=%.3g\n", out["score_correlation"]["r"].get<double>(),
                  out["score_correlation"]["p"].get<double>());
    } else if (*syn) {
      SynthSpec spec = default_synth_spec(0);
      if (!syn_spec.empty()) {
        if (!fs::exists(syn_spec)) throw ConfigError("spec", "'" + syn_spec + "' does not exist");
        spec = parse_synth_spec(read_file(syn_spec));
      }
      if (syn_seed) spec.seed = *syn_seed;
      run_synth_stage(spec, syn_out, t);
    } else if (*rep) {
      const auto cfg = analysis_config(rep_config);
      const auto rows = run_report_stage(rep_runs, rep_out, cfg.tmax_options);
      std::printf("%zu runs summarised\n", rows.size());
    } else if (*sel) {
      auto spec = default_synth_spec(sel_seed);
      spec.null_activations = sel_null;
      const auto res = run_selftest(spec, t);
      print_temporal(res.temporal);
      std::printf("seconds=%.2f threads=%u\n", res.seconds, t);
      const bool pass = sel_null ? res.temporal.stat.p_value > 0.05
                                 : res.temporal.stat.r >= 0.95 && res.temporal.stat.p_value < 1e-3;
      if (!sel_out.empty()) {
        auto j = temporal_to_json(res.temporal);
        j["seconds"] = res.seconds;
        j["null"] = sel_null;
        j["pass"] = pass;
        write_file(sel_out, j.dump(1) + "\n");
      }
      std::printf("%s\n", pass ? "PASS" : "FAIL");
      return pass ? 0 : 1;
    } else if (*run) {
      auto cfg = read_run_config(run_config);
      if (threads > 0) cfg.threads = threads;
      cfg.threads = resolve_threads(cfg.threads);
      const auto outcome = run_pipeline(cfg, run_force);
      for (const auto& s : outcome.stages) std::printf("%-10s %s\n", s.name.c_str(), s.skipped ? "skipped" : "ran");
      const auto tj = cfg.out / "temporal.json";
      if (fs::exists(tj)) {
        const auto j = nlohmann::json::parse(read_file(tj));
        std::printf("temporal_r=%.6f p=%.3g\n", j["r"].get<double>(), j["p"].get<double>());
      }
      std::printf("manifest_hash=%s\n", outcome.manifest_hash.c_str());
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
