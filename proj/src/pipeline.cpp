#include "tempalign/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "tempalign/errors.hpp"
#include "tempalign/pca.hpp"
#include "tempalign/preproc.hpp"
#include "tempalign/report.hpp"

namespace tempalign {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return "tempalign 0.1.0"; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw InvariantError("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string hash_path(const fs::path& p) {
  if (fs::is_regular_file(p)) return sha256_hex(read_file(p));
  if (!fs::is_directory(p)) throw DataError("cannot hash '" + p.string() + "': no such file or directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, p).generic_string() + ":" + sha256_hex(read_file(f)) + "\n";
  return sha256_hex(acc);
}

// ---------------------------------------------------------------------------

SynthPaths synth_paths(const fs::path& dir) {
  return {dir / "epochs.npy", dir / "activations", dir / "manifest.json"};
}

void run_synth_stage(const SynthSpec& spec, const fs::path& dir, unsigned threads) {
  const auto data = generate(spec, threads);
  const auto z = zscore(data.epochs);
  EpochBookkeeping book;
  book.kept_words.resize(data.manifest.size());
  for (std::size_t i = 0; i < book.kept_words.size(); ++i) book.kept_words[i] = i;
  book.degenerate_cells = z.degenerate_cells;
  const auto paths = synth_paths(dir);
  write_epochs(paths.epochs, z.epochs, book);
  write_activations(paths.activations, data.activations);
  write_manifest(paths.manifest, data.manifest);
  write_file(dir / "spec.json", serialize_synth_spec(spec));
}

EpochBookkeeping run_preprocess_stage(const fs::path& input, const fs::path& manifest_path, const fs::path& out,
                                      const PreprocessSettings& s) {
  const auto raw = read_tensor(input);
  if (raw.rank() != 2) throw ShapeError(input.string() + ": continuous recording must be rank 2 (sensors, samples)");
  ContinuousRecording rec;
  rec.sample_rate = s.sample_rate;
  rec.data.resize(static_cast<Eigen::Index>(raw.shape[0]), static_cast<Eigen::Index>(raw.shape[1]));
  for (std::size_t i = 0; i < raw.values.size(); ++i) rec.data.data()[i] = raw.values[i];  // both row-major

  const auto manifest = read_manifest(manifest_path);
  const auto filtered = bandpass(rec, s.low, s.high, s.threads);
  const auto down = resample(filtered, s.target_rate, s.threads);
  const auto ep = epoch(down, manifest.onsets(), s.tmin, s.tmax);
  const auto z = zscore(ep.epochs);
  EpochBookkeeping book{ep.kept, ep.dropped, z.degenerate_cells};
  write_epochs(out, z.epochs, book);
  return book;
}

void run_reduce_stage(const fs::path& activations, Eigen::Index n_components, const fs::path& out_dir) {
  const auto set = read_activations(activations);
  std::vector<LayerActivations> reduced;
  json layers = json::array();
  for (std::size_t i = 0; i < set.n_layers(); ++i) {
    const auto& l = set.layers()[i];
    const auto n = std::min<Eigen::Index>({n_components, l.values.rows() - 1, l.values.cols()});
    const auto model = fit_pca(l.values, n);
    reduced.push_back({l.depth, transform(model, l.values)});
    const auto bundle = "pca_" + std::to_string(i);
    save_pca(out_dir / bundle, model);
    layers.push_back({{"depth", l.depth}, {"input_dim", l.values.cols()}, {"n_components", n}, {"pca", bundle}});
  }
  write_activations(out_dir, ActivationSet(std::move(reduced)));
  write_file(out_dir / "reduce.json",
             json{{"n_components_requested", n_components}, {"layers", layers}}.dump(1) + "\n");
}

namespace {

struct AlignInputs {
  EpochTensor epochs;
  ActivationSet activations;
  WordManifest manifest;
};

AlignInputs load_align_inputs(const fs::path& epochs_path, const fs::path& activations_path,
                              const fs::path& manifest_path, const RunConfig& cfg) {
  AlignInputs in{read_epochs(epochs_path), read_activations(activations_path), read_manifest(manifest_path)};
  if (in.epochs.n_words() != in.manifest.size()) {
    const auto book = read_epoch_bookkeeping(epochs_path);
    if (book.kept_words.size() != in.epochs.n_words())
      throw ShapeError("epochs hold " + std::to_string(in.epochs.n_words()) + " words, manifest " +
                       std::to_string(in.manifest.size()) + ", and the sidecar does not say which were kept");
    in.manifest = subset_manifest(in.manifest, book.kept_words);
    if (in.activations.n_words() != in.manifest.size()) in.activations = in.activations.subset(book.kept_words);
  }
  check_word_counts(in.manifest, in.epochs, in.activations);

  if (cfg.depths) {
    std::vector<LayerActivations> keep;
    for (double d : *cfg.depths) {
      const auto& layers = in.activations.layers();
      auto it = std::find_if(layers.begin(), layers.end(),
                             [&](const LayerActivations& l) { return std::abs(l.depth - d) < 1e-9; });
      if (it == layers.end()) throw DataError("no activation layer at depth " + std::to_string(d));
      keep.push_back(*it);
    }
    std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) { return a.depth < b.depth; });
    in.activations = ActivationSet(std::move(keep));
  }
  return in;
}

std::vector<AlignmentCurve> align_subset(const AlignInputs& in, const std::vector<std::size_t>& words,
                                         const RunConfig& cfg) {
  const auto epochs = in.epochs.subset(words);
  const auto acts = in.activations.subset(words);
  const auto plan = make_folds(words.size(), cfg.folds, cfg.fold_mode, cfg.fold_seed);
  AlignOptions opts;
  opts.weighting = cfg.weighting;
  opts.threads = cfg.threads;
  if (cfg.pca_per_fold) opts.pca_per_fold = cfg.pca_components;
  if (opts.pca_per_fold) {
    // Clamp to what every training fold supports.
    const auto min_train = static_cast<Eigen::Index>(words.size() - (words.size() + cfg.folds - 1) / cfg.folds);
    for (const auto& l : acts.layers())
      opts.pca_per_fold = std::min<Eigen::Index>({*opts.pca_per_fold, min_train - 1, l.values.cols()});
  }
  return alignment_curves(epochs, acts, plan, cfg.alphas, opts);
}

json align_extra(const RunConfig& cfg, std::size_t n_words) {
  auto j = cfg.align_settings();
  j["n_words"] = n_words;
  return json{{"settings", j}};
}

void write_temporal(const TemporalResult& r, const json& settings, const fs::path& out_json) {
  auto j = temporal_to_json(r);
  j["settings"] = settings;
  write_file(out_json, j.dump(1) + "\n");
  auto csv = out_json;
  csv.replace_extension(".csv");
  write_file(csv, temporal_band_csv(r));
}

json settings_of(const TmaxOptions& o) {
  RunConfig c;
  c.tmax_options = o;
  return c.temporal_settings();
}

}  // namespace

std::vector<AlignmentCurve> run_align_stage(const fs::path& epochs, const fs::path& activations,
                                            const fs::path& manifest, const RunConfig& cfg, const fs::path& out_dir) {
  const auto in = load_align_inputs(epochs, activations, manifest, cfg);
  const auto words = select_words(in.manifest, cfg.selection);
  auto curves = align_subset(in, words, cfg);
  write_alignment_outputs(out_dir, curves, cfg.label, align_extra(cfg, words.size()));
  return curves;
}

TemporalResult run_temporal_stage(const fs::path& align_dir, const TmaxOptions& opts, const fs::path& out_json) {
  const auto curves = read_alignment_outputs(align_dir);
  const auto r = temporal_score(curves, opts);
  write_temporal(r, settings_of(opts), out_json);
  return r;
}

json run_quartiles_stage(const fs::path& manifest_path, const std::optional<fs::path>& epochs,
                         const std::optional<fs::path>& activations, const RunConfig& cfg, const fs::path& out_dir) {
  json out;
  std::array<std::vector<std::size_t>, 4> quartiles;
  std::optional<AlignInputs> in;
  if (epochs) {
    if (!activations) throw ConfigError("activations", "required when epochs are given");
    in = load_align_inputs(*epochs, *activations, manifest_path, cfg);
    quartiles = quartile_split(in->manifest, select_words(in->manifest, cfg.selection));
  } else {
    const auto m = read_manifest(manifest_path);
    quartiles = quartile_split(m, select_words(m, cfg.selection));
  }
  json q = json::array();
  for (std::size_t k = 0; k < 4; ++k) q.push_back({{"quartile", k + 1}, {"words", quartiles[k]}});
  out["quartiles"] = q;
  out["selection"] = to_string(cfg.selection);
  out["order"] = "quartile 1 = least predictable (most surprising), quartile 4 = most predictable";

  if (in) {
    std::array<TemporalResult, 4> results;
    json per = json::array();
    for (std::size_t k = 0; k < 4; ++k) {
      const auto curves = align_subset(*in, quartiles[k], cfg);
      const auto dir = out_dir / ("q" + std::to_string(k + 1));
      write_alignment_outputs(dir, curves, cfg.label, align_extra(cfg, quartiles[k].size()));
      results[k] = temporal_score(curves, cfg.tmax_options);
      write_temporal(results[k], cfg.temporal_settings(), dir / "temporal.json");
      per.push_back({{"quartile", k + 1}, {"temporal", temporal_to_json(results[k])}});
    }
    out["temporal"] = per;
    try {
      const auto diff = tmax_diff_correlation(results[3].per_layer_tmax, results[0].per_layer_tmax);
      out["difference"] = {{"outcome", diff.p_value > 0.05 ? "no significant depth effect" : "depth effect"},
                           {"stat", correlation_to_json(diff)}};
    } catch (const NoDepthEffect&) {
      out["difference"] = {{"outcome", "no depth-dependent difference"}, {"stat", nullptr}};
    }
  }
  write_file(out_dir / "quartiles.json", out.dump(1) + "\n");
  return out;
}

std::vector<RunSummary> run_report_stage(const std::string& runs_glob, const fs::path& out_dir,
                                         const TmaxOptions& opts) {
  std::vector<fs::path> runs;
  for (const auto& p : expand_glob(runs_glob))
    if (fs::exists(p / "align" / "summary.json") && fs::exists(p / "temporal.json")) runs.push_back(p);
  if (runs.empty()) throw EmptySelectionError("report: no run directories match '" + runs_glob + "'");

  std::vector<RunSummary> rows;
  std::vector<std::vector<AlignmentCurve>> curve_sets;
  std::vector<DepthMap> tmaxes;
  std::map<std::string, std::vector<double>> per_subject;
  std::map<std::string, std::map<std::string, std::vector<std::vector<AlignmentCurve>>>> by_subject_model;
  for (const auto& r : runs) {
    rows.push_back(load_run_summary(r));
    curve_sets.push_back(read_alignment_outputs(r / "align"));
    tmaxes.push_back(temporal_from_json(json::parse(read_file(r / "temporal.json"))).per_layer_tmax);
    const auto& label = rows.back().label;
    if (!label.subject.empty()) per_subject[label.model].push_back(rows.back().max_alignment);
    by_subject_model[label.subject][label.model].push_back(curve_sets.back());
  }
  write_file(out_dir / "summary.csv", summary_csv(rows));

  json report = {{"runs", runs.size()}};
  auto write_average = [&](const std::vector<AlignmentCurve>& avg, const std::string& name) {
    write_alignment_outputs(out_dir / name, avg, RunLabel{name, 0, 0, ""});
    try {
      const auto t = temporal_score(avg, opts);
      write_temporal(t, settings_of(opts), out_dir / (name + "_temporal.json"));
      report[name] = temporal_to_json(t);
    } catch (const DegenerateError& e) {
      report[name] = {{"error", e.what()}};
    }
  };
  try {
    write_average(average_curve_sets(curve_sets), "average_pooled");
    // Models first within each subject, then subjects.
    std::vector<std::vector<AlignmentCurve>> subject_means;
    for (const auto& [subject, models] : by_subject_model) {
      std::vector<std::vector<AlignmentCurve>> model_means;
      for (const auto& [model, sets] : models) model_means.push_back(average_curve_sets(sets));
      subject_means.push_back(average_curve_sets(model_means));
    }
    write_average(average_curve_sets(subject_means), "average_models_then_subjects");
  } catch (const ShapeError& e) {
    report["average_error"] = e.what();
  }

  if (tmaxes.size() >= 2) {
    try {
      std::string csv = "depth,tmax_sd\n";
      for (const auto& [d, sd] : tmax_dispersion(tmaxes)) csv += std::to_string(d) + "," + std::to_string(sd) + "\n";
      write_file(out_dir / "tmax_dispersion.csv", csv);
    } catch (const ShapeError& e) {
      report["tmax_dispersion_error"] = e.what();
    }
  }
  std::erase_if(per_subject, [](const auto& kv) { return kv.second.size() < 2; });
  if (!per_subject.empty()) {
    std::string csv = "model,max_alignment_sd\n";
    for (const auto& [m, sd] : subject_dispersion(per_subject)) csv += m + "," + std::to_string(sd) + "\n";
    write_file(out_dir / "subject_dispersion.csv", csv);
  }
  write_file(out_dir / "report.json", report.dump(1) + "\n");
  return rows;
}

json run_meta_stage(const fs::path& summary_path, const std::optional<std::string>& factor, bool log_scale,
                    const fs::path& out_json) {
  const auto rows = parse_summary_csv(read_file(summary_path));
  std::vector<ScoreRecord> records;
  for (const auto& r : rows) records.push_back({r.run, r.temporal_r, r.max_alignment});
  const auto sc = score_correlation(records);
  json out = {{"score_correlation", correlation_to_json(sc)}, {"records", records.size()}};
  if (factor) {
    if (*factor != "size" && *factor != "context") throw ParameterError("meta: factor must be 'size' or 'context'");
    std::map<double, double> temporal, alignment;
    for (const auto& r : rows) {
      const double f = *factor == "size" ? r.label.size : r.label.context;
      if (temporal.count(f)) throw DataError("meta: duplicate " + *factor + " level " + std::to_string(f));
      temporal[f] = r.temporal_r;
      alignment[f] = r.max_alignment;
    }
    out["trend"] = {{"factor", *factor},
                    {"log_scale", log_scale},
                    {"temporal", correlation_to_json(trend_vs_factor(temporal, log_scale))},
                    {"alignment", correlation_to_json(trend_vs_factor(alignment, log_scale))}};
  }
  write_file(out_json, out.dump(1) + "\n");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json output_hashes(const fs::path& root, const std::vector<fs::path>& outputs) {
  json j = json::object();
  for (const auto& o : outputs) j[fs::relative(o, root).generic_string()] = hash_path(o);
  return j;
}

bool stage_current(const fs::path& record_path, const std::string& fingerprint, const fs::path& root) {
  if (!fs::exists(record_path)) return false;
  try {
    const auto rec = json::parse(read_file(record_path));
    if (rec.at("fingerprint").get<std::string>() != fingerprint) return false;
    for (const auto& [rel, h] : rec.at("outputs").items()) {
      const auto p = root / rel;
      if (!fs::exists(p) || hash_path(p) != h.get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

RunOutcome run_pipeline(const RunConfig& cfg, bool force) {
  const auto start = std::chrono::steady_clock::now();
  const auto& root = cfg.out;
  fs::create_directories(root / ".stages");
  const auto config_hash = sha256_hex(cfg.source.dump());

  fs::path epochs = cfg.epochs.value_or(fs::path{});
  fs::path activations = cfg.activations.value_or(fs::path{});
  fs::path manifest = cfg.manifest.value_or(fs::path{});

  RunOutcome outcome;
  auto run_stage = [&](const std::string& name, const json& settings, const std::vector<fs::path>& inputs,
                       const std::vector<fs::path>& outputs, auto&& body) {
    json fp = {{"stage", name}, {"settings", settings}, {"version", version_string()}};
    json in = json::array();
    for (const auto& i : inputs) in.push_back(hash_path(i));
    fp["inputs"] = in;
    const auto fingerprint = sha256_hex(fp.dump());
    const auto record_path = root / ".stages" / (name + ".json");
    StageRecord rec{name, fingerprint, false, json::object()};
    if (!force && stage_current(record_path, fingerprint, root)) {
      rec.skipped = true;
      rec.outputs = json::parse(read_file(record_path)).at("outputs");
    } else {
      body();
      rec.outputs = output_hashes(root, outputs);
      write_file(record_path, json{{"fingerprint", fingerprint}, {"outputs", rec.outputs}}.dump(1) + "\n");
    }
    outcome.stages.push_back(std::move(rec));
  };

  for (const auto& stage : cfg.stages) {
    if (stage == "synth") {
      const auto dir = root / "synth";
      const auto p = synth_paths(dir);
      run_stage("synth", json::parse(serialize_synth_spec(*cfg.synth)), {}, {p.epochs, sidecar_path(p.epochs), p.activations, p.manifest},
                [&] { run_synth_stage(*cfg.synth, dir, cfg.threads); });
      epochs = p.epochs;
      activations = p.activations;
      manifest = p.manifest;
    } else if (stage == "preprocess") {
      const auto out = root / "preprocess" / "epochs.npy";
      PreprocessSettings s{cfg.raw->sample_rate, cfg.band_low, cfg.band_high, cfg.target_rate, cfg.tmin, cfg.tmax,
                           cfg.threads};
      json settings = {{"sample_rate", s.sample_rate}, {"low", s.low},   {"high", s.high},
                       {"target_rate", s.target_rate}, {"tmin", s.tmin}, {"tmax", s.tmax}};
      run_stage("preprocess", settings, {cfg.raw->input, manifest}, {out, sidecar_path(out)},
                [&] { run_preprocess_stage(cfg.raw->input, manifest, out, s); });
      epochs = out;
    } else if (stage == "reduce") {
      const auto out = root / "reduced";
      run_stage("reduce", json{{"n_components", cfg.pca_components}}, {activations}, {out},
                [&] { run_reduce_stage(activations, cfg.pca_components, out); });
      activations = out;
    } else if (stage == "align") {
      const auto out = root / "align";
      run_stage("align", cfg.align_settings(), {epochs, sidecar_path(epochs), activations, manifest}, {out},
                [&] { run_align_stage(epochs, activations, manifest, cfg, out); });
    } else if (stage == "temporal") {
      const auto out = root / "temporal.json";
      auto csv = out;
      csv.replace_extension(".csv");
      run_stage("temporal", cfg.temporal_settings(), {root / "align"}, {out, csv},
                [&] { run_temporal_stage(root / "align", cfg.tmax_options, out); });
    }
  }

  json stages = json::array();
  json hashed_stages = json::array();
  for (const auto& s : outcome.stages) {
    stages.push_back({{"name", s.name}, {"fingerprint", s.fingerprint}, {"status", s.skipped ? "skipped" : "ran"}, {"outputs", s.outputs}});
    hashed_stages.push_back({{"name", s.name}, {"fingerprint", s.fingerprint}, {"outputs", s.outputs}});
  }
  // Paths and thread counts never enter the fingerprints, so the hash names the
  // results rather than where or how fast they were produced.
  const json hashed = {{"version", version_string()}, {"stages", hashed_stages}};
  outcome.manifest_hash = sha256_hex(hashed.dump());
  outcome.manifest = {{"config_sha256", config_hash},
                      {"version", version_string()},
                      {"stages", stages},
                      {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                      {"manifest_hash", outcome.manifest_hash}};
  write_file(root / "run_manifest.json", outcome.manifest.dump(1) + "\n");
  return outcome;
}

SelftestResult run_selftest(const SynthSpec& spec, unsigned threads, const AlphaGrid& grid, int folds) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = generate(spec, threads);
  const auto z = zscore(data.epochs);
  const auto plan = make_folds(z.epochs.n_words(), folds);
  AlignOptions opts;
  opts.threads = threads;
  SelftestResult res;
  res.curves = alignment_curves(z.epochs, data.activations, plan, grid, opts);
  res.temporal = temporal_score(res.curves);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace tempalign
