#include "tempalign/report.hpp"

#include <glob.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "tempalign/errors.hpp"

namespace tempalign {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw InvariantError("number formatting failed");
  return std::string(buf, p);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw FormatError("bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

// Shifted by the first value, so identical inputs give exactly zero.
double sample_sd(const std::vector<double>& v) {
  const double shift = v.front();
  double m = 0.0;
  for (double x : v) m += x - shift;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - shift - m) * (x - shift - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

AlignmentCurve average_curves(const std::vector<AlignmentCurve>& curves) {
  if (curves.empty()) throw ParameterError("average_curves: no curves");
  const auto& first = curves.front();
  bool same_folds = true;
  for (const auto& c : curves) {
    if (c.times.size() != first.times.size() || c.scores.size() != first.times.size())
      throw ShapeError("average_curves: time axes differ in length");
    for (std::size_t t = 0; t < c.times.size(); ++t)
      if (std::abs(c.times[t] - first.times[t]) > 1e-9) throw ShapeError("average_curves: time axes differ");
    same_folds = same_folds && c.fold_scores.rows() == first.fold_scores.rows() &&
                 c.fold_scores.cols() == first.fold_scores.cols();
  }
  AlignmentCurve out;
  out.layer_depth = first.layer_depth;
  out.times = first.times;
  out.scores.assign(first.times.size(), 0.0);
  out.skipped_dims.assign(first.times.size(), 0);
  const double n = static_cast<double>(curves.size());
  for (const auto& c : curves)
    for (std::size_t t = 0; t < c.scores.size(); ++t) {
      out.scores[t] += c.scores[t] / n;
      if (c.skipped_dims.size() == c.scores.size()) out.skipped_dims[t] += c.skipped_dims[t];
    }
  if (same_folds && first.fold_scores.size() > 0) {
    out.fold_scores = Eigen::MatrixXd::Zero(first.fold_scores.rows(), first.fold_scores.cols());
    for (const auto& c : curves) out.fold_scores += c.fold_scores / n;
    // Keep scores exactly equal to the fold mean.
    for (std::size_t t = 0; t < out.scores.size(); ++t) out.scores[t] = out.fold_scores.col(t).mean();
  } else {
    out.fold_scores = Eigen::Map<const Eigen::RowVectorXd>(out.scores.data(), out.scores.size());
  }
  return out;
}

std::vector<AlignmentCurve> average_curve_sets(const std::vector<std::vector<AlignmentCurve>>& runs) {
  if (runs.empty()) throw ParameterError("average_curve_sets: no runs");
  std::vector<AlignmentCurve> out;
  for (const auto& ref : runs.front()) {
    std::vector<AlignmentCurve> matched;
    for (const auto& run : runs) {
      if (run.size() != runs.front().size()) throw ShapeError("average_curve_sets: runs have different layer sets");
      auto it = std::find_if(run.begin(), run.end(), [&](const AlignmentCurve& c) {
        return std::abs(c.layer_depth - ref.layer_depth) < 1e-12;
      });
      if (it == run.end()) throw ShapeError("average_curve_sets: depth " + fmt_double(ref.layer_depth) + " missing");
      matched.push_back(*it);
    }
    out.push_back(average_curves(matched));
  }
  return out;
}

DepthMap tmax_dispersion(const std::vector<DepthMap>& tmaxes) {
  if (tmaxes.size() < 2) throw ParameterError("tmax_dispersion: need at least 2 models");
  DepthMap out;
  for (const auto& [depth, _] : tmaxes.front()) {
    std::vector<double> v;
    for (const auto& m : tmaxes) {
      const auto it = m.find(depth);
      if (it == m.end() || m.size() != tmaxes.front().size())
        throw ShapeError("tmax_dispersion: depth " + fmt_double(depth) + " missing in a model");
      v.push_back(it->second);
    }
    out[depth] = sample_sd(v);
  }
  return out;
}

std::map<std::string, double> subject_dispersion(const std::map<std::string, std::vector<double>>& max_scores) {
  std::map<std::string, double> out;
  for (const auto& [model, v] : max_scores) {
    if (v.size() < 2) throw ParameterError("subject_dispersion: model '" + model + "' has fewer than 2 subjects");
    out[model] = sample_sd(v);
  }
  return out;
}

json RunLabel::to_json() const {
  return {{"model", model}, {"size", size}, {"context", context}, {"subject", subject}};
}

RunLabel RunLabel::from_json(const json& j) {
  RunLabel l;
  if (j.is_null()) return l;
  l.model = j.value("model", std::string{});
  l.size = j.value("size", 0.0);
  l.context = j.value("context", 0.0);
  l.subject = j.value("subject", std::string{});
  return l;
}

std::string curve_to_csv(const AlignmentCurve& c) {
  std::string out = "time_s,score";
  for (Eigen::Index k = 0; k < c.fold_scores.rows(); ++k) out += ",fold_" + std::to_string(k);
  out += "\n";
  for (std::size_t t = 0; t < c.times.size(); ++t) {
    out += fmt_double(c.times[t]) + "," + fmt_double(c.scores[t]);
    for (Eigen::Index k = 0; k < c.fold_scores.rows(); ++k)
      out += "," + fmt_double(c.fold_scores(k, static_cast<Eigen::Index>(t)));
    out += "\n";
  }
  return out;
}

AlignmentCurve curve_from_csv(std::string_view text, double depth) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw FormatError("curve csv: empty");
  const auto header = split(lines.front(), ',');
  if (header.size() < 2 || header[0] != "time_s" || header[1] != "score") throw FormatError("curve csv: bad header");
  const auto n_folds = static_cast<Eigen::Index>(header.size() - 2);
  AlignmentCurve c;
  c.layer_depth = depth;
  c.fold_scores.resize(n_folds, static_cast<Eigen::Index>(lines.size() - 1));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != header.size()) throw FormatError("curve csv: ragged row " + std::to_string(i));
    c.times.push_back(parse_double(cells[0]));
    c.scores.push_back(parse_double(cells[1]));
    for (Eigen::Index k = 0; k < n_folds; ++k)
      c.fold_scores(k, static_cast<Eigen::Index>(i - 1)) = parse_double(cells[static_cast<std::size_t>(k) + 2]);
  }
  c.skipped_dims.assign(c.times.size(), 0);
  return c;
}

void write_alignment_outputs(const std::filesystem::path& dir, const std::vector<AlignmentCurve>& curves,
                             const RunLabel& label, const json& extra) {
  json layers = json::array();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const auto file = "curve_" + std::to_string(i) + ".csv";
    write_file(dir / file, curve_to_csv(c));
    std::size_t skipped = 0;
    for (auto s : c.skipped_dims) skipped += s;
    layers.push_back({{"depth", c.layer_depth},
                      {"file", file},
                      {"max_score", c.max_score()},
                      {"argmax_time", c.argmax_time()},
                      {"skipped_dims", skipped},
                      {"skipped_dims_per_time", c.skipped_dims}});
  }
  double best = -1.0;
  for (const auto& c : curves) best = std::max(best, c.max_score());
  json summary = {{"layers", layers}, {"max_alignment", best}, {"label", label.to_json()}};
  for (const auto& [k, v] : extra.items()) summary[k] = v;
  write_file(dir / "summary.json", summary.dump(1) + "\n");
}

std::vector<AlignmentCurve> read_alignment_outputs(const std::filesystem::path& dir) {
  json summary;
  try {
    summary = json::parse(read_file(dir / "summary.json"));
  } catch (const json::exception& e) {
    throw FormatError((dir / "summary.json").string() + ": " + e.what());
  }
  std::vector<AlignmentCurve> out;
  try {
    for (const auto& l : summary.at("layers")) {
      auto c = curve_from_csv(read_file(dir / l.at("file").get<std::string>()), l.at("depth").get<double>());
      if (l.contains("skipped_dims_per_time")) {
        auto sk = l.at("skipped_dims_per_time").get<std::vector<std::size_t>>();
        if (sk.size() == c.times.size()) c.skipped_dims = std::move(sk);
      }
      out.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ValidationError((dir / "summary.json").string() + ": " + e.what());
  }
  return out;
}

RunLabel read_alignment_label(const std::filesystem::path& dir) {
  try {
    const auto summary = json::parse(read_file(dir / "summary.json"));
    return RunLabel::from_json(summary.value("label", json()));
  } catch (const json::exception& e) {
    throw FormatError((dir / "summary.json").string() + ": " + e.what());
  }
}

json correlation_to_json(const CorrelationStat& s) {
  return {{"r", s.r},
          {"n", s.n},
          {"p", s.p_value},
          {"perfect_fit", s.perfect_fit},
          {"slope", s.slope},
          {"intercept", s.intercept},
          {"stderr", s.stderr_residual},
          {"slope_stderr", s.slope_stderr},
          {"intercept_stderr", s.intercept_stderr},
          {"x_mean", s.x_mean},
          {"x_ss", s.x_ss}};
}

json temporal_to_json(const TemporalResult& r) {
  json tm = json::array();
  for (const auto& [d, t] : r.per_layer_tmax) tm.push_back({{"depth", d}, {"t_max", t}});
  auto j = correlation_to_json(r.stat);
  j["per_layer_tmax"] = tm;
  return j;
}

TemporalResult temporal_from_json(const json& j) {
  TemporalResult r;
  try {
    for (const auto& e : j.at("per_layer_tmax")) r.per_layer_tmax[e.at("depth").get<double>()] = e.at("t_max").get<double>();
    auto& s = r.stat;
    s.r = j.at("r").get<double>();
    s.n = j.at("n").get<std::size_t>();
    s.p_value = j.at("p").get<double>();
    s.perfect_fit = j.value("perfect_fit", false);
    s.slope = j.at("slope").get<double>();
    s.intercept = j.at("intercept").get<double>();
    s.stderr_residual = j.at("stderr").get<double>();
    s.slope_stderr = j.value("slope_stderr", 0.0);
    s.intercept_stderr = j.value("intercept_stderr", 0.0);
    s.x_mean = j.value("x_mean", 0.0);
    s.x_ss = j.value("x_ss", 0.0);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("temporal json: ") + e.what());
  }
  return r;
}

std::string temporal_band_csv(const TemporalResult& r) {
  std::vector<double> depths;
  for (const auto& [d, _] : r.per_layer_tmax) depths.push_back(d);
  const auto band = confidence_band(r.stat, depths);
  std::string out = "depth,t_max,fit,ci_lower,ci_upper\n";
  std::size_t i = 0;
  for (const auto& [d, t] : r.per_layer_tmax) {
    out += fmt_double(d) + "," + fmt_double(t) + "," + fmt_double(band[i].fit) + "," + fmt_double(band[i].lower) +
           "," + fmt_double(band[i].upper) + "\n";
    ++i;
  }
  return out;
}

RunSummary load_run_summary(const std::filesystem::path& run_dir) {
  RunSummary s;
  s.run = run_dir.filename().string();
  const auto align_dir = run_dir / "align";
  s.label = read_alignment_label(align_dir);
  json summary, temporal;
  try {
    summary = json::parse(read_file(align_dir / "summary.json"));
    temporal = json::parse(read_file(run_dir / "temporal.json"));
    s.max_alignment = summary.at("max_alignment").get<double>();
    s.temporal_r = temporal.at("r").get<double>();
    s.p_value = temporal.at("p").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(run_dir.string() + ": " + e.what());
  }
  return s;
}

std::string summary_csv(const std::vector<RunSummary>& rows) {
  std::string out = "run,model,size,context,subject,temporal_r,p,max_alignment\n";
  for (const auto& r : rows) {
    for (const auto& field : {r.run, r.label.model, r.label.subject})
      if (field.find(',') != std::string::npos) throw ValidationError("summary csv: comma in label '" + field + "'");
    out += r.run + "," + r.label.model + "," + fmt_double(r.label.size) + "," + fmt_double(r.label.context) + "," +
           r.label.subject + "," + fmt_double(r.temporal_r) + "," + fmt_double(r.p_value) + "," +
           fmt_double(r.max_alignment) + "\n";
  }
  return out;
}

std::vector<RunSummary> parse_summary_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front() != "run,model,size,context,subject,temporal_r,p,max_alignment")
    throw FormatError("summary csv: bad header");
  std::vector<RunSummary> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto c = split(lines[i], ',');
    if (c.size() != 8) throw FormatError("summary csv: row " + std::to_string(i) + " has " + std::to_string(c.size()) + " cells");
    RunSummary r;
    r.run = std::string(c[0]);
    r.label.model = std::string(c[1]);
    r.label.size = parse_double(c[2]);
    r.label.context = parse_double(c[3]);
    r.label.subject = std::string(c[4]);
    r.temporal_r = parse_double(c[5]);
    r.p_value = parse_double(c[6]);
    r.max_alignment = parse_double(c[7]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::filesystem::path> out;
  if (rc == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw DataError("glob failed for '" + pattern + "'");
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tempalign
