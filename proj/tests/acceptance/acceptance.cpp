// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "tempalign/config.hpp"
#include "tempalign/errors.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/pca.hpp"
#include "tempalign/pipeline.hpp"
#include "tempalign/preproc.hpp"
#include "tempalign/ridge.hpp"
#include "tempalign/synth.hpp"
#include "tempalign/temporal.hpp"
#include "tmpdir.hpp"

using namespace tempalign;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome planted_recovery(unsigned threads) {
  const auto res = run_selftest(default_synth_spec(0), threads);
  const auto& s = res.temporal.stat;
  const bool ok = s.r >= 0.95 && s.p_value < 1e-3 && res.seconds < 60.0;
  return {ok, fmt("r=%.4f (>=0.95), p=%.2e (<1e-3), %.1f s on %u thread(s) of %u available core(s) (<60 s)", s.r,
                  s.p_value, res.seconds, threads, std::max(1u, std::thread::hardware_concurrency()))};
}

Outcome null_control(unsigned threads) {
  int significant = 0;
  double worst_fraction = 1.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto spec = default_synth_spec(seed);
    spec.null_activations = true;
    const auto res = run_selftest(spec, threads);
    const double w_test = static_cast<double>(spec.n_words) / 5.0;
    const double bound = 3.0 / std::sqrt(w_test);
    std::size_t inside = 0, total = 0;
    for (const auto& c : res.curves)
      for (double v : c.scores) {
        inside += std::abs(v) < bound;
        ++total;
      }
    worst_fraction = std::min(worst_fraction, static_cast<double>(inside) / static_cast<double>(total));
    if (res.temporal.stat.p_value <= 0.05) ++significant;
    per_seed += fmt("%s%.2f", seed == 1 ? "" : ",", res.temporal.stat.p_value);
  }
  const bool ok = worst_fraction >= 0.95 && significant <= 1;
  return {ok, fmt("min fraction of |score|<3/sqrt(W_test) = %.4f (>=0.95 every seed); p>0.05 in %d/10 seeds (>=9); "
                  "p by seed [%s]",
                  worst_fraction, 10 - significant, per_seed.c_str())};
}

struct Instance {
  Eigen::MatrixXd x, y;
};

Instance random_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> nd(10, 30), sd(1, 8), dd(1, 5);
  const int n = nd(gen), s = sd(gen), d = dd(gen);
  Instance in;
  in.x = oracle::random_matrix(gen, n, s);
  in.y = in.x * oracle::random_matrix(gen, s, d) + oracle::random_matrix(gen, n, d);
  return in;
}

Outcome ridge_loo() {
  std::mt19937_64 gen(20240601);
  const AlphaGrid grid;
  double worst = 0.0;
  int alpha_mismatch = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const auto in = random_instance(gen);
    const auto e = loo_errors(in.x, in.y, grid);
    const auto model = fit_ridge(in.x, in.y, grid);
    std::vector<Eigen::VectorXd> brute;
    for (double a : grid.values()) brute.push_back(oracle::brute_loo(in.x, in.y, a));
    for (Eigen::Index j = 0; j < in.y.cols(); ++j) {
      std::size_t best = 0;
      for (std::size_t a = 0; a < grid.size(); ++a) {
        worst = std::max(worst, oracle::relative_error(e(j, static_cast<Eigen::Index>(a)), brute[a](j)));
        if (brute[a](j) < brute[best](j)) best = a;
      }
      if (model.chosen_alpha(j) != grid[best]) ++alpha_mismatch;
    }
  }
  return {worst < 1e-8 && alpha_mismatch == 0,
          fmt("50 instances (n<=30, S<=8, D<=5): max relative error %.2e (<1e-8); chosen-alpha mismatches %d", worst,
              alpha_mismatch)};
}

Outcome ridge_svd_path() {
  std::mt19937_64 gen(20240602);
  const AlphaGrid grid;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto in = random_instance(gen);
    const RidgeCV cv(in.x, grid);
    for (double a : grid.values()) {
      const auto got = cv.fit_fixed(in.y, a);
      const auto want = oracle::dense_ridge(in.x, in.y, a);
      worst = std::max(worst, (got.weights - want.weights).norm() / want.weights.norm());
    }
  }
  return {worst < 1e-8, fmt("20 instances x 13 alphas: max relative weight error %.2e (<1e-8)", worst)};
}

Outcome pca_oracle() {
  std::mt19937_64 gen(20240603);
  std::uniform_int_distribution<int> wd(20, 200), dd(2, 12);
  double worst_ev = 0.0, worst_cov = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int w = wd(gen), d = dd(gen);
    const Eigen::MatrixXd x = oracle::random_matrix(gen, w, d) * oracle::random_matrix(gen, d, d);
    const auto model = fit_pca(x, d);
    const auto eig = oracle::covariance_eigenvalues(x);
    worst_ev = std::max(worst_ev, (model.explained_variance - eig).cwiseAbs().maxCoeff());
    Eigen::MatrixXd cov = oracle::sample_covariance(transform(model, x));
    cov.diagonal().setZero();
    worst_cov = std::max(worst_cov, cov.cwiseAbs().maxCoeff());
  }
  return {worst_ev < 1e-8 && worst_cov < 1e-8,
          fmt("20 matrices: max |explained_variance - eig| %.2e (<1e-8); max off-diagonal covariance %.2e (<1e-8)",
              worst_ev, worst_cov)};
}

Outcome pvalue_oracle() {
  std::vector<double> rs;
  for (int i = 1; i <= 9; ++i) rs.push_back(0.1 * i);
  rs.push_back(0.95);
  rs.push_back(0.99);
  double worst = 0.0;
  for (double r : rs)
    for (int n = 4; n <= 30; ++n)
      worst = std::max(worst, std::abs(pearson_p(r, static_cast<std::size_t>(n)).value - oracle::pearson_p_quadrature(r, n)));
  const double p96 = pearson_p(0.96, 9).value, p44 = pearson_p(0.44, 9).value;
  const bool ok = worst < 1e-6 && p96 < 1e-4 && p44 > 0.05;
  return {ok, fmt("grid r in {0.1..0.9,0.95,0.99} x n in 4..30: max |p - quadrature| %.2e (<1e-6); "
                  "n=9 r=0.96 -> p=%.2e (<1e-4); n=9 r=0.44 -> p=%.3f (>0.05)",
                  worst, p96, p44)};
}

Outcome tmax_rules() {
  std::vector<double> t(16);
  for (std::size_t i = 0; i < 16; ++i) t[i] = -0.5 + 0.1 * static_cast<double>(i);
  std::vector<double> single(16, 0.1);
  single[9] = 1.0;
  single[8] = 0.94;
  std::vector<double> plateau(16, 0.0);
  for (std::size_t i = 7; i <= 11; ++i) plateau[i] = 0.3;
  std::vector<double> pair(16, 0.0);
  pair[6] = pair[10] = 0.5;
  const double a = t_max(t, single), b = t_max(t, plateau), c = t_max(t, pair);
  const bool rules = std::abs(a - 0.4) < 1e-12 && std::abs(b - 0.4) < 1e-12 && std::abs(c - 0.3) < 1e-12;

  std::mt19937_64 gen(20240604);
  std::normal_distribution<double> nd;
  std::vector<double> tt(166);
  for (std::size_t i = 0; i < 166; ++i) tt[i] = -2.5 + static_cast<double>(i) / 30.0;
  int violations = 0, checks = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> s(166);
    const double centre = -1.0 + 2.0 * std::uniform_real_distribution<double>()(gen);
    for (std::size_t i = 0; i < 166; ++i) s[i] = std::exp(-0.5 * std::pow((tt[i] - centre) / 0.15, 2)) + 0.05 * nd(gen);
    const double base = t_max(tt, s);
    for (double k : {1e-3, 0.5, 2.0, 7.25, 1e4}) {
      std::vector<double> sc(s);
      for (auto& v : sc) v *= k;
      violations += t_max(tt, sc) != base;
      ++checks;
    }
  }
  return {rules && violations == 0,
          fmt("singleton %.3f (0.4), plateau %.15g (0.4), disjoint union %.15g (0.3); rescaling invariance exact in "
              "%d/%d checks",
              a, b, c, checks - violations, checks)};
}

Outcome filter_contract() {
  struct Case {
    double low, high, fs;
  };
  const std::vector<Case> cases{{0.1, 20, 300}, {0.1, 20, 600}, {0.1, 20, 1200}, {1.0, 40, 1000}, {0.5, 10, 250}};
  double worst_pass = 0.0, worst_stop = 0.0;  // |dB| at centre, max gain in dB at the stop frequencies
  worst_stop = -1e9;
  for (const auto& c : cases) {
    const auto k = design_bandpass(c.low, c.high, c.fs);
    const double centre = 0.5 * (c.low + c.high);
    worst_pass = std::max(worst_pass, std::abs(oracle::db(oracle::dft_magnitude(k.taps, centre, c.fs))));
    for (double f : {c.low - k.low_transition, c.high + k.high_transition})
      worst_stop = std::max(worst_stop, oracle::db(oracle::dft_magnitude(k.taps, std::max(f, 0.0), c.fs)));
  }
  return {worst_pass <= 1.0 && worst_stop <= -40.0,
          fmt("5 designs, single-pass kernel DFT: worst centre gain deviation %.2e dB (<=1 dB); worst gain one "
              "transition width beyond a cutoff %.1f dB (<=-40 dB)",
              worst_pass, worst_stop)};
}

Outcome determinism() {
  TempDir dir("determinism");
  std::vector<std::string> hashes, output_hashes;
  std::string lines;
  auto one = [&](unsigned threads, const std::string& name, bool force) {
    auto cfg = parse_run_config(R"({"out": ")" + (dir / name).string() + R"(", "synth": {"seed": 0}})");
    cfg.threads = threads;
    const auto out = run_pipeline(cfg, force);
    hashes.push_back(out.manifest_hash);
    std::string all;
    for (const char* p : {"synth", "reduced", "align", "temporal.json", "temporal.csv"}) all += hash_path(cfg.out / p);
    output_hashes.push_back(sha256_hex(all));
  };
  one(1, "t1", false);
  one(2, "t2", false);
  one(8, "t8", false);
  one(1, "t1", true);  // second consecutive run, recomputed
  const bool ok = std::all_of(hashes.begin(), hashes.end(), [&](const auto& h) { return h == hashes[0]; }) &&
                  std::all_of(output_hashes.begin(), output_hashes.end(), [&](const auto& h) { return h == output_hashes[0]; });
  return {ok, fmt("synth+reduce+align+temporal at 1, 2, 8 threads and a forced rerun: %s (manifest %.12s...)",
                  ok ? "all artifacts bit-identical" : "artifacts differ", hashes[0].c_str())};
}

}  // namespace

int main() {
  const unsigned threads = resolve_threads(0);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"planted-latency recovery", [&] { return planted_recovery(threads); }},
      {"null control", [&] { return null_control(threads); }},
      {"ridge LOO oracle", ridge_loo},
      {"ridge SVD-path oracle", ridge_svd_path},
      {"PCA oracle", pca_oracle},
      {"p-value oracle", pvalue_oracle},
      {"T_max rule", tmax_rules},
      {"filter contract", filter_contract},
      {"determinism", determinism},
  };
  int passed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    passed += o.pass;
  }
  std::printf("%d/%zu criteria passed\n", passed, criteria.size());
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
