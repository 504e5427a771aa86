#include "tempalign/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "tempalign/errors.hpp"
#include "tempalign/parallel.hpp"

namespace tempalign {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

double hamming(std::size_t n, std::size_t len) {
  if (len == 1) return 1.0;
  return 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(len - 1));
}

// Windowed ideal low-pass with cutoff `fc` in cycles/sample (0 < fc <= 0.5).
std::vector<double> windowed_lowpass(double fc, std::size_t len) {
  // Built from the centre outwards and mirrored, so the taps are exactly symmetric.
  std::vector<double> h(len);
  const std::size_t mid = (len - 1) / 2;
  for (std::size_t k = 0; k <= mid; ++k) {
    const double v = 2.0 * fc * sinc(2.0 * fc * static_cast<double>(k)) * hamming(mid + k, len);
    h[mid + k] = h[mid - k] = v;
  }
  return h;
}

std::complex<double> dtft(const std::vector<double>& taps, double cycles_per_sample) {
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < taps.size(); ++n)
    acc += taps[n] * std::polar(1.0, -2.0 * kPi * cycles_per_sample * static_cast<double>(n));
  return acc;
}

// Mirror about the edge samples without repeating them (numpy 'reflect').
std::size_t reflect_index(long i, long n) {
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - m);
}

// Point reflection through the edge samples: keeps a signal's local slope
// across the boundary, so tones resample without edge transients.
double odd_extension(const Eigen::Ref<const Eigen::RowVectorXd>& row, long i, long n) {
  if (i < 0) return 2.0 * row[0] - row[reflect_index(i, n)];
  if (i >= n) return 2.0 * row[n - 1] - row[reflect_index(i, n)];
  return row[i];
}

std::size_t fast_fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

// FFTW's planner is not reentrant; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class RealFftPair {
 public:
  explicit RealFftPair(std::size_t n) : n_(n) {
    auto in = fftw_alloc<double>(n);
    auto out = fftw_alloc<fftw_complex>(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), out.get(), in.get(), FFTW_ESTIMATE);
    if (!forward_ || !backward_) throw InvariantError("fftw: plan creation failed");
  }
  ~RealFftPair() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  RealFftPair(const RealFftPair&) = delete;
  RealFftPair& operator=(const RealFftPair&) = delete;

  std::size_t size() const noexcept { return n_; }
  void forward(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(forward_, in, out); }
  void backward(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(backward_, in, out); }

 private:
  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

void check_recording(const ContinuousRecording& rec) {
  if (rec.n_sensors() == 0 || rec.n_samples() == 0) throw ParameterError("recording must have sensors and samples");
  if (!(rec.sample_rate > 0.0)) throw ParameterError("recording sample_rate must be positive");
}

}  // namespace

FirKernel design_bandpass(double low, double high, double sample_rate) {
  if (!(sample_rate > 0.0)) throw ParameterError("bandpass: sample_rate must be positive");
  const double nyquist = sample_rate / 2.0;
  if (!(low > 0.0 && low < high && high < nyquist))
    throw ParameterError("bandpass: need 0 < low < high < sample_rate / 2");

  FirKernel k;
  k.sample_rate = sample_rate;
  k.low = low;
  k.high = high;
  k.low_transition = std::min(low, 2.0);
  k.high_transition = std::min(5.0, nyquist - high);
  // Hamming main-lobe transition is ~3.3 / N cycles per sample.
  auto len = static_cast<std::size_t>(
      std::ceil(3.3 * sample_rate / std::min(k.low_transition, k.high_transition)));
  if (len % 2 == 0) ++len;

  const double f_lo = (low - k.low_transition / 2.0) / sample_rate;
  const double f_hi = (high + k.high_transition / 2.0) / sample_rate;
  const auto lp_hi = windowed_lowpass(f_hi, len);
  const auto lp_lo = windowed_lowpass(f_lo, len);
  k.taps.resize(len);
  for (std::size_t n = 0; n < len; ++n) k.taps[n] = lp_hi[n] - lp_lo[n];

  // Unit gain at the band centre.
  const double centre = (low + high) / 2.0 / sample_rate;
  const double g = std::abs(dtft(k.taps, centre));
  for (auto& t : k.taps) t /= g;
  return k;
}

double kernel_gain(const FirKernel& k, double freq) { return std::abs(dtft(k.taps, freq / k.sample_rate)); }

double zero_phase_gain(const FirKernel& k, double freq) {
  const double g = kernel_gain(k, freq);
  return g * g;
}

ContinuousRecording bandpass(const ContinuousRecording& rec, double low, double high, unsigned threads) {
  check_recording(rec);
  const auto kernel = design_bandpass(low, high, rec.sample_rate);
  const auto n = static_cast<long>(rec.n_samples());
  const auto klen = static_cast<long>(kernel.length());
  if (n < 3 * klen)
    throw TooShortError("bandpass: " + std::to_string(n) + " samples is shorter than 3 x kernel length (" +
                        std::to_string(klen) + ")");

  // Forward then backward application of the symmetric kernel h is convolution
  // with h * reverse(h), whose spectrum is |H|^2: zero phase, applied in one
  // frequency-domain product. Padding of klen per side absorbs the +-(klen-1)
  // support, so the circular product never wraps into the kept region.
  const long pad = klen;
  const long padded = n + 2 * pad;
  const auto fft_len = fast_fft_size(static_cast<std::size_t>(padded));
  const RealFftPair fft(fft_len);
  const std::size_t bins = fft_len / 2 + 1;

  std::vector<double> response(bins);
  {
    auto buf = fftw_alloc<double>(fft_len);
    auto spec = fftw_alloc<fftw_complex>(bins);
    std::fill(buf.get(), buf.get() + fft_len, 0.0);
    std::copy(kernel.taps.begin(), kernel.taps.end(), buf.get());
    fft.forward(buf.get(), spec.get());
    for (std::size_t b = 0; b < bins; ++b)
      response[b] = (spec[b][0] * spec[b][0] + spec[b][1] * spec[b][1]) / static_cast<double>(fft_len);
  }

  ContinuousRecording out{RowMatrix(rec.data.rows(), rec.data.cols()), rec.sample_rate};
  parallel_for(rec.n_sensors(), threads, [&](std::size_t s) {
    auto buf = fftw_alloc<double>(fft_len);
    auto spec = fftw_alloc<fftw_complex>(bins);
    std::fill(buf.get(), buf.get() + fft_len, 0.0);
    for (long i = 0; i < padded; ++i) buf[i] = rec.data(s, reflect_index(i - pad, n));
    fft.forward(buf.get(), spec.get());
    for (std::size_t b = 0; b < bins; ++b) {
      spec[b][0] *= response[b];
      spec[b][1] *= response[b];
    }
    fft.backward(spec.get(), buf.get());
    for (long i = 0; i < n; ++i) out.data(s, i) = buf[i + pad];
  });
  return out;
}

Ratio rational_ratio(double target_rate, double source_rate) {
  if (!(target_rate > 0.0 && source_rate > 0.0)) throw ParameterError("resample: rates must be positive");
  const double x = target_rate / source_rate;
  // Continued-fraction convergents up to a bounded denominator.
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double r = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double a = std::floor(r);
    const long ai = static_cast<long>(a);
    const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > 100000) break;
    p0 = p1, q0 = q1, p1 = p2, q1 = q2;
    if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) <= 1e-12 * x) break;
    const double frac = r - a;
    if (frac < 1e-15) break;
    r = 1.0 / frac;
  }
  if (q1 == 0 || std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) > 1e-9 * x)
    throw ParameterError("resample: rate ratio has no small rational form");
  const long g = std::gcd(p1, q1);
  return {p1 / g, q1 / g};
}

ContinuousRecording resample(const ContinuousRecording& rec, double target_rate, unsigned threads) {
  check_recording(rec);
  if (!(target_rate < rec.sample_rate))
    throw ParameterError("resample: target rate must be below the source rate");
  const auto [up, down] = rational_ratio(target_rate, rec.sample_rate);
  const long n_in = static_cast<long>(rec.n_samples());
  const auto n_out = static_cast<long>(std::llround(static_cast<double>(n_in) * static_cast<double>(up) /
                                                    static_cast<double>(down)));
  if (n_out < 1) throw TooShortError("resample: fewer than one output sample");

  // Anti-imaging / anti-aliasing kernel at the upsampled rate.
  const long factor = std::max(up, down);
  const long half = 10 * factor;
  auto h = windowed_lowpass(0.5 / static_cast<double>(factor), static_cast<std::size_t>(2 * half + 1));
  for (auto& v : h) v *= static_cast<double>(up);

  ContinuousRecording out{RowMatrix(rec.data.rows(), n_out), target_rate};
  parallel_for(rec.n_sensors(), threads, [&](std::size_t s) {
    for (long j = 0; j < n_out; ++j) {
      // Upsampled position of output j is j*down; taps k contribute where
      // (j*down - (k - half)) is a multiple of `up`.
      const long centre = j * down;
      long k0 = (centre + half) % up;
      double acc = 0.0;
      for (long k = k0; k <= 2 * half; k += up) {
        const long m = centre + half - k;  // multiple of up
        acc += h[static_cast<std::size_t>(k)] * odd_extension(rec.data.row(s), m / up, n_in);
      }
      out.data(s, j) = acc;
    }
  });
  return out;
}

std::size_t epoch_length(double tmin, double tmax, double sample_rate) {
  return static_cast<std::size_t>(std::llround((tmax - tmin) * sample_rate)) + 1;
}

EpochResult epoch(const ContinuousRecording& rec, const std::vector<double>& onsets, double tmin, double tmax) {
  check_recording(rec);
  if (!(tmin < 0.0 && 0.0 < tmax)) throw ParameterError("epoch: need tmin < 0 < tmax");
  const double rate = rec.sample_rate;
  const auto n_times = epoch_length(tmin, tmax, rate);
  const auto n_samples = static_cast<long>(rec.n_samples());
  const auto n_sensors = rec.n_sensors();

  EpochResult res;
  std::vector<double> data;
  for (std::size_t w = 0; w < onsets.size(); ++w) {
    const long start = std::lround((onsets[w] + tmin) * rate);
    const long stop = start + static_cast<long>(n_times);  // exclusive
    if (start < 0 || stop > n_samples) {
      res.dropped.push_back(w);
      continue;
    }
    res.kept.push_back(w);
    for (std::size_t s = 0; s < n_sensors; ++s)
      for (std::size_t k = 0; k < n_times; ++k) data.push_back(rec.data(s, start + static_cast<long>(k)));
  }
  if (res.kept.empty()) throw EmptySelectionError("epoch: every word window leaves the recording");
  res.epochs = EpochTensor(res.kept.size(), n_sensors, make_time_axis(tmin, rate, n_times), rate, std::move(data));
  return res;
}

ZScoreResult zscore(const EpochTensor& epochs) {
  const auto W = epochs.n_words(), S = epochs.n_sensors(), T = epochs.n_times();
  if (W < 2) throw ParameterError("zscore: need at least 2 words");
  const auto& in = epochs.data();
  std::vector<double> out(in.size());
  ZScoreResult res;
  const auto stride = S * T;
  for (std::size_t cell = 0; cell < stride; ++cell) {
    double mean = 0.0;
    for (std::size_t w = 0; w < W; ++w) mean += in[w * stride + cell];
    mean /= static_cast<double>(W);
    double ss = 0.0;
    for (std::size_t w = 0; w < W; ++w) {
      const double d = in[w * stride + cell] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(W));
    if (sd < 1e-12) {
      res.degenerate_cells.push_back(cell);
      for (std::size_t w = 0; w < W; ++w) out[w * stride + cell] = 0.0;
    } else {
      for (std::size_t w = 0; w < W; ++w) out[w * stride + cell] = (in[w * stride + cell] - mean) / sd;
    }
  }
  res.epochs = epochs.with_data(std::move(out));
  return res;
}

}  // namespace tempalign
