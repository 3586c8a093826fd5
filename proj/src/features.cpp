// src/features.cpp

// Copyright 2026  The textmdd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "mdd/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>

#include "mdd/error.hpp"
#include "mdd/le_io.hpp"

namespace mdd {

namespace {

constexpr char kCacheMagic[4] = {'M', 'D', 'D', 'F'};
constexpr std::uint32_t kCacheVersion = 1;

double MelScale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

// FFTW planning is not thread-safe; execution with new-array calls is.
std::mutex &PlanMutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(PlanMutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(PlanMutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  double *input() { return in_; }
  /// |X_k|^2 for k = 0..n/2.
  void power(std::vector<double> &out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double *in_;
  fftw_complex *out_;
  fftw_plan plan_;
};

// Triangular filters on the mel axis, one weight row per bin over the
// fft_size / 2 + 1 spectrum points.
std::vector<std::vector<double>> MelFilters(int sample_rate, std::size_t fft_size, const FbankConfig &cfg) {
  const double nyquist = sample_rate / 2.0;
  const double high = cfg.high_hz > 0 ? cfg.high_hz : nyquist;
  if (cfg.low_hz < 0 || high > nyquist || cfg.low_hz >= high) throw DataError("fbank: bad mel frequency range");
  const double mel_low = MelScale(cfg.low_hz), mel_high = MelScale(high);
  const double step = (mel_high - mel_low) / (cfg.num_bins + 1);
  std::vector<std::vector<double>> filters(static_cast<std::size_t>(cfg.num_bins),
                                           std::vector<double>(fft_size / 2 + 1, 0.0));
  for (int b = 0; b < cfg.num_bins; ++b) {
    const double left = mel_low + b * step, center = left + step, right = center + step;
    for (std::size_t k = 0; k <= fft_size / 2; ++k) {
      const double mel = MelScale(static_cast<double>(k) * sample_rate / static_cast<double>(fft_size));
      if (mel > left && mel < right)
        filters[static_cast<std::size_t>(b)][k] = mel <= center ? (mel - left) / step : (right - mel) / step;
    }
  }
  return filters;
}

}  // namespace

FrameGeometry GeometryFor(int sample_rate, const FbankConfig &cfg) {
  if (sample_rate != 8000 && sample_rate != 16000)
    throw DataError("fbank: unsupported sample rate " + std::to_string(sample_rate));
  FrameGeometry g;
  g.window = static_cast<std::size_t>(std::lround(sample_rate * cfg.window_ms / 1000.0));
  g.shift = static_cast<std::size_t>(std::lround(sample_rate * cfg.shift_ms / 1000.0));
  if (g.window == 0 || g.shift == 0) throw DataError("fbank: window and shift must be positive");
  g.fft_size = 1;
  while (g.fft_size < g.window) g.fft_size <<= 1;
  return g;
}

FeatureMatrix compute_fbank(const Waveform &wave, const FbankConfig &cfg) {
  if (cfg.num_bins <= 0 || !(cfg.log_floor > 0)) throw DataError("fbank: bad configuration");
  const FrameGeometry g = GeometryFor(wave.sample_rate, cfg);
  const std::size_t frames = g.num_frames(wave.samples.size());
  if (frames == 0)
    throw DataError("fbank: waveform of " + std::to_string(wave.samples.size()) +
                    " samples is shorter than one window (" + std::to_string(g.window) + ")");

  const auto filters = MelFilters(wave.sample_rate, g.fft_size, cfg);
  std::vector<double> hamming(g.window);
  for (std::size_t n = 0; n < g.window; ++n)
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                        static_cast<double>(g.window - 1));

  FeatureMatrix f;
  f.frames = frames;
  f.dim = static_cast<std::size_t>(cfg.num_bins) + 1;
  f.frame_shift = cfg.shift_ms / 1000.0;
  f.values.assign(f.frames * f.dim, 0.0);

  RealFft fft(g.fft_size);
  std::vector<double> spectrum;
  for (std::size_t t = 0; t < frames; ++t) {
    const double *x = wave.samples.data() + t * g.shift;
    double energy = 0;
    double *in = fft.input();
    for (std::size_t n = 0; n < g.window; ++n) {
      energy += x[n] * x[n];
      in[n] = x[n] * hamming[n];
    }
    for (std::size_t n = g.window; n < g.fft_size; ++n) in[n] = 0.0;
    fft.power(spectrum);
    for (std::size_t b = 0; b < filters.size(); ++b) {
      double e = 0;
      for (std::size_t k = 0; k < spectrum.size(); ++k) e += filters[b][k] * spectrum[k];
      f.at(t, b) = std::log(std::max(e, cfg.log_floor));
    }
    f.at(t, f.dim - 1) = std::log(std::max(energy, cfg.log_floor));
  }
  for (double v : f.values)
    if (!std::isfinite(v)) throw NumericError("fbank: non-finite feature value");
  return f;
}

FeatureMatrix stack_frames(const FeatureMatrix &f) {
  if (f.dim != kFbankDim)
    throw DataError("stack_frames: expected dim " + std::to_string(kFbankDim) + ", got " + std::to_string(f.dim));
  if (f.frames == 0) throw DataError("stack_frames: empty feature matrix");
  FeatureMatrix out;
  out.frames = f.frames;
  out.dim = 3 * f.dim;
  out.frame_shift = f.frame_shift;
  out.values.resize(out.frames * out.dim);
  for (std::size_t t = 0; t < f.frames; ++t) {
    const std::size_t src[3] = {t == 0 ? 0 : t - 1, t, t + 1 < f.frames ? t + 1 : t};
    for (std::size_t j = 0; j < 3; ++j)
      std::copy_n(f.values.begin() + static_cast<long>(src[j] * f.dim), f.dim,
                  out.values.begin() + static_cast<long>(t * out.dim + j * f.dim));
  }
  return out;
}

void FeatureNorm::apply(FeatureMatrix &f) const {
  if (empty()) return;
  if (mean.size() != f.dim || stddev.size() != f.dim)
    throw DataError("feature norm has dim " + std::to_string(mean.size()) + ", features have " + std::to_string(f.dim));
  for (std::size_t t = 0; t < f.frames; ++t)
    for (std::size_t d = 0; d < f.dim; ++d) f.at(t, d) = (f.at(t, d) - mean[d]) / stddev[d];
}

FeatureNorm ComputeNorm(const std::vector<const FeatureMatrix *> &mats) {
  if (mats.empty()) throw DataError("feature norm: no matrices");
  const std::size_t dim = mats.front()->dim;
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  std::size_t n = 0;
  for (const auto *m : mats) {
    if (m->dim != dim) throw DataError("feature norm: mixed dims");
    for (std::size_t t = 0; t < m->frames; ++t)
      for (std::size_t d = 0; d < dim; ++d) {
        sum[d] += m->at(t, d);
        sq[d] += m->at(t, d) * m->at(t, d);
      }
    n += m->frames;
  }
  if (n == 0) throw DataError("feature norm: no frames");
  FeatureNorm norm;
  norm.mean.resize(dim);
  norm.stddev.resize(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    norm.mean[d] = sum[d] / static_cast<double>(n);
    const double var = std::max(sq[d] / static_cast<double>(n) - norm.mean[d] * norm.mean[d], 0.0);
    norm.stddev[d] = std::max(std::sqrt(var), 1e-5);
  }
  return norm;
}

void WriteFeatureCache(const std::string &path, const FeatureMatrix &f) {
  le::Writer w;
  w.bytes(kCacheMagic, 4);
  w.u32(kCacheVersion);
  w.u32(static_cast<std::uint32_t>(f.frames));
  w.u32(static_cast<std::uint32_t>(f.dim));
  w.f32(static_cast<float>(f.frame_shift));
  for (double v : f.values) w.f32(static_cast<float>(v));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature cache " + path);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
}

FeatureMatrix ReadFeatureCache(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature cache " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  le::Reader r(bytes.data(), bytes.size());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCacheMagic, 4) != 0) throw DataError(path + ": not a feature cache");
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion) throw DataError(path + ": unsupported feature cache version " + std::to_string(version));
  FeatureMatrix f;
  f.frames = r.u32();
  f.dim = r.u32();
  f.frame_shift = r.f32();
  if (r.remaining() != f.frames * f.dim * 4) throw DataError(path + ": feature cache size mismatch");
  f.values.resize(f.frames * f.dim);
  for (auto &v : f.values) {
    v = r.f32();
    if (!std::isfinite(v)) throw DataError(path + ": non-finite value in feature cache");
  }
  return f;
}

void RoundToFloat(FeatureMatrix &f) {
  for (auto &v : f.values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace mdd
