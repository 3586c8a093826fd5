// tests/test_features.cpp

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

#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "mdd/error.hpp"
#include "mdd/features.hpp"
#include "test_util.hpp"

using namespace mdd;

namespace {

// Independent mel arithmetic (HTK convention) for the band-center oracle.
double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double CenterHz(int band, int rate, int bins = 80, double low = 20.0) {
  const double lo = HzToMel(low), hi = HzToMel(rate / 2.0);
  return MelToHz(lo + (band + 1) * (hi - lo) / (bins + 1));
}

Waveform Sine(double hz, double amp, int rate, double seconds) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<std::size_t>(seconds * rate);
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * i / rate));
  return w;
}

std::size_t ArgmaxBand(const FeatureMatrix &f, std::size_t t) {
  std::size_t best = 0;
  for (std::size_t b = 1; b + 1 < f.dim; ++b)
    if (f.at(t, b) > f.at(t, best)) best = b;
  return best;
}

}  // namespace

TEST_CASE("one second at 16 kHz gives 98 frames of 81 dims") {
  Waveform w = Sine(440, 0.3, 16000, 1.0);
  // floor((16000 - 400) / 160) + 1, computed independently
  std::size_t expected = 0;
  for (std::size_t start = 0; start + 400 <= 16000; start += 160) ++expected;
  const FeatureMatrix f = compute_fbank(w);
  CHECK(expected == 98);
  CHECK(f.frames == expected);
  CHECK(f.dim == kFbankDim);
  CHECK(f.frame_shift == doctest::Approx(0.01));
}

TEST_CASE("silence maps every entry to the log floor") {
  Waveform w;
  w.samples.assign(8000, 0.0);
  const FbankConfig cfg;
  const FeatureMatrix f = compute_fbank(w, cfg);
  for (double v : f.values) CHECK(v == std::log(cfg.log_floor));
}

TEST_CASE("sine at a mel-band center peaks in that band") {
  for (int rate : {16000, 8000}) {
    // The lowest bands are narrower than one FFT bin, so their triangles
    // cannot be resolved; start where the band spacing exceeds the FFT
    // resolution.
    const FrameGeometry g = GeometryFor(rate, {});
    const double bin_hz = static_cast<double>(rate) / g.fft_size;
    int checked = 0;
    for (int band = 0; band < 80; ++band) {
      const double spacing = CenterHz(band + 1, rate) - CenterHz(band, rate);
      if (band == 79 || spacing < bin_hz) continue;
      const FeatureMatrix f = compute_fbank(Sine(CenterHz(band, rate), 0.5, rate, 0.3));
      for (std::size_t t = 0; t < f.frames; ++t) CHECK(ArgmaxBand(f, t) == static_cast<std::size_t>(band));
      ++checked;
    }
    CHECK(checked >= 50);
  }
}

TEST_CASE("amplitude scaling shifts every log value by twice the log gain") {
  Rng rng(3);
  Waveform w;
  for (int i = 0; i < 4000; ++i) w.samples.push_back(rng.uniform(-0.3, 0.3));
  Waveform louder = w;
  for (double &s : louder.samples) s *= 3.0;
  const FeatureMatrix a = compute_fbank(w), b = compute_fbank(louder);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] - a.values[i] == doctest::Approx(2 * std::log(3.0)).epsilon(1e-6));
}

TEST_CASE("too-short waveform and bad rate are rejected") {
  Waveform w;
  w.samples.assign(100, 0.1);
  CHECK_THROWS_AS(compute_fbank(w), DataError);
  w.samples.assign(1000, 0.1);
  w.sample_rate = 22050;
  CHECK_THROWS_AS(compute_fbank(w), DataError);
}

TEST_CASE("8 kHz geometry") {
  const FrameGeometry g = GeometryFor(8000, {});
  CHECK(g.window == 200);
  CHECK(g.shift == 80);
  CHECK(g.fft_size == 256);
  CHECK(compute_fbank(Sine(300, 0.2, 8000, 1.0)).frames == (8000 - 200) / 80 + 1);
}

TEST_CASE("stacking keeps T, triples D and self-pads the edges") {
  Rng rng(5);
  FeatureMatrix f;
  f.frames = 10;
  f.dim = kFbankDim;
  for (std::size_t i = 0; i < f.frames * f.dim; ++i) f.values.push_back(rng.uniform());
  const FeatureMatrix s = stack_frames(f);
  CHECK(s.frames == 10);
  CHECK(s.dim == kStackedDim);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t d = 0; d < 81; ++d) {
      CHECK(s.at(t, 81 + d) == f.at(t, d));
      CHECK(s.at(t, d) == f.at(t == 0 ? 0 : t - 1, d));
      CHECK(s.at(t, 162 + d) == f.at(t == 9 ? 9 : t + 1, d));
    }

  FeatureMatrix one;
  one.frames = 1;
  one.dim = kFbankDim;
  for (std::size_t d = 0; d < 81; ++d) one.values.push_back(static_cast<double>(d));
  const FeatureMatrix s1 = stack_frames(one);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t d = 0; d < 81; ++d) CHECK(s1.at(0, j * 81 + d) == static_cast<double>(d));

  FeatureMatrix three = f;
  three.frames = 3;
  three.values.resize(3 * 81);
  const FeatureMatrix s3 = stack_frames(three);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t d = 0; d < 81; ++d) CHECK(s3.at(1, j * 81 + d) == three.at(j, d));

  FeatureMatrix wrong = f;
  wrong.dim = 80;
  CHECK_THROWS_AS(stack_frames(wrong), DataError);
}

TEST_CASE("normalization statistics") {
  FeatureMatrix a, b;
  a.frames = 2;
  b.frames = 1;
  a.dim = b.dim = 2;
  a.values = {1, 5, 3, 5};
  b.values = {5, 5};
  const FeatureNorm n = ComputeNorm({&a, &b});
  CHECK(n.mean[0] == doctest::Approx(3.0));
  CHECK(n.stddev[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(n.mean[1] == doctest::Approx(5.0));
  CHECK(n.stddev[1] > 0);  // floored, never zero
  FeatureMatrix c = a;
  n.apply(c);
  CHECK(c.at(0, 0) == doctest::Approx(-2.0 / std::sqrt(8.0 / 3.0)));
  CHECK(c.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("wav and feature cache round trips") {
  testing::ScratchDir dir("features");
  Waveform w = Sine(1000, 0.4, 16000, 0.2);
  WriteWav(dir / "a.wav", w);
  const Waveform back = ReadWav(dir / "a.wav");
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0 / 32768);

  FeatureMatrix f = compute_fbank(back);
  RoundToFloat(f);
  WriteFeatureCache(dir / "a.mddf", f);
  const FeatureMatrix g = ReadFeatureCache(dir / "a.mddf");
  CHECK(g.frames == f.frames);
  CHECK(g.dim == f.dim);
  CHECK(g.values == f.values);

  {
    std::ofstream out(dir / "bad.mddf", std::ios::binary);
    out << "MDDF";
  }
  CHECK_THROWS_AS(ReadFeatureCache(dir / "bad.mddf"), DataError);
  {
    std::ofstream out(dir / "bad.wav", std::ios::binary);
    out << "RIFX0000WAVE";
  }
  CHECK_THROWS_AS(ReadWav(dir / "bad.wav"), DataError);
  CHECK_THROWS_AS(ReadWav(dir / "missing.wav"), DataError);
}
