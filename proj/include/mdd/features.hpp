// include/mdd/features.hpp

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

#ifndef MDD_FEATURES_HPP_
#define MDD_FEATURES_HPP_

#include <string>
#include <vector>

namespace mdd {

/// Mono audio with samples in [-1, 1).
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
};

/// 16-bit little-endian PCM mono WAV. Throws DataError on anything else.
Waveform ReadWav(const std::string &path);
void WriteWav(const std::string &path, const Waveform &wave);

struct FbankConfig {
  double window_ms = 25.0;  // Hamming
  double shift_ms = 10.0;
  int num_bins = 80;
  double low_hz = 20.0;
  double high_hz = 0.0;  // 0 = Nyquist
  double log_floor = 1e-10;
};

inline constexpr std::size_t kFbankDim = 81;    // 80 log-mel + log energy
inline constexpr std::size_t kStackedDim = 243;  // previous, current, next frame

/// frames x dim, row-major.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dim = 0;
  double frame_shift = 0.01;  // seconds
  std::vector<double> values;

  double at(std::size_t t, std::size_t d) const { return values[t * dim + d]; }
  double &at(std::size_t t, std::size_t d) { return values[t * dim + d]; }
};

/// Window length, hop and FFT size in samples for a sample rate.
struct FrameGeometry {
  std::size_t window = 0;
  std::size_t shift = 0;
  std::size_t fft_size = 0;
  /// Number of complete windows in `samples` samples (0 if none).
  std::size_t num_frames(std::size_t samples) const {
    return samples < window ? 0 : (samples - window) / shift + 1;
  }
};
FrameGeometry GeometryFor(int sample_rate, const FbankConfig &cfg);

/// Columns 0..num_bins-1 are log mel filterbank energies of the Hamming-windowed
/// power spectrum, the last column is the log energy of the raw frame; both
/// floored at cfg.log_floor before the log. Throws DataError for unsupported
/// sample rates (8 kHz and 16 kHz are accepted) or audio shorter than a window.
FeatureMatrix compute_fbank(const Waveform &wave, const FbankConfig &cfg = {});

/// Row t becomes [row t-1 ; row t ; row t+1] with the first/last row repeated
/// at the edges. Requires dim == kFbankDim.
FeatureMatrix stack_frames(const FeatureMatrix &f);

/// Per-dimension mean / standard deviation normalization.
struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const { return mean.empty(); }
  void apply(FeatureMatrix &f) const;
};

/// Accumulates statistics over several matrices of equal dim.
FeatureNorm ComputeNorm(const std::vector<const FeatureMatrix *> &mats);

/// Cache file: magic "MDDF", u32 version, u32 T, u32 D, f32 frame_shift, then
/// T*D little-endian f32 values row-major.
void WriteFeatureCache(const std::string &path, const FeatureMatrix &f);
FeatureMatrix ReadFeatureCache(const std::string &path);

/// Rounds values to 32-bit float precision (what the cache preserves).
void RoundToFloat(FeatureMatrix &f);

}  // namespace mdd

#endif  // MDD_FEATURES_HPP_
