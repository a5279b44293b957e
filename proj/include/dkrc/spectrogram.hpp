// Copyright 2026 The dkrc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace dkrc {

struct SpectrogramConfig {
  double sample_rate = 1000.0;  // Hz; matches the 1 kHz simulator
  int window_len = 256;         // samples
  int hop = 64;                 // samples
  int n_fft = 256;              // >= window_len, zero padded
  int n_mels = 32;
  double f_min = 0.0;           // Hz
  double f_max = 500.0;         // Hz, <= Nyquist
  double log_floor = 1e-10;     // power floor before the dB transform

  void validate() const;
  int bins() const { return n_fft / 2 + 1; }
};

// Mel scale m(f) = 2595 log10(1 + f/700) and its inverse.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Hann-windowed, hop-strided one-sided power spectra, (n_fft/2+1) x
// n_frames with n_frames = floor((len - window_len)/hop) + 1. Power is
// normalized by n_fft so that doubling the symmetric bins of one column
// reproduces the windowed frame energy sum((w*x)^2).
Eigen::MatrixXd stft_power(const std::vector<double>& signal,
                           const SpectrogramConfig& config);

// Triangular mel filters, n_mels x (n_fft/2+1), centers equally spaced
// on the mel scale between f_min and f_max, each row peak-normalized
// to 1. Throws if any filter covers no FFT bin.
Eigen::MatrixXd mel_filterbank(const SpectrogramConfig& config);

struct MelSpectrogram {
  Eigen::MatrixXd values;          // n_mels x n_frames, dB
  std::vector<int> frame_centers;  // sample index of each window midpoint
  SpectrogramConfig config;
};

// 10*log10(max(filterbank * power, log_floor)).
MelSpectrogram mel_spectrogram(const std::vector<double>& signal,
                               const SpectrogramConfig& config);

struct PixelImage {
  int height = 0;
  int width = 0;
  Eigen::MatrixXd pixels;  // height x width, in [0, 1]
};

struct GlobalMinMax {};
struct FixedRange {
  double lo;
  double hi;
};
using ImageScaling = std::variant<GlobalMinMax, FixedRange>;

// Affine rescale into [0,1]. A constant input maps to all zeros under
// GlobalMinMax; FixedRange clamps.
PixelImage to_image(const Eigen::MatrixXd& values, const ImageScaling& mode);
PixelImage to_image(const MelSpectrogram& spec, const ImageScaling& mode);

// Zero-order-hold alignment: timestep t maps to the latest frame whose
// center is <= t; timesteps before the first center map to frame 0.
std::vector<int> align_latents(const std::vector<int>& frame_centers,
                               int n_steps);

}  // namespace dkrc
