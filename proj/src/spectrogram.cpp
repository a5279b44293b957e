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

#include "dkrc/spectrogram.hpp"

#include <cmath>
#include <complex>

#include "dkrc/errors.hpp"

namespace dkrc {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey; data.size() must be a power
// of two.
void fft_radix2(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = data[i + k];
        const std::complex<double> v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Direct DFT fallback for non power-of-two sizes.
void dft_direct(const std::vector<std::complex<double>>& in,
                std::vector<std::complex<double>>& out) {
  const std::size_t n = in.size();
  out.assign(n, {0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double angle =
          -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += in[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
}

}  // namespace

void SpectrogramConfig::validate() const {
  if (hop < 1) throw InvalidArgument("SpectrogramConfig: hop must be >= 1");
  if (window_len < 1)
    throw InvalidArgument("SpectrogramConfig: window_len must be >= 1");
  if (n_fft < window_len)
    throw InvalidArgument("SpectrogramConfig: n_fft must be >= window_len");
  if (n_mels < 1)
    throw InvalidArgument("SpectrogramConfig: n_mels must be >= 1");
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw InvalidArgument(
        "SpectrogramConfig: need 0 <= f_min < f_max <= sample_rate/2");
  }
  if (!(log_floor > 0.0))
    throw InvalidArgument("SpectrogramConfig: log_floor must be > 0");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Eigen::MatrixXd stft_power(const std::vector<double>& signal,
                           const SpectrogramConfig& config) {
  config.validate();
  const int win = config.window_len;
  if (signal.size() < static_cast<std::size_t>(win)) {
    throw InsufficientData("stft_power: signal shorter than one window");
  }
  const int n_frames =
      static_cast<int>((signal.size() - static_cast<std::size_t>(win)) /
                       static_cast<std::size_t>(config.hop)) +
      1;
  const int bins = config.bins();

  // Periodic Hann window.
  std::vector<double> window(static_cast<std::size_t>(win));
  for (int i = 0; i < win; ++i) {
    window[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(win));
  }

  Eigen::MatrixXd power(bins, n_frames);
  std::vector<std::complex<double>> frame(static_cast<std::size_t>(config.n_fft));
  std::vector<std::complex<double>> spectrum;
  for (int f = 0; f < n_frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) *
                              static_cast<std::size_t>(config.hop);
    std::fill(frame.begin(), frame.end(), std::complex<double>(0.0, 0.0));
    for (int i = 0; i < win; ++i) {
      frame[static_cast<std::size_t>(i)] =
          window[static_cast<std::size_t>(i)] *
          signal[start + static_cast<std::size_t>(i)];
    }
    const std::complex<double>* out = nullptr;
    if (is_power_of_two(config.n_fft)) {
      fft_radix2(frame);
      out = frame.data();
    } else {
      dft_direct(frame, spectrum);
      out = spectrum.data();
    }
    for (int k = 0; k < bins; ++k) {
      power(k, f) = std::norm(out[static_cast<std::size_t>(k)]) /
                    static_cast<double>(config.n_fft);
    }
  }
  return power;
}

Eigen::MatrixXd mel_filterbank(const SpectrogramConfig& config) {
  config.validate();
  const int bins = config.bins();
  const double mel_lo = hz_to_mel(config.f_min);
  const double mel_hi = hz_to_mel(config.f_max);
  const double mel_step = (mel_hi - mel_lo) / static_cast<double>(config.n_mels + 1);

  // n_mels + 2 edge points; filter j rises over [edge_j, edge_j+1] and
  // falls over [edge_j+1, edge_j+2].
  std::vector<double> edges(static_cast<std::size_t>(config.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_lo + mel_step * static_cast<double>(i);
  }

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(config.n_mels, bins);
  const double hz_per_bin = config.sample_rate / static_cast<double>(config.n_fft);
  for (int j = 0; j < config.n_mels; ++j) {
    const double left = edges[static_cast<std::size_t>(j)];
    const double center = edges[static_cast<std::size_t>(j) + 1];
    const double right = edges[static_cast<std::size_t>(j) + 2];
    for (int k = 0; k < bins; ++k) {
      const double mel = hz_to_mel(hz_per_bin * static_cast<double>(k));
      double w = 0.0;
      if (mel >= left && mel <= center) {
        w = (center - left) > 0.0 ? (mel - left) / (center - left) : 0.0;
      } else if (mel > center && mel <= right) {
        w = (right - center) > 0.0 ? (right - mel) / (right - center) : 0.0;
      }
      fb(j, k) = w;
    }
    const double peak = fb.row(j).maxCoeff();
    if (peak <= 0.0) {
      throw InvalidArgument(
          "mel_filterbank: filter " + std::to_string(j) +
          " spans no FFT bin; lower n_mels or raise n_fft");
    }
    fb.row(j) /= peak;
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const std::vector<double>& signal,
                               const SpectrogramConfig& config) {
  const Eigen::MatrixXd power = stft_power(signal, config);
  const Eigen::MatrixXd fb = mel_filterbank(config);
  MelSpectrogram spec;
  spec.config = config;
  spec.values = (fb * power)
                    .cwiseMax(config.log_floor)
                    .array()
                    .log10()
                    .matrix() *
                10.0;
  spec.frame_centers.resize(static_cast<std::size_t>(power.cols()));
  for (int f = 0; f < power.cols(); ++f) {
    spec.frame_centers[static_cast<std::size_t>(f)] =
        f * config.hop + config.window_len / 2;
  }
  return spec;
}

PixelImage to_image(const Eigen::MatrixXd& values, const ImageScaling& mode) {
  if (!values.allFinite()) throw NumericError("to_image: non-finite input");
  PixelImage img;
  img.height = static_cast<int>(values.rows());
  img.width = static_cast<int>(values.cols());
  if (const auto* range = std::get_if<FixedRange>(&mode)) {
    if (!(range->lo < range->hi)) {
      throw InvalidArgument("to_image: fixed range needs lo < hi");
    }
    img.pixels = ((values.array() - range->lo) / (range->hi - range->lo))
                     .cwiseMax(0.0)
                     .cwiseMin(1.0)
                     .matrix();
  } else {
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    if (hi > lo) {
      img.pixels = ((values.array() - lo) / (hi - lo)).matrix();
    } else {
      img.pixels = Eigen::MatrixXd::Zero(values.rows(), values.cols());
    }
  }
  return img;
}

PixelImage to_image(const MelSpectrogram& spec, const ImageScaling& mode) {
  return to_image(spec.values, mode);
}

std::vector<int> align_latents(const std::vector<int>& frame_centers,
                               int n_steps) {
  if (frame_centers.empty()) {
    throw InsufficientData("align_latents: no frames");
  }
  std::vector<int> mapping(static_cast<std::size_t>(std::max(n_steps, 0)));
  int frame = 0;
  for (int t = 0; t < n_steps; ++t) {
    while (frame + 1 < static_cast<int>(frame_centers.size()) &&
           frame_centers[static_cast<std::size_t>(frame) + 1] <= t) {
      ++frame;
    }
    mapping[static_cast<std::size_t>(t)] = frame;
  }
  return mapping;
}

}  // namespace dkrc
