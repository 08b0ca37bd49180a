// Copyright 2026 The ier Authors.
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

#ifndef IER_AUDIO_FRONTEND_HPP
#define IER_AUDIO_FRONTEND_HPP

#include "ier/core.hpp"

#include <filesystem>
#include <span>

namespace ier::audio {

inline constexpr double kTargetSampleRate = 16000.0;

struct Waveform {
  Vec samples;
  double sample_rate = kTargetSampleRate;
};

struct LogMelSpectrogram {
  Mat values;  // frames x mel bins
  double frame_hop = 0.0;  // seconds
  double window = 0.0;     // seconds
};

enum class SampleFormat { kPcm16, kFloat32 };

/// Reads a PCM16 or float32 RIFF/WAVE file, averages channels to mono and
/// linearly resamples to 16 kHz. Throws FormatError on malformed input.
Waveform load_wav(const std::filesystem::path& path);

/// Writes interleaved channels (all of equal length) as a RIFF/WAVE file.
void write_wav(const std::filesystem::path& path, std::span<const Vec> channels, double sample_rate,
               SampleFormat format = SampleFormat::kPcm16);

/// Linear-interpolation resampler; output length is floor((N - 1) * ratio) + 1.
Waveform resample_linear(const Waveform& w, double target_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-mel filters over the one-sided spectrum of an `fft_size`
/// transform. `weights` is bins x (fft_size / 2 + 1).
struct MelFilterbank {
  Mat weights;
  Vec center_hz;
};

MelFilterbank make_mel_filterbank(Index fft_size, double sample_rate, Index bins, double fmin_hz, double fmax_hz);

struct LogMelOptions {
  double window = 0.160;
  double hop = 0.080;
  Index bins = 64;
  double fmin_hz = 20.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;
};

/// Hann window -> |DFT| -> mel filterbank -> ln(x + floor). Partial tail frames
/// are dropped, so T = floor((N - win) / hop) + 1.
LogMelSpectrogram log_mel(const Waveform& w, const LogMelOptions& options = {});

/// Pointwise mean of the clips, truncated to the shortest one.
Waveform mix_waveforms(std::span<const Waveform> clips);

}  // namespace ier::audio

#endif  // IER_AUDIO_FRONTEND_HPP
