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

#include "ier/audio_frontend.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

namespace ier::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    if (pos + 8 + size > bytes.size()) throw FormatError("truncated chunk in " + path.string());
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("short fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) throw FormatError("short extensible fmt chunk");
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos += 8 + size + (size & 1);
  }
  if (channels == 0 || rate == 0) throw FormatError("missing or invalid fmt chunk");
  if (data == nullptr) throw FormatError("missing data chunk");

  std::size_t sample_bytes = 0;
  if (format == kFormatPcm && bits == 16) {
    sample_bytes = 2;
  } else if (format == kFormatFloat && bits == 32) {
    sample_bytes = 4;
  } else {
    throw FormatError("unsupported WAV codec (format " + std::to_string(format) + ", " + std::to_string(bits) +
                      " bits)");
  }

  const std::size_t frames = data_size / (sample_bytes * channels);
  Waveform w;
  w.sample_rate = rate;
  w.samples = Vec::Zero(static_cast<Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (f * channels + c) * sample_bytes;
      if (sample_bytes == 2) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        float v = 0.0F;
        const std::uint32_t raw = read_u32(p);
        std::memcpy(&v, &raw, sizeof v);
        acc += v;
      }
    }
    w.samples(static_cast<Index>(f)) = acc / channels;
  }
  if (!w.samples.allFinite()) throw FormatError("non-finite samples in " + path.string());
  if (w.sample_rate != kTargetSampleRate) w = resample_linear(w, kTargetSampleRate);
  return w;
}

void write_wav(const std::filesystem::path& path, std::span<const Vec> channels, double sample_rate,
               SampleFormat format) {
  if (channels.empty()) throw DomainError("write_wav: no channels");
  const Index frames = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != frames) throw DomainError("write_wav: channel length mismatch");

  const std::uint16_t n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint32_t block = n_ch * bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames) * block;
  const auto rate = static_cast<std::uint32_t>(sample_rate);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, n_ch);
  put_u32(out, rate);
  put_u32(out, rate * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (Index f = 0; f < frames; ++f) {
    for (const auto& c : channels) {
      const double v = std::clamp(c(f), -1.0, 1.0);
      if (format == SampleFormat::kPcm16) {
        const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0)));
        put_u16(out, static_cast<std::uint16_t>(q));
      } else {
        const auto f32 = static_cast<float>(v);
        std::uint32_t raw = 0;
        std::memcpy(&raw, &f32, sizeof raw);
        put_u32(out, raw);
      }
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write failed for " + path.string());
}

Waveform resample_linear(const Waveform& w, double target_rate) {
  if (!(w.sample_rate > 0.0) || !(target_rate > 0.0)) throw DomainError("resample_linear: non-positive rate");
  const Index n = w.samples.size();
  if (n == 0 || w.sample_rate == target_rate) return Waveform{w.samples, target_rate};
  const double ratio = target_rate / w.sample_rate;
  const auto out_len = static_cast<Index>(std::floor(static_cast<double>(n - 1) * ratio + 1e-9)) + 1;
  Waveform out{Vec(out_len), target_rate};
  for (Index i = 0; i < out_len; ++i) {
    const double src = static_cast<double>(i) / ratio;
    const auto lo = std::min(static_cast<Index>(std::floor(src)), n - 1);
    const Index hi = std::min(lo + 1, n - 1);
    const double t = src - static_cast<double>(lo);
    out.samples(i) = (1.0 - t) * w.samples(lo) + t * w.samples(hi);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank make_mel_filterbank(Index fft_size, double sample_rate, Index bins, double fmin_hz, double fmax_hz) {
  if (bins < 1 || fft_size < 2 || !(fmax_hz > fmin_hz) || fmin_hz < 0.0)
    throw DomainError("make_mel_filterbank: invalid parameters");
  const Index n_freq = fft_size / 2 + 1;
  const double lo = hz_to_mel(fmin_hz);
  const double hi = hz_to_mel(fmax_hz);
  Vec edges(bins + 2);
  for (Index i = 0; i < bins + 2; ++i) edges(i) = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (bins + 1));

  MelFilterbank fb{Mat::Zero(bins, n_freq), edges.segment(1, bins)};
  for (Index b = 0; b < bins; ++b) {
    const double left = edges(b);
    const double center = edges(b + 1);
    const double right = edges(b + 2);
    for (Index j = 0; j < n_freq; ++j) {
      const double f = static_cast<double>(j) * sample_rate / static_cast<double>(fft_size);
      const double w = std::min((f - left) / (center - left), (right - f) / (right - center));
      if (w > 0.0) fb.weights(b, j) = w;
    }
  }
  return fb;
}

LogMelSpectrogram log_mel(const Waveform& w, const LogMelOptions& options) {
  const auto win = static_cast<Index>(std::lround(options.window * w.sample_rate));
  const auto hop = static_cast<Index>(std::lround(options.hop * w.sample_rate));
  if (win < 2 || hop < 1) throw DomainError("log_mel: window or hop too short");
  const Index n = w.samples.size();
  if (n < win) throw DomainError("log_mel: clip shorter than one window");
  const Index frames = (n - win) / hop + 1;

  const MelFilterbank fb = make_mel_filterbank(win, w.sample_rate, options.bins, options.fmin_hz, options.fmax_hz);
  Vec hann(win);
  for (Index i = 0; i < win; ++i)
    hann(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(win - 1));

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(win));
  std::vector<std::complex<double>> spectrum;
  Vec magnitude(win / 2 + 1);

  LogMelSpectrogram out{Mat(frames, options.bins), options.hop, options.window};
  for (Index t = 0; t < frames; ++t) {
    for (Index i = 0; i < win; ++i) frame[static_cast<std::size_t>(i)] = w.samples(t * hop + i) * hann(i);
    fft.fwd(spectrum, frame);
    for (Index j = 0; j < magnitude.size(); ++j) magnitude(j) = std::abs(spectrum[static_cast<std::size_t>(j)]);
    out.values.row(t) = ((fb.weights * magnitude).array() + options.log_floor).log().transpose();
  }
  return out;
}

Waveform mix_waveforms(std::span<const Waveform> clips) {
  if (clips.empty()) throw DomainError("mix_waveforms: empty list");
  const double rate = clips.front().sample_rate;
  Index len = clips.front().samples.size();
  for (const auto& c : clips) {
    if (c.sample_rate != rate) throw DomainError("mix_waveforms: sample-rate mismatch");
    len = std::min(len, c.samples.size());
  }
  Waveform out{Vec::Zero(len), rate};
  for (const auto& c : clips) out.samples += c.samples.head(len);
  out.samples /= static_cast<double>(clips.size());
  return out;
}

}  // namespace ier::audio
