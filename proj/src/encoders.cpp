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

#include "ier/encoders.hpp"

#include "ier/numerics.hpp"
#include "ier/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ier {

EncoderParams EncoderParams::random(Index c_in, Index a_in, Index c_m, Index c, std::uint64_t seed) {
  if (c_in < 1 || a_in < 1 || c_m < 1 || c < 1) throw ConfigError("encoder dimensions must be positive");
  Rng rng(seed);
  auto layer = [&rng](Index out, Index in) {
    return Affine(rng.normal_matrix(out, in, 1.0 / std::sqrt(static_cast<double>(in))), rng.normal_vector(out, 0.01));
  };
  EncoderParams p;
  p.visual = layer(c, c_in);
  p.audio_mid = layer(c_m, a_in);
  p.audio_out = layer(c, c_m);
  return p;
}

EncoderParams EncoderParams::zeros_like(const EncoderParams& p) {
  return EncoderParams{Affine::zeros(p.visual.out_dim(), p.visual.in_dim()),
                       Affine::zeros(p.audio_mid.out_dim(), p.audio_mid.in_dim()),
                       Affine::zeros(p.audio_out.out_dim(), p.audio_out.in_dim())};
}

std::vector<Block> EncoderParams::blocks() {
  auto out = visual_blocks();
  for (auto& b : audio_blocks()) out.push_back(std::move(b));
  return out;
}

std::vector<Block> EncoderParams::visual_blocks() {
  return {block("encoder.visual.weight", visual.weight), block("encoder.visual.bias", visual.bias)};
}

std::vector<Block> EncoderParams::audio_blocks() {
  return {block("encoder.audio_mid.weight", audio_mid.weight), block("encoder.audio_mid.bias", audio_mid.bias),
          block("encoder.audio_out.weight", audio_out.weight), block("encoder.audio_out.bias", audio_out.bias)};
}

VisualEncoding encode_visual(const EncoderParams& params, const FeatureGrid& grid) {
  if (grid.channels() != params.visual.in_dim()) throw DomainError("encode_visual: channel mismatch");
  Mat z = grid.cells * params.visual.weight.transpose();
  z.rowwise() += params.visual.bias.transpose();
  VisualEncoding enc;
  enc.norms = z.rowwise().norm();
  const double uniform = 1.0 / std::sqrt(static_cast<double>(z.cols()));
  for (Index i = 0; i < z.rows(); ++i) {
    if (enc.norms(i) > 0.0) {
      z.row(i) /= enc.norms(i);
    } else {
      z.row(i).setConstant(uniform);
      ++enc.degenerate_cells;
    }
  }
  if (enc.degenerate_cells > 0)
    spdlog::warn("encode_visual: {} zero-norm cells replaced by the uniform unit vector", enc.degenerate_cells);
  enc.features = FeatureGrid(grid.height, grid.width, std::move(z));
  return enc;
}

AudioEncoding encode_audio(const EncoderParams& params, const Vec& latent) {
  AudioEncoding enc;
  enc.mid = params.audio_mid.apply(latent);
  const Vec z = params.audio_out.apply(enc.mid);
  enc.norm = z.norm();
  if (!(enc.norm > 0.0)) throw DomainError("encode_audio: zero-norm audio feature");
  enc.feature = z / enc.norm;
  return enc;
}

void visual_cell_backward(const FeatureGrid& input, const VisualEncoding& enc, Index cell, const Vec& grad_feature,
                          EncoderParams& grad) {
  if (!(enc.norms(cell) > 0.0)) return;
  const Vec f = enc.features.cells.row(cell).transpose();
  const Vec dz = l2_normalize_backward(f, enc.norms(cell), grad_feature);
  grad.visual.weight.noalias() += dz * input.cells.row(cell);
  grad.visual.bias += dz;
}

void visual_backward(const EncoderParams& params, const FeatureGrid& input, const VisualEncoding& enc,
                     const Mat& grad_features, EncoderParams& grad) {
  (void)params;
  const Mat& f = enc.features.cells;
  Mat dz = grad_features - (f.array().colwise() * (f.cwiseProduct(grad_features).rowwise().sum()).array()).matrix();
  for (Index i = 0; i < dz.rows(); ++i) {
    if (enc.norms(i) > 0.0) {
      dz.row(i) /= enc.norms(i);
    } else {
      dz.row(i).setZero();
    }
  }
  grad.visual.weight.noalias() += dz.transpose() * input.cells;
  grad.visual.bias += dz.colwise().sum().transpose();
}

void audio_backward(const EncoderParams& params, const Vec& latent, const AudioEncoding& enc, const Vec& grad_feature,
                    const Vec* grad_mid, EncoderParams& grad) {
  const Vec dz = l2_normalize_backward(enc.feature, enc.norm, grad_feature);
  grad.audio_out.weight.noalias() += dz * enc.mid.transpose();
  grad.audio_out.bias += dz;
  Vec dmid = params.audio_out.weight.transpose() * dz;
  if (grad_mid != nullptr) dmid += *grad_mid;
  grad.audio_mid.weight.noalias() += dmid * latent.transpose();
  grad.audio_mid.bias += dmid;
}

Vec cosine_grad(const Vec& a, const Vec& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_grad: zero-norm input");
  const double c = a.dot(b) / (na * nb);
  return b / (na * nb) - c * a / (na * na);
}

double correspondence_loss(const Vec& audio, const FeatureGrid& visual, double delta) {
  const SimilarityMap map = localization_map(visual, audio);
  return bce(remap_similarity(global_max_pool(map)), delta);
}

CorrespondenceGrad correspondence_loss_grad(const Vec& audio, const FeatureGrid& visual, double delta) {
  const SimilarityMap map = localization_map(visual, audio);
  CorrespondenceGrad g;
  g.cell = argmax_cell(map);
  const double pred = remap_similarity(map.values(g.cell));
  g.loss = bce(pred, delta);
  const double ds = 0.5 * bce_grad(pred, delta);
  const Vec cell = visual.cells.row(g.cell).transpose();
  g.grad_audio = ds * cosine_grad(audio, cell);
  g.grad_cell = ds * cosine_grad(cell, audio);
  return g;
}

AveragedCorrespondenceGrad averaged_correspondence_loss_grad(const Vec& audio, const FeatureGrid& visual,
                                                             double delta) {
  const SimilarityMap map = localization_map(visual, audio);
  const double pred = remap_similarity(global_avg_pool(map));
  AveragedCorrespondenceGrad g;
  g.loss = bce(pred, delta);
  const double ds = 0.5 * bce_grad(pred, delta) / static_cast<double>(map.size());
  g.grad_audio = Vec::Zero(audio.size());
  g.grad_cells.resize(visual.size(), audio.size());
  for (Index i = 0; i < visual.size(); ++i) {
    const Vec cell = visual.cells.row(i).transpose();
    g.grad_audio += ds * cosine_grad(audio, cell);
    g.grad_cells.row(i) = ds * cosine_grad(cell, audio).transpose();
  }
  return g;
}

double stage1_batch_loss(const EncoderParams& params, std::span<const world::ScenePair* const> batch,
                         std::span<const Index> negatives, EncoderParams* grad, Pooling pooling) {
  const auto n = static_cast<Index>(batch.size());
  if (n < 2) throw ConfigError("stage-1 batches need at least two pairs");
  if (static_cast<Index>(negatives.size()) != n) throw DomainError("stage1_batch_loss: negatives size mismatch");

  std::vector<VisualEncoding> visual;
  std::vector<AudioEncoding> audio;
  visual.reserve(batch.size());
  audio.reserve(batch.size());
  for (const auto* pair : batch) {
    visual.push_back(encode_visual(params, pair->visual));
    audio.push_back(encode_audio(params, pair->audio));
  }

  double total = 0.0;
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const auto sj = static_cast<std::size_t>(negatives[si]);
    if (sj == si || negatives[si] < 0 || negatives[si] >= n) throw DomainError("stage1_batch_loss: invalid negative");
    if (pooling == Pooling::kAverage) {
      const auto pos = averaged_correspondence_loss_grad(audio[si].feature, visual[si].features, 1.0);
      const auto neg = averaged_correspondence_loss_grad(audio[si].feature, visual[sj].features, 0.0);
      total += pos.loss + neg.loss;
      if (grad != nullptr) {
        visual_backward(params, batch[si]->visual, visual[si], scale * pos.grad_cells, *grad);
        visual_backward(params, batch[sj]->visual, visual[sj], scale * neg.grad_cells, *grad);
        audio_backward(params, batch[si]->audio, audio[si], scale * (pos.grad_audio + neg.grad_audio), nullptr, *grad);
      }
      continue;
    }
    const CorrespondenceGrad pos = correspondence_loss_grad(audio[si].feature, visual[si].features, 1.0);
    const CorrespondenceGrad neg = correspondence_loss_grad(audio[si].feature, visual[sj].features, 0.0);
    total += pos.loss + neg.loss;
    if (grad != nullptr) {
      visual_cell_backward(batch[si]->visual, visual[si], pos.cell, scale * pos.grad_cell, *grad);
      visual_cell_backward(batch[sj]->visual, visual[sj], neg.cell, scale * neg.grad_cell, *grad);
      audio_backward(params, batch[si]->audio, audio[si], scale * (pos.grad_audio + neg.grad_audio), nullptr, *grad);
    }
  }
  return total * scale;
}

Stage1Result train_stage1(EncoderParams params, std::span<const world::ScenePair> data, const Stage1Options& options,
                          const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.empty()) throw ConfigError("stage-1 training needs a non-empty dataset");
  if (options.batch < 2 || data.size() < 2) throw ConfigError("stage-1 batch size must be at least 2");

  Rng rng(options.seed);
  AdamState adam(options.lr);
  Stage1Result result;
  std::vector<Index> order(data.size());
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
      if (order.size() - end == 1) end = order.size();  // no singleton tail batch
      std::vector<const world::ScenePair*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data[static_cast<std::size_t>(order[i])]);
      const auto b = static_cast<Index>(batch.size());
      std::vector<Index> negatives(batch.size());
      for (Index i = 0; i < b; ++i) {
        Index j = rng.index(b - 1);
        if (j >= i) ++j;
        negatives[static_cast<std::size_t>(i)] = j;
      }
      EncoderParams grad = EncoderParams::zeros_like(params);
      const Pooling pooling = epoch < options.warmup_epochs ? Pooling::kAverage : Pooling::kMax;
      const double loss = stage1_batch_loss(params, batch, negatives, &grad, pooling);
      adam.update(params.blocks(), grad.blocks());
      epoch_loss += loss * static_cast<double>(b);
      start = end;
    }
    EpochLog entry{epoch, epoch_loss / static_cast<double>(data.size()), 0.0, 0};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace ier
