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


#include "ier/identifier.hpp"

#include "ier/numerics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace ier {

StepParams StepParams::zeros(Index k, Index c, Index c_m) {
  if (k < 1 || c < 1 || c_m < 1) throw ConfigError("step parameter dimensions must be positive");
  StepParams p;
  p.steps.assign(static_cast<std::size_t>(k), Affine::zeros(c, c_m));
  return p;
}

std::vector<Block> StepParams::blocks() {
  std::vector<Block> out;
  for (std::size_t n = 0; n < steps.size(); ++n) {
    out.push_back(block("steps." + std::to_string(n) + ".weight", steps[n].weight));
    out.push_back(block("steps." + std::to_string(n) + ".bias", steps[n].bias));
  }
  return out;
}

Mat distinguishing_step(const StepParams& params, const Vec& mid) {
  if (params.steps.empty()) throw DomainError("distinguishing_step: no classes");
  Mat delta(params.classes(), params.steps.front().out_dim());
  for (Index n = 0; n < params.classes(); ++n) delta.row(n) = params.steps[static_cast<std::size_t>(n)].apply(mid).transpose();
  return delta;
}

Mat expand_features(const Vec& audio, const Mat& delta) {
  if (delta.cols() != audio.size()) throw DomainError("expand_features: dimension mismatch");
  return delta.rowwise() + audio.transpose();
}

double mixed_loss(const PrototypeBank& audio_bank, const Vec& audio, const Mat& delta, const Vec& targets, Mat* grad) {
  for (Index n = 0; n < targets.size(); ++n) check_bce_target(targets(n));
  return prototype_bce(audio_bank, expand_features(audio, delta), targets, grad);
}

void step_backward(const Vec& mid, const Mat& grad_delta, StepParams& grad) {
  if (grad_delta.rows() != grad.classes()) throw DomainError("step_backward: class count mismatch");
  for (Index n = 0; n < grad.classes(); ++n) {
    auto& g = grad.steps[static_cast<std::size_t>(n)];
    g.weight.noalias() += grad_delta.row(n).transpose() * mid.transpose();
    g.bias += grad_delta.row(n).transpose();
  }
}

Vec class_scores(const PrototypeBank& audio_bank, const Mat& expanded) {
  if (expanded.rows() != audio_bank.size()) throw DomainError("class_scores: class count mismatch");
  Vec out(audio_bank.size());
  for (Index k = 0; k < out.size(); ++k)
    out(k) = remap_similarity(cosine_sim(audio_bank.rows.row(k), expanded.row(k)));
  return out;
}

CurriculumState curriculum_schedule(int epoch, int total_epochs) {
  if (total_epochs < 1) throw ConfigError("curriculum needs at least one epoch");
  if (epoch < 0 || epoch >= total_epochs) throw DomainError("curriculum: epoch out of range");
  CurriculumState s;
  s.epoch = epoch;
  if (total_epochs == 1) return s;
  s.p = std::min(0.9, 0.5 + 0.4 * static_cast<double>(epoch) / static_cast<double>(total_epochs - 1));
  s.m = std::min(4, 2 + (3 * epoch) / total_epochs);
  // Runs shorter than three epochs cannot reach the last third; end at 4 anyway.
  if (epoch == total_epochs - 1) s.m = 4;
  return s;
}

Mixture make_mixture(std::span<const Vec> latents, std::span<const Index> labels, Index k, int m, Index first,
                     Rng& rng) {
  if (latents.size() != labels.size() || latents.empty()) throw DomainError("make_mixture: inconsistent samples");
  if (m < 1) throw ConfigError("make_mixture: order must be positive");
  if (first < 0 || first >= static_cast<Index>(latents.size())) throw DomainError("make_mixture: bad first sample");
  const std::set<Index> distinct(labels.begin(), labels.end());
  if (static_cast<Index>(distinct.size()) < m) throw ConfigError("make_mixture: not enough distinct pseudo-classes");

  Mixture mix;
  mix.targets = Vec::Zero(k);
  std::vector<world::AudioEntry> entries;
  auto take = [&](Index i) {
    mix.members.push_back(i);
    mix.targets(labels[static_cast<std::size_t>(i)]) = 1.0;
    entries.push_back({latents[static_cast<std::size_t>(i)], rng.log_uniform(0.1, 1.0)});
  };
  take(first);
  const auto n = static_cast<Index>(latents.size());
  while (static_cast<int>(mix.members.size()) < m) {
    const Index j = rng.index(n);
    if (mix.targets(labels[static_cast<std::size_t>(j)]) != 0.0) continue;  // same class: redraw
    take(j);
  }
  mix.latent = world::mix_audio_latents(entries, 0.0, rng);
  return mix;
}

SampleFeatures encode_samples(const EncoderParams& encoder, std::span<const world::ScenePair> data) {
  SampleFeatures f;
  const auto n = static_cast<Index>(data.size());
  f.objects.resize(n, encoder.embed_dim());
  f.audio.resize(n, encoder.embed_dim());
  for (Index i = 0; i < n; ++i) {
    const auto& pair = data[static_cast<std::size_t>(i)];
    const Vec a = encode_audio(encoder, pair.audio).feature;
    f.audio.row(i) = a.transpose();
    f.objects.row(i) = object_feature(encode_visual(encoder, pair.visual).features, a).transpose();
  }
  return f;
}

IdentifierResult train_identifier(EncoderParams encoder, StepParams steps, Prototypes prototypes,
                                  std::span<const world::ScenePair> data, const IdentifierOptions& options,
                                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.empty()) throw ConfigError("identifier training needs a non-empty dataset");
  if (options.batch < 1) throw ConfigError("identifier batch size must be positive");
  if (prototypes.assignments.size() != data.size())
    throw DomainError("train_identifier: assignments do not match the dataset");
  const Index k = prototypes.audio.size();
  if (steps.classes() != k) throw DomainError("train_identifier: step parameters do not match K");

  std::vector<Vec> latents;
  latents.reserve(data.size());
  for (const auto& pair : data) latents.push_back(pair.audio);
  const std::span<const Index> labels(prototypes.assignments);

  Rng rng(options.seed);
  AdamState adam(options.lr);
  IdentifierResult result;
  std::vector<Index> order(data.size());
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const SampleFeatures fresh = encode_samples(encoder, data);
    recompute_prototypes(prototypes, fresh.objects, fresh.audio);
    const CurriculumState cur = curriculum_schedule(epoch, options.epochs);
    std::shuffle(order.begin(), order.end(), rng.engine());

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
      const double scale = 1.0 / static_cast<double>(end - start);
      StepParams grad = StepParams::zeros(k, steps.steps.front().out_dim(), steps.steps.front().in_dim());
      EncoderParams egrad = EncoderParams::zeros_like(encoder);
      for (std::size_t b = start; b < end; ++b) {
        const Index i = order[b];
        if (rng.bernoulli(cur.p)) {
          const Mixture mix = make_mixture(latents, labels, k, cur.m, i, rng);
          const AudioEncoding enc = encode_audio(encoder, mix.latent);
          const Mat delta = distinguishing_step(steps, enc.mid);
          Mat gd;
          epoch_loss += mixed_loss(prototypes.audio, enc.feature, delta, mix.targets, &gd);
          gd *= scale;
          step_backward(enc.mid, gd, grad);
          if (options.train_audio) {
            Vec dmid = Vec::Zero(enc.mid.size());
            for (Index n = 0; n < k; ++n)
              dmid.noalias() += steps.steps[static_cast<std::size_t>(n)].weight.transpose() * gd.row(n).transpose();
            audio_backward(encoder, mix.latent, enc, gd.colwise().sum().transpose(), &dmid, egrad);
          }
        } else {
          const AudioEncoding enc = encode_audio(encoder, latents[static_cast<std::size_t>(i)]);
          Vec ga;
          epoch_loss += single_source_loss(prototypes.audio, enc.feature, one_hot(labels[static_cast<std::size_t>(i)], k), &ga);
          if (options.train_audio)
            audio_backward(encoder, latents[static_cast<std::size_t>(i)], enc, scale * ga, nullptr, egrad);
        }
      }
      auto params = steps.blocks();
      auto grads = grad.blocks();
      if (options.train_audio) {
        for (auto& blk : encoder.audio_blocks()) params.push_back(std::move(blk));
        for (auto& blk : egrad.audio_blocks()) grads.push_back(std::move(blk));
      }
      adam.update(params, grads);
    }
    EpochLog entry{epoch, epoch_loss / static_cast<double>(data.size()), cur.p, cur.m};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.steps = std::move(steps);
  result.encoder = std::move(encoder);
  result.prototypes = std::move(prototypes);
  return result;
}

}  // namespace ier
