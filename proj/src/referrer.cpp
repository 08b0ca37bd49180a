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


#include "ier/referrer.hpp"

#include "ier/numerics.hpp"
#include "ier/parallel.hpp"
#include "ier/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ier {

namespace {

constexpr double kScoreNormFloor = 1e-12;

Vec checked_row_norms(const Mat& m, const char* what) {
  Vec n = m.rowwise().norm();
  for (Index i = 0; i < n.size(); ++i)
    if (!(n(i) > 0.0)) throw DomainError(what);
  return n;
}

// Cosine between every row of `cells` and every row of `targets`.
Mat cosine_table(const Mat& cells, const Mat& targets) {
  const Vec cn = checked_row_norms(cells, "zero-norm grid cell");
  const Vec tn = checked_row_norms(targets, "zero-norm class feature");
  Mat out = cells * targets.transpose();
  out = cn.cwiseInverse().asDiagonal() * out * tn.cwiseInverse().asDiagonal();
  return out.cwiseMax(-1.0).cwiseMin(1.0);
}

Mat expanded_for(const Model& model, const AudioEncoding& audio, bool identifier) {
  if (!identifier) return audio.feature.transpose().replicate(model.classes(), 1);
  return expand_features(audio.feature, distinguishing_step(model.steps, audio.mid));
}

Vec ones_weights(Index k) { return Vec::Ones(k); }

}  // namespace

ClassMaps class_visual_maps(const FeatureGrid& visual, const PrototypeBank& visual_bank) {
  if (visual.channels() != visual_bank.dim()) throw DomainError("class_visual_maps: channel mismatch");
  return ClassMaps{visual.height, visual.width, cosine_table(visual.cells, visual_bank.rows)};
}

ClassMaps audio_conditioned_maps(const FeatureGrid& visual, const Mat& expanded) {
  if (visual.channels() != expanded.cols()) throw DomainError("audio_conditioned_maps: channel mismatch");
  return ClassMaps{visual.height, visual.width, cosine_table(visual.cells, expanded)};
}

ClassMaps class_av_maps(const FeatureGrid& visual, const Mat& expanded, const ClassMaps& lv) {
  ClassMaps a = audio_conditioned_maps(visual, expanded);
  if (a.values.rows() != lv.values.rows() || a.values.cols() != lv.values.cols())
    throw DomainError("class_av_maps: shape mismatch");
  a.values = a.values.cwiseProduct(lv.values);
  return a;
}

Vec visual_guided_distribution(const ClassMaps& av) {
  if (av.classes() < 1 || av.values.rows() < 1) throw DomainError("visual_guided_distribution: empty maps");
  return softmax(av.values.colwise().mean().transpose());
}

double batch_mean_threshold(std::span<const ClassMaps> batch) {
  if (batch.empty()) throw DomainError("batch_mean_threshold: empty batch");
  double sum = 0.0;
  double count = 0.0;
  for (const auto& maps : batch) {
    sum += maps.values.sum();
    count += static_cast<double>(maps.values.size());
  }
  if (!(count > 0.0)) throw DomainError("batch_mean_threshold: empty maps");
  return sum / count;
}

double batch_threshold(std::span<const ClassMaps> batch, const ThresholdOptions& options) {
  switch (options.mode) {
    case 1:
      return options.constant;
    case 2: {
      if (batch.empty()) throw DomainError("batch_threshold: empty batch");
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& maps : batch) best = std::max(best, maps.values.maxCoeff());
      return options.ratio * best;
    }
    case 3:
    case 4:
      return std::numeric_limits<double>::quiet_NaN();
    case 5:
      return batch_mean_threshold(batch);
    default:
      throw ConfigError("threshold mode must be in 1..5");
  }
}

BinaryMask binarize(const SimilarityMap& map, double eps) {
  BinaryMask mask(map.height, map.width);
  for (Index i = 0; i < map.size(); ++i) mask.values(i) = map.values(i) > eps ? 1 : 0;
  return mask;
}

Vec mask_weights(const ClassMaps& lv, double batch_eps, const ThresholdOptions& options) {
  const Index k = lv.classes();
  Vec w(k);
  const auto cells = static_cast<double>(lv.values.rows());
  for (Index c = 0; c < k; ++c) {
    const auto col = lv.values.col(c);
    switch (options.mode) {
      case 1:
      case 2:
      case 5:
        w(c) = static_cast<double>((col.array() > batch_eps).count()) / cells;
        break;
      case 3:
        w(c) = static_cast<double>((col.array() > options.ratio * col.maxCoeff()).count()) / cells;
        break;
      case 4:
        w(c) = col.mean();
        break;
      default:
        throw ConfigError("threshold mode must be in 1..5");
    }
  }
  return w;
}

AudioGuided audio_guided_distribution(const PrototypeBank& audio_bank, const Mat& expanded, const Vec& weights) {
  const Index k = audio_bank.size();
  if (expanded.rows() != k || weights.size() != k) throw DomainError("audio_guided_distribution: class count mismatch");
  AudioGuided out;
  out.similarity.resize(k);
  for (Index c = 0; c < k; ++c) out.similarity(c) = cosine_sim(audio_bank.rows.row(c), expanded.row(c));
  const Vec s = weights.cwiseProduct(out.similarity);
  const double norm = s.cwiseAbs().sum();
  if (norm < kScoreNormFloor) {
    spdlog::warn("audio_guided_distribution: all scores vanish; using softmax of raw similarities");
    out.fallback = true;
    out.scores = Vec::Zero(k);
    out.distribution = softmax(out.similarity);
    return out;
  }
  out.scores = s / norm;
  out.distribution = softmax(out.scores);
  return out;
}

double cross_distillation_loss(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw DomainError("cross_distillation_loss: length mismatch");
  return 0.5 * kl_divergence(p, q) + 0.5 * kl_divergence(q, p);
}

Inference infer(const Model& model, const world::ScenePair& scene, double batch_eps, const ReferrerToggles& toggles) {
  const VisualEncoding v = encode_visual(model.encoder, scene.visual);
  const AudioEncoding a = encode_audio(model.encoder, scene.audio);
  Inference out;
  out.visual = class_visual_maps(v.features, model.prototypes.visual);
  out.expanded = expanded_for(model, a, toggles.identifier);
  out.av = toggles.silent_filter ? class_av_maps(v.features, out.expanded, out.visual) : out.visual;
  out.p_va = visual_guided_distribution(out.av);
  out.weights = toggles.offscreen_filter ? mask_weights(out.visual, batch_eps, toggles.threshold)
                                         : ones_weights(model.classes());
  out.p_av = audio_guided_distribution(model.prototypes.audio, out.expanded, out.weights);
  return out;
}

std::vector<Inference> infer_all(const Model& model, std::span<const world::ScenePair> scenes, Index batch,
                                 const ReferrerToggles& toggles) {
  if (batch < 1) throw ConfigError("inference batch must be positive");
  const auto n = static_cast<Index>(scenes.size());
  std::vector<ClassMaps> lv(scenes.size());
  parallel_for(n, [&](Index i) {
    const auto& s = scenes[static_cast<std::size_t>(i)];
    lv[static_cast<std::size_t>(i)] =
        class_visual_maps(encode_visual(model.encoder, s.visual).features, model.prototypes.visual);
  });
  std::vector<double> eps(scenes.size());
  for (Index start = 0; start < n; start += batch) {
    const Index len = std::min(batch, n - start);
    const double e = batch_threshold(std::span<const ClassMaps>(lv).subspan(static_cast<std::size_t>(start),
                                                                             static_cast<std::size_t>(len)),
                                     toggles.threshold);
    for (Index i = start; i < start + len; ++i) eps[static_cast<std::size_t>(i)] = e;
  }
  std::vector<Inference> out(scenes.size());
  parallel_for(n, [&](Index i) {
    const auto si = static_cast<std::size_t>(i);
    out[si] = infer(model, scenes[si], eps[si], toggles);
  });
  return out;
}

double unconstrained_loss(const Model& model, const world::ScenePair& scene, const Vec& weights,
                          const ReferrerToggles& toggles, EncoderParams* grad) {
  const Index k = model.classes();
  if (weights.size() != k) throw DomainError("unconstrained_loss: weight count mismatch");
  const VisualEncoding venc = encode_visual(model.encoder, scene.visual);
  const AudioEncoding aenc = encode_audio(model.encoder, scene.audio);
  const Mat& fv = venc.features.cells;
  const Mat& pv = model.prototypes.visual.rows;
  const Mat& pa = model.prototypes.audio.rows;
  const Mat f = expanded_for(model, aenc, toggles.identifier);

  const Vec fnorm = checked_row_norms(f, "unconstrained_loss: zero-norm class feature");
  const Mat fhat = fnorm.cwiseInverse().asDiagonal() * f;
  const Mat lv = fv * pv.transpose();
  const Mat cond = fv * fhat.transpose();
  const Mat av = toggles.silent_filter ? Mat(cond.cwiseProduct(lv)) : lv;
  const auto cells = static_cast<double>(fv.rows());
  const Vec p_va = softmax(av.colwise().mean().transpose());

  const Vec sim = (pa.cwiseProduct(fhat)).rowwise().sum();
  const Vec s = weights.cwiseProduct(sim);
  const double norm = s.cwiseAbs().sum();
  const bool fallback = norm < kScoreNormFloor;
  const Vec p_av = softmax(fallback ? sim : Vec(s / norm));
  const double loss = cross_distillation_loss(p_va, p_av);
  if (grad == nullptr) return loss;

  const KlGradient fwd = kl_divergence_grad(p_va, p_av);
  const KlGradient bwd = kl_divergence_grad(p_av, p_va);
  const Vec d_pva = 0.5 * (fwd.d_p + bwd.d_q);
  const Vec d_pav = 0.5 * (fwd.d_q + bwd.d_p);
  const Vec d_gap = softmax_backward(p_va, d_pva);
  const Vec d_scores = softmax_backward(p_av, d_pav);
  Vec d_sim;
  if (fallback) {
    d_sim = d_scores;
  } else {
    const Vec sign = s.unaryExpr([](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); });
    const Vec d_s = d_scores / norm - sign * (d_scores.dot(s) / (norm * norm));
    d_sim = weights.cwiseProduct(d_s);
  }

  const Mat d_av = Mat::Ones(fv.rows(), 1) * (d_gap.transpose() / cells);
  Mat d_lv = d_av;
  Mat d_cond = Mat::Zero(fv.rows(), k);
  if (toggles.silent_filter) {
    d_lv = d_av.cwiseProduct(cond);
    d_cond = d_av.cwiseProduct(lv);
  }
  const Mat d_fv = d_lv * pv + d_cond * fhat;
  const Mat d_fhat = d_cond.transpose() * fv + d_sim.asDiagonal() * pa;
  Mat d_f(k, f.cols());
  for (Index c = 0; c < k; ++c) {
    const auto h = fhat.row(c);
    d_f.row(c) = (d_fhat.row(c) - h * h.dot(d_fhat.row(c))) / fnorm(c);
  }

  visual_backward(model.encoder, scene.visual, venc, d_fv, *grad);
  const Vec d_fa = d_f.colwise().sum().transpose();
  if (toggles.identifier) {
    Vec d_mid = Vec::Zero(aenc.mid.size());
    for (Index c = 0; c < k; ++c)
      d_mid.noalias() += model.steps.steps[static_cast<std::size_t>(c)].weight.transpose() * d_f.row(c).transpose();
    audio_backward(model.encoder, scene.audio, aenc, d_fa, &d_mid, *grad);
  } else {
    audio_backward(model.encoder, scene.audio, aenc, d_fa, nullptr, *grad);
  }
  return loss;
}

Stage2Result train_stage2(const Model& model, std::span<const world::ScenePair> data, const Stage2Options& options,
                          const ReferrerToggles& toggles, const std::function<void(const EpochLog&)>& on_epoch) {
  if (data.empty()) throw ConfigError("stage-2 training needs a non-empty dataset");
  if (options.batch < 1) throw ConfigError("stage-2 batch size must be positive");

  Model current = model;
  Rng rng(options.seed);
  AdamState adam(options.lr);
  Stage2Result result;
  std::vector<Index> order(data.size());
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(options.batch));
      const auto len = static_cast<Index>(end - start);
      std::vector<ClassMaps> lv(static_cast<std::size_t>(len));
      parallel_for(len, [&](Index i) {
        const auto& s = data[static_cast<std::size_t>(order[start + static_cast<std::size_t>(i)])];
        lv[static_cast<std::size_t>(i)] =
            class_visual_maps(encode_visual(current.encoder, s.visual).features, current.prototypes.visual);
      });
      const double eps = batch_threshold(lv, toggles.threshold);

      std::vector<EncoderParams> grads(static_cast<std::size_t>(len));
      std::vector<double> losses(static_cast<std::size_t>(len));
      parallel_for(len, [&](Index i) {
        const auto si = static_cast<std::size_t>(i);
        const auto& s = data[static_cast<std::size_t>(order[start + si])];
        const Vec w = toggles.offscreen_filter ? mask_weights(lv[si], eps, toggles.threshold)
                                               : ones_weights(current.classes());
        grads[si] = EncoderParams::zeros_like(current.encoder);
        losses[si] = unconstrained_loss(current, s, w, toggles, &grads[si]);
      });
      EncoderParams total = EncoderParams::zeros_like(current.encoder);
      for (std::size_t i = 0; i < grads.size(); ++i) {
        epoch_loss += losses[i];
        total.visual.weight += grads[i].visual.weight;
        total.visual.bias += grads[i].visual.bias;
        total.audio_out.weight += grads[i].audio_out.weight;
        total.audio_out.bias += grads[i].audio_out.bias;
      }
      const double scale = 1.0 / static_cast<double>(len);
      std::vector<Block> params = current.encoder.visual_blocks();
      std::vector<Block> gblocks = total.visual_blocks();
      params.push_back(block("encoder.audio_out.weight", current.encoder.audio_out.weight));
      params.push_back(block("encoder.audio_out.bias", current.encoder.audio_out.bias));
      gblocks.push_back(block("encoder.audio_out.weight", total.audio_out.weight));
      gblocks.push_back(block("encoder.audio_out.bias", total.audio_out.bias));
      for (auto& g : gblocks) Eigen::Map<Vec>(g.data, g.size()) *= scale;
      adam.update(params, gblocks);
    }
    EpochLog entry{epoch, epoch_loss / static_cast<double>(data.size()), 0.0, 0};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.encoder = std::move(current.encoder);
  return result;
}

}  // namespace ier
