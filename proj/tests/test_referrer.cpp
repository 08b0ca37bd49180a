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

#include "ier/numerics.hpp"
#include "ier/params.hpp"
#include "ier/referrer.hpp"
#include "ier/synthetic_world.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace ier {
namespace {

ClassMaps constant_maps(Index h, Index w, const Vec& per_class) {
  ClassMaps m;
  m.height = h;
  m.width = w;
  m.values = per_class.transpose().replicate(h * w, 1);
  return m;
}

TEST(ClassVisualMaps, Examples) {
  Rng rng(1);
  const Mat protos = test::random_unit_rows(rng, 3, 4);
  FeatureGrid g = test::random_grid(rng, 2, 3, 4);
  g.cell(1, 2) = protos.row(1);
  const PrototypeBank bank(Modality::kVisual, protos);
  const ClassMaps lv = class_visual_maps(g, bank);
  EXPECT_EQ(lv.classes(), 3);
  EXPECT_NEAR(lv.map(1)(1, 2), 1.0, 1e-15);

  FeatureGrid flat(2, 2, 3);
  flat.cells.col(0).setOnes();
  const PrototypeBank orth(Modality::kVisual, Mat(test::unit(3, 2).transpose()));
  EXPECT_EQ(class_visual_maps(flat, orth).values.cwiseAbs().maxCoeff(), 0.0);

  Mat moved = protos;
  moved.row(0) = test::random_unit(rng, 4).transpose();
  const ClassMaps lv2 = class_visual_maps(g, PrototypeBank(Modality::kVisual, moved));
  EXPECT_EQ(lv2.values.rightCols(2), lv.values.rightCols(2));
}

TEST(ClassAvMaps, Examples) {
  // Cell 0 matches F_0 exactly; cell 1 is orthogonal to it.
  FeatureGrid g(1, 2, 3);
  g.cells << 1, 0, 0, 0, 1, 0;
  Mat f(2, 3);
  f << 0, 0, 1, 1, 0, 0;  // F_0 orthogonal to every cell, F_1 = e1
  ClassMaps lv;
  lv.height = 1;
  lv.width = 2;
  lv.values = Mat::Constant(2, 2, 0.5);
  const ClassMaps av = class_av_maps(g, f, lv);
  EXPECT_EQ(av.map(0).values.cwiseAbs().maxCoeff(), 0.0);  // silent class suppressed
  EXPECT_DOUBLE_EQ(av.map(1)(0, 0), 0.5);

  lv.values(0, 1) = 1.0;
  EXPECT_DOUBLE_EQ(class_av_maps(g, f, lv).map(1)(0, 0), 1.0);

  // Factors 0.8 and 0.5.
  FeatureGrid h(1, 1, 2);
  h.cells << 0.8, 0.6;
  ClassMaps half;
  half.height = half.width = 1;
  half.values = Mat::Constant(1, 1, 0.5);
  EXPECT_NEAR(class_av_maps(h, Mat(test::unit(2, 0).transpose()), half).values(0, 0), 0.4, 1e-15);
}

TEST(VisualGuidedDistribution, Examples) {
  const Vec u = visual_guided_distribution(constant_maps(2, 2, Vec::Constant(4, 0.3)));
  EXPECT_LT((u - Vec::Constant(4, 0.25)).cwiseAbs().maxCoeff(), 1e-15);
  const Vec p = visual_guided_distribution(constant_maps(3, 3, Eigen::Vector2d(1, 0)));
  const double e = std::exp(1.0);
  EXPECT_NEAR(p(0), e / (e + 1), 1e-15);
  EXPECT_NEAR(p(0), 0.7311, 1e-4);
  EXPECT_NEAR(p(1), 0.2689, 1e-4);

  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    ClassMaps m;
    m.height = 3;
    m.width = 3;
    m.values = rng.normal_matrix(9, 5);
    const Vec a = visual_guided_distribution(m);
    m.values.array() += rng.uniform(-3, 3);
    EXPECT_LT((visual_guided_distribution(m) - a).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BatchMeanThreshold, Examples) {
  const std::vector<ClassMaps> two = {constant_maps(2, 2, Vec::Constant(1, 0.2)),
                                      constant_maps(2, 2, Vec::Constant(1, 0.8))};
  const double eps = batch_mean_threshold(two);
  EXPECT_NEAR(eps, 0.5, 1e-15);
  EXPECT_EQ(binarize(two[0].map(0), eps).values.cast<int>().sum(), 0);
  EXPECT_EQ(binarize(two[1].map(0), eps).values.cast<int>().sum(), 4);

  const std::vector<ClassMaps> same = {constant_maps(2, 2, Vec::Constant(3, 0.3)),
                                       constant_maps(2, 2, Vec::Constant(3, 0.3))};
  const double e2 = batch_mean_threshold(same);
  EXPECT_NEAR(e2, 0.3, 1e-15);
  EXPECT_EQ(binarize(same[0].map(1), 0.3).values.cast<int>().sum(), 0);

  Rng rng(3);
  ClassMaps one;
  one.height = 3;
  one.width = 3;
  one.values = rng.normal_matrix(9, 1);
  EXPECT_NEAR(batch_mean_threshold(std::vector<ClassMaps>{one}), global_avg_pool(one.map(0)), 1e-15);
}

TEST(Thresholds, Modes) {
  ClassMaps a;
  a.height = 1;
  a.width = 4;
  a.values.resize(4, 2);
  a.values << 0.9, 0.1, 0.2, 0.1, 0.6, 0.1, 0.1, 0.3;
  const std::vector<ClassMaps> batch = {a};
  ThresholdOptions o;
  o.mode = 1;
  EXPECT_EQ(batch_threshold(batch, o), 0.5);
  EXPECT_EQ(mask_weights(a, 0.5, o), Vec(Eigen::Vector2d(0.5, 0.0)));
  o.mode = 2;
  EXPECT_NEAR(batch_threshold(batch, o), 0.45, 1e-15);
  o.mode = 3;
  EXPECT_TRUE(std::isnan(batch_threshold(batch, o)));
  // Per-map: class 1 max 0.3 -> threshold 0.15 -> cells 0.3 only.
  EXPECT_EQ(mask_weights(a, 0.0, o), Vec(Eigen::Vector2d(0.5, 0.25)));
  o.mode = 4;
  EXPECT_NEAR(mask_weights(a, 0.0, o)(0), 0.45, 1e-15);
  o.mode = 5;
  EXPECT_NEAR(batch_threshold(batch, o), 2.4 / 8.0, 1e-15);
  o.mode = 6;
  EXPECT_THROW(batch_threshold(batch, o), ConfigError);
}

TEST(AudioGuidedDistribution, Examples) {
  const Mat protos = Mat::Identity(2, 3);
  const PrototypeBank bank(Modality::kAudio, protos);
  Mat f(2, 3);
  f << 0.8, 0.6, 0, 0.6, 0.8, 0;
  const AudioGuided g = audio_guided_distribution(bank, f, Eigen::Vector2d(0.5, 0.25));
  EXPECT_NEAR(g.scores(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(g.scores(1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(g.distribution(0), 0.5826, 1e-4);
  EXPECT_NEAR(g.distribution(1), 0.4174, 1e-4);
  EXPECT_FALSE(g.fallback);

  const AudioGuided masked = audio_guided_distribution(bank, f, Eigen::Vector2d(0.5, 0.0));
  EXPECT_EQ(masked.scores(1), 0.0);

  const AudioGuided eq = audio_guided_distribution(bank, f, Eigen::Vector2d(0.5, 0.5));
  EXPECT_NEAR(eq.distribution(0), 0.5, 1e-15);

  const AudioGuided fb = audio_guided_distribution(bank, f, Eigen::Vector2d(0.0, 0.0));
  EXPECT_TRUE(fb.fallback);
  EXPECT_LT((fb.distribution - softmax(Eigen::Vector2d(0.8, 0.8))).norm(), 1e-15);
}

TEST(AudioGuidedDistribution, MaskedClassStaysAtTheFloor) {
  // With nonnegative similarities, an all-zero mask puts the class at or below
  // every class with a positive score, and at or below 1/K.
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const Index k = 2 + rng.index(10);
    const Index c = 4;
    Mat protos = Mat::Zero(k, c + k);
    Mat f = Mat::Zero(k, c + k);
    for (Index n = 0; n < k; ++n) {
      protos(n, c + n) = 1.0;
      f(n, c + n) = rng.uniform(0.0, 1.0);
      f.row(n).head(c) = rng.normal_vector(c).transpose();
    }
    Vec w(k);
    for (Index n = 0; n < k; ++n) w(n) = rng.uniform(0.0, 1.0);
    const Index j = rng.index(k);
    w(j) = 0.0;
    const AudioGuided g = audio_guided_distribution(PrototypeBank(Modality::kAudio, protos), f, w);
    EXPECT_EQ(g.scores(j), 0.0);
    EXPECT_LE(g.distribution(j), 1.0 / static_cast<double>(k) + 1e-15);
    for (Index n = 0; n < k; ++n)
      if (g.scores(n) > 0.0) {
        EXPECT_LE(g.distribution(j), g.distribution(n));
      }
  }
}

TEST(CrossDistillation, Examples) {
  const Vec p = Eigen::Vector2d(0.9, 0.1);
  const Vec q = Eigen::Vector2d(0.5, 0.5);
  EXPECT_EQ(cross_distillation_loss(p, p), 0.0);
  EXPECT_EQ(cross_distillation_loss(p, q), cross_distillation_loss(q, p));
  EXPECT_NEAR(cross_distillation_loss(p, q), 0.4394, 1e-4);
  EXPECT_NEAR(cross_distillation_loss(p, q), 0.5 * kl_divergence(p, q) + 0.5 * kl_divergence(q, p), 1e-15);
}

TEST(CrossDistillation, NonnegativeAndSymmetric) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const Vec p = softmax(rng.normal_vector(6, 2.0));
    const Vec q = softmax(rng.normal_vector(6, 2.0));
    EXPECT_GE(cross_distillation_loss(p, q), 0.0);
    EXPECT_EQ(cross_distillation_loss(p, q), cross_distillation_loss(q, p));
  }
}

struct TinyWorld {
  Model model;
  std::vector<world::ScenePair> scenes;
};

TinyWorld tiny_world(std::uint64_t seed) {
  Rng rng(seed);
  const world::ClassTable table = world::make_class_table(6, 10, 10, seed);
  world::WorldConfig cfg;
  cfg.grid_h = 5;
  cfg.grid_w = 5;
  cfg.box_min = 1;
  cfg.box_max = 2;
  cfg.sigma = 0.2;
  TinyWorld w;
  for (Index i = 0; i < 12; ++i) w.scenes.push_back(world::synthesize_unconstrained(table, cfg, seed * 100 + i, 10.0));
  const Index k = 4, c = 6, cm = 5;
  w.model.encoder = EncoderParams::random(10, 10, cm, c, seed);
  w.model.prototypes.visual = PrototypeBank(Modality::kVisual, test::random_unit_rows(rng, k, c));
  w.model.prototypes.audio = PrototypeBank(Modality::kAudio, test::random_unit_rows(rng, k, c));
  w.model.steps = StepParams::zeros(k, c, cm);
  for (auto& s : w.model.steps.steps) {
    s.weight = rng.normal_matrix(c, cm, 0.2);
    s.bias = rng.normal_vector(c, 0.2);
  }
  return w;
}

TEST(UnconstrainedLoss, GradientMatchesFiniteDifferences) {
  for (const bool silent : {true, false})
    for (const bool ident : {true, false})
      for (std::uint64_t draw = 0; draw < 10; ++draw) {
        TinyWorld w = tiny_world(draw + 1);
        Rng rng(draw);
        ReferrerToggles t;
        t.silent_filter = silent;
        t.identifier = ident;
        const auto& scene = w.scenes[draw % w.scenes.size()];
        Vec weights(w.model.classes());
        for (Index k = 0; k < weights.size(); ++k) weights(k) = rng.uniform(0.1, 1.0);
        EncoderParams grad = EncoderParams::zeros_like(w.model.encoder);
        unconstrained_loss(w.model, scene, weights, t, &grad);
        const auto loss = [&](const Vec& flat) {
          Model probe = w.model;
          unflatten(flat, probe.encoder.blocks());
          return unconstrained_loss(probe, scene, weights, t, nullptr);
        };
        const auto r = grad_check(loss, flatten(w.model.encoder.blocks()), flatten(grad.blocks()));
        EXPECT_LT(r.max_rel_error, 1e-3) << "silent " << silent << " identifier " << ident << " draw " << draw;
      }
}

TEST(Infer, DeterministicAndConsistent) {
  const TinyWorld w = tiny_world(7);
  ReferrerToggles t;
  const auto a = infer_all(w.model, w.scenes, 4, t);
  const auto b = infer_all(w.model, w.scenes, 4, t);
  ASSERT_EQ(a.size(), w.scenes.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].av.values, b[i].av.values);
    EXPECT_EQ(a[i].p_va, b[i].p_va);
    EXPECT_EQ(a[i].p_av.distribution, b[i].p_av.distribution);
    EXPECT_NEAR(a[i].p_va.sum(), 1.0, 1e-12);
    EXPECT_NEAR(a[i].p_av.distribution.sum(), 1.0, 1e-12);
    for (Index k = 0; k < w.model.classes(); ++k)
      if (a[i].weights(k) == 0.0) {
        EXPECT_EQ(a[i].p_av.scores(k), 0.0);
      }
  }
  // Silent filter off: the AV maps are the visual maps.
  t.silent_filter = false;
  const auto c = infer_all(w.model, w.scenes, 4, t);
  EXPECT_EQ(c[0].av.values, c[0].visual.values);
}

TEST(TrainStage2, ZeroEpochsAndFrozenParts) {
  const TinyWorld w = tiny_world(8);
  Stage2Options o;
  o.epochs = 0;
  EncoderParams before = w.model.encoder;
  EncoderParams same = train_stage2(w.model, w.scenes, o, ReferrerToggles{}).encoder;
  EXPECT_EQ(flatten(same.blocks()), flatten(before.blocks()));

  o.epochs = 3;
  o.batch = 4;
  o.lr = 1e-2;
  const Model copy = w.model;
  const Stage2Result r = train_stage2(w.model, w.scenes, o, ReferrerToggles{});
  EXPECT_EQ(r.encoder.audio_mid.weight, copy.encoder.audio_mid.weight);
  EXPECT_EQ(r.encoder.audio_mid.bias, copy.encoder.audio_mid.bias);
  EXPECT_NE(r.encoder.visual.weight, copy.encoder.visual.weight);
  EXPECT_NE(r.encoder.audio_out.weight, copy.encoder.audio_out.weight);
  // The model passed in, including its prototypes and steps, is untouched.
  EXPECT_EQ(w.model.prototypes.audio.rows, copy.prototypes.audio.rows);
  EXPECT_EQ(w.model.prototypes.visual.rows, copy.prototypes.visual.rows);
}

TEST(TrainStage2, LossDecreases) {
  const TinyWorld w = tiny_world(9);
  Stage2Options o;
  o.epochs = 20;
  o.batch = 4;
  o.lr = 1e-2;
  const Stage2Result r = train_stage2(w.model, w.scenes, o, ReferrerToggles{});
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 5; ++i) {
    head += r.log[static_cast<std::size_t>(i)].loss;
    tail += r.log[r.log.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  EXPECT_LT(tail, head);
}

}  // namespace
}  // namespace ier
