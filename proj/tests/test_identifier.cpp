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
#include "ier/params.hpp"
#include "ier/prototypes.hpp"
#include "ier/synthetic_world.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

namespace ier {
namespace {

StepParams random_steps(Rng& rng, Index k, Index c, Index c_m) {
  StepParams s = StepParams::zeros(k, c, c_m);
  for (auto& a : s.steps) {
    a.weight = rng.normal_matrix(c, c_m, 0.3);
    a.bias = rng.normal_vector(c, 0.3);
  }
  return s;
}

TEST(DistinguishingStep, Examples) {
  Rng rng(1);
  const Vec mid = rng.normal_vector(4);
  StepParams zero = StepParams::zeros(3, 5, 4);
  EXPECT_EQ(distinguishing_step(zero, mid), Mat::Zero(3, 5));
  const Vec fa = test::random_unit(rng, 5);
  EXPECT_EQ(expand_features(fa, distinguishing_step(zero, mid)), fa.transpose().replicate(3, 1));

  // b_n = P_n - f^a places F_n exactly on the prototype.
  const Mat protos = test::random_unit_rows(rng, 3, 5);
  for (Index n = 0; n < 3; ++n) zero.steps[static_cast<std::size_t>(n)].bias = protos.row(n).transpose() - fa;
  EXPECT_LT((expand_features(fa, distinguishing_step(zero, mid)) - protos).cwiseAbs().maxCoeff(), 1e-15);

  const StepParams s = random_steps(rng, 3, 5, 4);
  Mat bias(3, 5);
  for (Index n = 0; n < 3; ++n) bias.row(n) = s.steps[static_cast<std::size_t>(n)].bias.transpose();
  const Mat d1 = distinguishing_step(s, mid) - bias;
  const Mat d2 = distinguishing_step(s, Vec(2.0 * mid)) - bias;
  EXPECT_LT((d2 - 2.0 * d1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(distinguishing_step(s, Vec::Ones(3)), DomainError);
}

TEST(ExpandFeatures, Examples) {
  Rng rng(2);
  const Vec fa = rng.normal_vector(4);
  Mat delta = Mat::Zero(3, 4);
  delta.row(1) = -fa.transpose();
  const Mat f = expand_features(fa, delta);
  EXPECT_EQ(f.row(0), fa.transpose());
  EXPECT_EQ(f.row(1).cwiseAbs().maxCoeff(), 0.0);
  const Mat a = rng.normal_matrix(3, 4);
  const Mat b = rng.normal_matrix(3, 4);
  EXPECT_LT((expand_features(fa, a + b) - (expand_features(fa, a) + b)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MixedLoss, PerfectStepsGiveNearZero) {
  Rng rng(3);
  const Index k = 6;
  const PrototypeBank bank(Modality::kAudio, test::random_unit_rows(rng, k, 8));
  const Vec fa = test::random_unit(rng, 8);
  const Vec y = (Vec(k) << 1, 0, 0, 1, 0, 1).finished();
  Mat delta(k, 8);
  for (Index n = 0; n < k; ++n) {
    const Vec target = y(n) > 0 ? Vec(bank.rows.row(n).transpose()) : Vec(-bank.rows.row(n).transpose());
    delta.row(n) = (target - fa).transpose();
  }
  EXPECT_LT(mixed_loss(bank, fa, delta, y), 1e-3);
}

TEST(MixedLoss, ZeroStepOnEqualMixtureClosedForm) {
  const Index k = 6;
  const PrototypeBank bank(Modality::kAudio, Mat::Identity(k, 8).eval());
  const Vec mix = (test::unit(8, 0) + test::unit(8, 1)).normalized();
  Vec y = Vec::Zero(k);
  y(0) = y(1) = 1;
  const double pred = remap_similarity(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(pred, 0.8536, 1e-4);
  const double expected = (2.0 * bce(pred, 1) + static_cast<double>(k - 2) * bce(0.5, 0)) / static_cast<double>(k);
  EXPECT_NEAR(mixed_loss(bank, mix, Mat::Zero(k, 8), y), expected, 1e-14);
}

TEST(MixedLoss, TwoClassesBothSounding) {
  const PrototypeBank bank(Modality::kAudio, Mat::Identity(2, 3).eval());
  const Vec fa = test::unit(3, 2);
  Mat delta(2, 3);
  delta.row(0) = (test::unit(3, 0) - fa).transpose();
  delta.row(1) = (test::unit(3, 1) - fa).transpose();
  EXPECT_LT(mixed_loss(bank, fa, delta, Eigen::Vector2d(1, 1)), 1e-6);
}

TEST(MixedLoss, ZeroFeatureIsAnError) {
  const PrototypeBank bank(Modality::kAudio, Mat::Identity(2, 3).eval());
  const Vec fa = test::unit(3, 0);
  Mat delta = Mat::Zero(2, 3);
  delta.row(1) = -fa.transpose();
  EXPECT_THROW(mixed_loss(bank, fa, delta, Eigen::Vector2d(1, 0)), DomainError);
}

TEST(MixedLoss, StepGradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (int draw = 0; draw < 10; ++draw) {
    const Index k = 5, c = 6, cm = 4;
    const PrototypeBank bank(Modality::kAudio, test::random_unit_rows(rng, k, c));
    StepParams steps = random_steps(rng, k, c, cm);
    const Vec mid = rng.normal_vector(cm);
    const Vec fa = test::random_unit(rng, c);
    Vec y = Vec::Zero(k);
    y(rng.index(k)) = 1;
    y(rng.index(k)) = 1;
    Mat gd;
    mixed_loss(bank, fa, distinguishing_step(steps, mid), y, &gd);
    StepParams grad = StepParams::zeros(k, c, cm);
    step_backward(mid, gd, grad);
    const auto loss = [&](const Vec& flat) {
      StepParams probe = steps;
      unflatten(flat, probe.blocks());
      return mixed_loss(bank, fa, distinguishing_step(probe, mid), y);
    };
    EXPECT_LT(grad_check(loss, flatten(steps.blocks()), flatten(grad.blocks())).max_rel_error, 1e-3) << draw;
  }
}

TEST(ClassScores, RemappedCosines) {
  const PrototypeBank bank(Modality::kAudio, Mat::Identity(3, 3).eval());
  Mat f(3, 3);
  f << 1, 0, 0, 0, -1, 0, 1, 0, 0;
  const Vec s = class_scores(bank, f);
  EXPECT_DOUBLE_EQ(s(0), 1.0);
  EXPECT_DOUBLE_EQ(s(1), 0.0);
  EXPECT_DOUBLE_EQ(s(2), 0.5);
}

TEST(Curriculum, Endpoints) {
  for (int total : {2, 3, 10, 30, 31, 100}) {
    const CurriculumState first = curriculum_schedule(0, total);
    const CurriculumState last = curriculum_schedule(total - 1, total);
    EXPECT_EQ(first.p, 0.5);
    EXPECT_EQ(first.m, 2);
    EXPECT_EQ(last.p, 0.9);
    EXPECT_EQ(last.m, 4);
  }
}

TEST(Curriculum, MidpointAndThirds) {
  const CurriculumState mid = curriculum_schedule(15, 31);
  EXPECT_NEAR(mid.p, 0.7, 1e-15);
  EXPECT_EQ(mid.m, 3);
  EXPECT_EQ(curriculum_schedule(9, 30).m, 2);
  EXPECT_EQ(curriculum_schedule(10, 30).m, 3);
  EXPECT_EQ(curriculum_schedule(19, 30).m, 3);
  EXPECT_EQ(curriculum_schedule(20, 30).m, 4);
  EXPECT_EQ(curriculum_schedule(0, 1).p, 0.5);
}

TEST(Curriculum, Monotone) {
  for (int total = 1; total <= 60; ++total) {
    CurriculumState prev = curriculum_schedule(0, total);
    for (int e = 1; e < total; ++e) {
      const CurriculumState s = curriculum_schedule(e, total);
      EXPECT_GE(s.p, prev.p);
      EXPECT_GE(s.m, prev.m);
      EXPECT_GE(s.p, 0.5);
      EXPECT_LE(s.p, 0.9);
      prev = s;
    }
  }
  EXPECT_THROW(curriculum_schedule(0, 0), ConfigError);
}

TEST(MakeMixture, SupportMatchesOrder) {
  Rng rng(5);
  std::vector<Vec> latents;
  std::vector<Index> labels;
  for (Index i = 0; i < 40; ++i) {
    latents.push_back(test::random_unit(rng, 8));
    labels.push_back(i % 6);  // several samples per pseudo-class
  }
  for (int m = 1; m <= 4; ++m)
    for (int t = 0; t < 50; ++t) {
      const Index first = rng.index(40);
      const Mixture mix = make_mixture(latents, labels, 6, m, first, rng);
      EXPECT_EQ(mix.targets.sum(), m);
      EXPECT_EQ(static_cast<int>(mix.members.size()), m);
      EXPECT_EQ(mix.members.front(), first);
      std::set<Index> classes;
      for (Index i : mix.members) classes.insert(labels[static_cast<std::size_t>(i)]);
      EXPECT_EQ(static_cast<int>(classes.size()), m);  // same-class draws were redrawn
      for (Index i : mix.members) EXPECT_EQ(mix.targets(labels[static_cast<std::size_t>(i)]), 1.0);
      EXPECT_NEAR(mix.latent.norm(), 1.0, 1e-12);
    }
}

TEST(MakeMixture, TooFewClasses) {
  Rng rng(6);
  const std::vector<Vec> latents(4, test::unit(3, 0));
  const std::vector<Index> labels = {0, 1, 0, 1};
  EXPECT_THROW(make_mixture(latents, labels, 2, 3, 0, rng), ConfigError);
}

struct TinySetup {
  std::vector<world::ScenePair> data;
  EncoderParams encoder;
  Prototypes prototypes;
};

TinySetup tiny_setup() {
  const world::ClassTable table = world::make_class_table(5, 16, 16, 0);
  world::WorldConfig cfg;
  cfg.grid_h = 5;
  cfg.grid_w = 5;
  cfg.box_min = 2;
  cfg.box_max = 2;
  cfg.sigma = 0.0;
  TinySetup s;
  for (Index i = 0; i < 60; ++i) s.data.push_back(world::synthesize_single_source(table, cfg, i));
  s.encoder = EncoderParams::random(16, 16, 12, 12, 1);
  const SampleFeatures f = encode_samples(s.encoder, s.data);
  s.prototypes = build_prototypes(f.objects, f.audio, 5, 2);
  return s;
}

TEST(TrainIdentifier, ZeroEpochsLeavesSteps) {
  const TinySetup s = tiny_setup();
  IdentifierOptions o;
  o.epochs = 0;
  const IdentifierResult r = train_identifier(s.encoder, StepParams::zeros(5, 12, 12), s.prototypes, s.data, o);
  StepParams steps = r.steps;
  EXPECT_EQ(flatten(steps.blocks()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(TrainIdentifier, DeterministicAndLearns) {
  const TinySetup s = tiny_setup();
  IdentifierOptions o;
  o.epochs = 12;
  o.batch = 8;
  o.lr = 1e-2;
  o.seed = 3;
  IdentifierResult a = train_identifier(s.encoder, StepParams::zeros(5, 12, 12), s.prototypes, s.data, o);
  IdentifierResult b = train_identifier(s.encoder, StepParams::zeros(5, 12, 12), s.prototypes, s.data, o);
  EXPECT_EQ(flatten(a.steps.blocks()), flatten(b.steps.blocks()));
  ASSERT_EQ(a.log.size(), 12u);
  EXPECT_LT(a.log.back().loss, a.log.front().loss);
  EXPECT_EQ(a.log.front().m, 2);
  EXPECT_EQ(a.log.back().m, 4);
  EXPECT_DOUBLE_EQ(a.log.back().p, 0.9);
  // The audio projection is frozen by default.
  EXPECT_EQ(flatten(a.encoder.blocks()), flatten(EncoderParams(s.encoder).blocks()));
  EXPECT_EQ(a.prototypes.assignments, s.prototypes.assignments);
}

}  // namespace
}  // namespace ier
