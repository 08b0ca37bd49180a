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

#include "ier/synthetic_world.hpp"

#include <algorithm>
#include <numeric>

namespace ier::world {
namespace {

Vec draw_separated(const Mat& existing, Index count, Index dim, Rng& rng, const char* what) {
  for (int round = 0; round < kClassRejectionRounds; ++round) {
    Vec v = rng.normal_vector(dim);
    const double n = v.norm();
    if (!(n > 0.0)) continue;
    v /= n;
    bool ok = true;
    for (Index j = 0; j < count && ok; ++j) ok = existing.row(j).dot(v) <= kMaxLatentCosine;
    if (ok) return v;
  }
  throw ConfigError(std::string("make_class_table: could not separate ") + what + " latents; increase the dimension");
}

Box random_box(const WorldConfig& config, Rng& rng) {
  const Index hmax = std::min(config.box_max, config.grid_h);
  const Index wmax = std::min(config.box_max, config.grid_w);
  const Index hmin = std::min(config.box_min, hmax);
  const Index wmin = std::min(config.box_min, wmax);
  const Index h = hmin + rng.index(hmax - hmin + 1);
  const Index w = wmin + rng.index(wmax - wmin + 1);
  const Index y0 = rng.index(config.grid_h - h + 1);
  const Index x0 = rng.index(config.grid_w - w + 1);
  return Box{y0, x0, y0 + h - 1, x0 + w - 1};
}

FeatureGrid render(const ClassTable& table, const WorldConfig& config, const SceneSpec& spec, Rng& rng) {
  FeatureGrid grid(config.grid_h, config.grid_w, table.visual_dim());
  if (spec.noise > 0.0) grid.cells = rng.normal_matrix(grid.size(), grid.channels(), spec.noise);
  for (const auto& obj : spec.objects)
    for (Index y = obj.box.y0; y <= obj.box.y1; ++y)
      for (Index x = obj.box.x0; x <= obj.box.x1; ++x) grid.cell(y, x) += table.visual.row(obj.class_id);
  return grid;
}

void check_config(const WorldConfig& config) {
  if (config.grid_h < 1 || config.grid_w < 1) throw ConfigError("grid dimensions must be positive");
  if (config.box_min < 1 || config.box_max < config.box_min) throw ConfigError("invalid box size range");
  if (config.sigma < 0.0) throw ConfigError("noise level must be non-negative");
}

}  // namespace

std::vector<Box> ScenePair::boxes_for(Index class_id) const {
  std::vector<Box> out;
  for (const auto& obj : spec.objects)
    if (obj.class_id == class_id) out.push_back(obj.box);
  return out;
}

std::vector<Index> ScenePair::audible_classes() const {
  std::vector<Index> out;
  for (const auto& obj : spec.objects)
    if (obj.sounding) out.push_back(obj.class_id);
  for (const auto& off : spec.offscreen) out.push_back(off.class_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ClassTable make_class_table(Index k_true, Index c_in, Index a_in, std::uint64_t seed) {
  if (k_true < 1 || c_in < 1 || a_in < 1) throw ConfigError("make_class_table: sizes must be positive");
  Rng rng(seed);
  ClassTable table{Mat::Zero(k_true, c_in), Mat::Zero(k_true, a_in)};
  for (Index k = 0; k < k_true; ++k) {
    table.visual.row(k) = draw_separated(table.visual, k, c_in, rng, "visual").transpose();
    table.audio.row(k) = draw_separated(table.audio, k, a_in, rng, "audio").transpose();
  }
  return table;
}

Vec mix_audio_latents(std::span<const AudioEntry> entries, double sigma, Rng& rng) {
  if (entries.empty()) throw DomainError("mix_audio_latents: no entries");
  Vec sum = Vec::Zero(entries.front().latent.size());
  for (const auto& e : entries) {
    if (e.latent.size() != sum.size()) throw DomainError("mix_audio_latents: latent size mismatch");
    sum += e.volume * e.latent;
  }
  if (sigma > 0.0) sum += rng.normal_vector(sum.size(), sigma);
  const double n = sum.norm();
  if (!(n > 0.0)) throw DomainError("mix_audio_latents: mixture sums to zero");
  return sum / n;
}

ScenePair synthesize_single_source(const ClassTable& table, const WorldConfig& config, std::uint64_t seed) {
  check_config(config);
  Rng rng(seed);
  ScenePair pair;
  const Index c = rng.index(table.classes());
  pair.spec.noise = config.sigma;
  pair.spec.objects.push_back(SceneObject{c, random_box(config, rng), true, 1.0});
  pair.visual = render(table, config, pair.spec, rng);
  const AudioEntry entry{table.audio.row(c).transpose(), 1.0};
  pair.audio = mix_audio_latents(std::span(&entry, 1), config.sigma, rng);
  pair.labels = Vec::Zero(table.classes());
  pair.labels(c) = 1.0;
  return pair;
}

ScenePair synthesize_unconstrained(const ClassTable& table, const WorldConfig& config, std::uint64_t seed,
                                   double volume_ratio_max) {
  check_config(config);
  if (!(volume_ratio_max >= 1.0)) throw ConfigError("volume_ratio_max must be >= 1");
  const Index on_screen = config.sounding + config.silent;
  if (config.sounding < 1) throw ConfigError("unconstrained scenes need at least one sounding object");
  if (table.classes() < on_screen + config.offscreen)
    throw ConfigError("unconstrained scenes need at least " + std::to_string(on_screen + config.offscreen) +
                      " classes");

  Rng rng(seed);
  std::vector<Index> classes(static_cast<std::size_t>(table.classes()));
  std::iota(classes.begin(), classes.end(), Index{0});
  std::shuffle(classes.begin(), classes.end(), rng.engine());

  ScenePair pair;
  pair.spec.noise = config.sigma;
  const double lo = 1.0 / volume_ratio_max;
  for (Index i = 0; i < on_screen; ++i) {
    Box box;
    bool placed = false;
    for (int attempt = 0; attempt < kBoxPlacementTries && !placed; ++attempt) {
      box = random_box(config, rng);
      placed = std::none_of(pair.spec.objects.begin(), pair.spec.objects.end(),
                            [&](const SceneObject& o) { return o.box.overlaps(box); });
    }
    if (!placed) throw ConfigError("synthesize_unconstrained: cannot place non-overlapping boxes");
    const bool sounding = i < config.sounding;
    const double volume = sounding ? rng.log_uniform(lo, 1.0) : 0.0;
    pair.spec.objects.push_back(SceneObject{classes[static_cast<std::size_t>(i)], box, sounding, volume});
  }
  for (Index i = 0; i < config.offscreen; ++i)
    pair.spec.offscreen.push_back(
        OffscreenSource{classes[static_cast<std::size_t>(on_screen + i)], rng.log_uniform(lo, 1.0)});

  pair.visual = render(table, config, pair.spec, rng);
  std::vector<AudioEntry> entries;
  pair.labels = Vec::Zero(table.classes());
  for (const auto& obj : pair.spec.objects) {
    if (!obj.sounding) continue;
    entries.push_back(AudioEntry{table.audio.row(obj.class_id).transpose(), obj.volume});
    pair.labels(obj.class_id) = 1.0;
  }
  for (const auto& off : pair.spec.offscreen)
    entries.push_back(AudioEntry{table.audio.row(off.class_id).transpose(), off.volume});
  pair.audio = mix_audio_latents(entries, config.sigma, rng);
  return pair;
}

}  // namespace ier::world
