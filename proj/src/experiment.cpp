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


#include "ier/experiment.hpp"

#include "ier/identifier.hpp"
#include "ier/numerics.hpp"
#include "ier/parallel.hpp"
#include "ier/random.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace ier {

namespace {

using nlohmann::json;

// Seed streams for the independent stochastic parts of an experiment.
enum class Stream : std::uint64_t {
  kTrainSingle = 1,
  kTrainUnconstrained,
  kTestSingle,
  kTestUnconstrained,
  kEncoderInit,
  kStage1,
  kPrototypes,
  kIdentifier,
  kStage2,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(s) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct Field {
  std::function<void(ExperimentConfig&, const json&)> read;
  std::function<json(const ExperimentConfig&)> write;
};

template <typename T>
Field field(T ExperimentConfig::*member) {
  return Field{[member](ExperimentConfig& c, const json& v) {
                 if constexpr (std::is_same_v<T, bool>) {
                   if (!v.is_boolean()) throw ConfigError("expected a boolean");
                   c.*member = v.get<bool>();
                 } else if constexpr (std::is_same_v<T, double>) {
                   if (!v.is_number()) throw ConfigError("expected a number");
                   c.*member = v.get<double>();
                 } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                   if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
                   c.*member = v.get<std::uint64_t>();
                 } else {
                   if (!v.is_number_integer()) throw ConfigError("expected an integer");
                   c.*member = v.get<T>();
                 }
               },
               [member](const ExperimentConfig& c) { return json(c.*member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed", field(&ExperimentConfig::seed)},
      {"k_true", field(&ExperimentConfig::k_true)},
      {"grid_h", field(&ExperimentConfig::grid_h)},
      {"grid_w", field(&ExperimentConfig::grid_w)},
      {"c_in", field(&ExperimentConfig::c_in)},
      {"a_in", field(&ExperimentConfig::a_in)},
      {"sigma", field(&ExperimentConfig::sigma)},
      {"test_sigma", field(&ExperimentConfig::test_sigma)},
      {"volume_ratio_max", field(&ExperimentConfig::volume_ratio_max)},
      {"box_min", field(&ExperimentConfig::box_min)},
      {"box_max", field(&ExperimentConfig::box_max)},
      {"sounding", field(&ExperimentConfig::sounding)},
      {"silent", field(&ExperimentConfig::silent)},
      {"offscreen", field(&ExperimentConfig::offscreen)},
      {"n_single", field(&ExperimentConfig::n_single)},
      {"n_unconstrained", field(&ExperimentConfig::n_unconstrained)},
      {"n_test_single", field(&ExperimentConfig::n_test_single)},
      {"n_test_unconstrained", field(&ExperimentConfig::n_test_unconstrained)},
      {"c", field(&ExperimentConfig::c)},
      {"c_m", field(&ExperimentConfig::c_m)},
      {"k", field(&ExperimentConfig::k)},
      {"batch", field(&ExperimentConfig::batch)},
      {"stage1_epochs", field(&ExperimentConfig::stage1_epochs)},
      {"stage1_lr", field(&ExperimentConfig::stage1_lr)},
      {"stage1_warmup", field(&ExperimentConfig::stage1_warmup)},
      {"identifier_epochs", field(&ExperimentConfig::identifier_epochs)},
      {"identifier_lr", field(&ExperimentConfig::identifier_lr)},
      {"identifier_train_audio", field(&ExperimentConfig::identifier_train_audio)},
      {"stage2_epochs", field(&ExperimentConfig::stage2_epochs)},
      {"stage2_lr", field(&ExperimentConfig::stage2_lr)},
      {"threshold_mode", field(&ExperimentConfig::threshold_mode)},
      {"threshold_constant", field(&ExperimentConfig::threshold_constant)},
      {"threshold_ratio", field(&ExperimentConfig::threshold_ratio)},
      {"zeta", field(&ExperimentConfig::zeta)},
      {"iou_binarize_ratio", field(&ExperimentConfig::iou_binarize_ratio)},
  };
  return table;
}

std::vector<world::ScenePair> synth_split(const world::ClassTable& table, const world::WorldConfig& wc, Index count,
                                          std::uint64_t base, bool unconstrained, double ratio) {
  std::vector<world::ScenePair> out(static_cast<std::size_t>(count));
  parallel_for(count, [&](Index i) {
    const std::uint64_t s = derive_seed(base, static_cast<std::uint64_t>(i));
    out[static_cast<std::size_t>(i)] = unconstrained ? world::synthesize_unconstrained(table, wc, s, ratio)
                                                     : world::synthesize_single_source(table, wc, s);
  });
  return out;
}

}  // namespace

world::WorldConfig ExperimentConfig::world(double noise) const {
  world::WorldConfig w;
  w.grid_h = grid_h;
  w.grid_w = grid_w;
  w.sigma = noise;
  w.volume_ratio_max = volume_ratio_max;
  w.box_min = box_min;
  w.box_max = box_max;
  w.sounding = sounding;
  w.silent = silent;
  w.offscreen = offscreen;
  return w;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(k_true >= 1, "k_true must be positive");
  require(grid_h >= 1 && grid_w >= 1, "grid dimensions must be positive");
  require(c_in >= 1 && a_in >= 1 && c >= 1 && c_m >= 1, "feature dimensions must be positive");
  require(sigma >= 0.0 && test_sigma >= 0.0, "noise levels must be non-negative");
  require(volume_ratio_max >= 1.0, "volume_ratio_max must be at least 1");
  require(box_min >= 1 && box_max >= box_min, "box sizes must satisfy 1 <= box_min <= box_max");
  require(box_max <= grid_h && box_max <= grid_w, "boxes must fit the grid");
  require(sounding >= 1 && silent >= 0 && offscreen >= 0, "scene composition counts are invalid");
  require(n_single >= 1 && n_unconstrained >= 1 && n_test_single >= 1 && n_test_unconstrained >= 1,
          "dataset counts must be positive");
  require(k >= 0, "k must be non-negative");
  require(clusters() >= 2, "at least two pseudo-classes are required");
  require(clusters() <= n_single, "more pseudo-classes than single-source samples");
  require(sounding + silent + offscreen <= k_true, "unconstrained scenes need more distinct classes");
  require(batch >= 2, "batch must be at least 2");
  require(stage1_epochs >= 0 && identifier_epochs >= 0 && stage2_epochs >= 0, "epoch counts must be non-negative");
  require(stage1_warmup >= 0, "stage1_warmup must be non-negative");
  require(stage1_lr > 0.0 && identifier_lr > 0.0 && stage2_lr > 0.0, "learning rates must be positive");
  require(threshold_mode >= 1 && threshold_mode <= 5, "threshold_mode must be in 1..5");
  require(threshold_ratio > 0.0, "threshold_ratio must be positive");
  require(zeta >= 0.0 && zeta <= 1.0, "zeta must be in [0, 1]");
  require(iou_binarize_ratio >= 0.0 && iou_binarize_ratio < 1.0, "iou_binarize_ratio must be in [0, 1)");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig config;
  for (const auto& [key, value] : doc.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key: " + key);
    try {
      it->second.read(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config key " + key + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError("config key " + key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& config) {
  json doc = json::object();
  for (const auto& [key, f] : fields()) doc[key] = f.write(config);
  return doc.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  json doc = json::object();
  for (const auto& [key, f] : fields()) doc[key] = f.write(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Dataset synthesize_dataset(const ExperimentConfig& config) {
  config.validate();
  Dataset d;
  d.table = world::make_class_table(config.k_true, config.c_in, config.a_in, config.seed);
  const auto train = config.world(config.sigma);
  const auto test = config.world(config.test_sigma);
  const double ratio = config.volume_ratio_max;
  d.train_single = synth_split(d.table, train, config.n_single, stream_seed(config.seed, Stream::kTrainSingle), false, ratio);
  d.train_unconstrained = synth_split(d.table, train, config.n_unconstrained,
                                      stream_seed(config.seed, Stream::kTrainUnconstrained), true, ratio);
  d.test_single = synth_split(d.table, test, config.n_test_single, stream_seed(config.seed, Stream::kTestSingle), false, ratio);
  d.test_unconstrained = synth_split(d.table, test, config.n_test_unconstrained,
                                     stream_seed(config.seed, Stream::kTestUnconstrained), true, ratio);
  return d;
}

Model run_stage1(const ExperimentConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
  if (data.train_single.empty()) throw UsageError("stage 1 needs single-source training data");
  EncoderParams init = EncoderParams::random(config.c_in, config.a_in, config.c_m, config.c,
                                             stream_seed(config.seed, Stream::kEncoderInit));
  Stage1Options opts;
  opts.epochs = config.stage1_epochs;
  opts.batch = config.batch;
  opts.lr = config.stage1_lr;
  opts.warmup_epochs = config.stage1_warmup;
  opts.seed = stream_seed(config.seed, Stream::kStage1);
  Model model;
  model.encoder = train_stage1(std::move(init), data.train_single, opts, on_epoch).params;
  const SampleFeatures f = encode_samples(model.encoder, data.train_single);
  model.prototypes = build_prototypes(f.objects, f.audio, config.clusters(), stream_seed(config.seed, Stream::kPrototypes));
  model.steps = StepParams::zeros(config.clusters(), config.c, config.c_m);
  return model;
}

Model run_identifier(const ExperimentConfig& config, const Model& model, const Dataset& data,
                     const EpochCallback& on_epoch) {
  IdentifierOptions opts;
  opts.epochs = config.identifier_epochs;
  opts.batch = config.batch;
  opts.lr = config.identifier_lr;
  opts.train_audio = config.identifier_train_audio;
  opts.seed = stream_seed(config.seed, Stream::kIdentifier);
  IdentifierResult r = train_identifier(model.encoder, model.steps, model.prototypes, data.train_single, opts, on_epoch);
  return Model{std::move(r.encoder), std::move(r.prototypes), std::move(r.steps)};
}

Model run_stage2(const ExperimentConfig& config, const Model& model, const Dataset& data,
                 const ReferrerToggles& toggles, const EpochCallback& on_epoch) {
  Stage2Options opts;
  opts.epochs = config.stage2_epochs;
  opts.batch = config.batch;
  opts.lr = config.stage2_lr;
  opts.seed = stream_seed(config.seed, Stream::kStage2);
  Model out = model;
  out.encoder = train_stage2(model, data.train_unconstrained, opts, toggles, on_epoch).encoder;
  return out;
}

ReferrerToggles default_toggles(const ExperimentConfig& config) {
  ReferrerToggles t;
  t.threshold.mode = config.threshold_mode;
  t.threshold.constant = config.threshold_constant;
  t.threshold.ratio = config.threshold_ratio;
  return t;
}

SimilarityMap category_map(const ClassMaps& av, const std::vector<Index>& categories, Index category) {
  SimilarityMap out(av.height, av.width);
  bool any = false;
  for (Index k = 0; k < av.classes(); ++k) {
    if (categories[static_cast<std::size_t>(k)] != category) continue;
    out.values = any ? Vec(out.values.cwiseMax(av.values.col(k))) : Vec(av.values.col(k));
    any = true;
  }
  return out;
}

Vec category_scores(const Vec& cluster_scores, const std::vector<Index>& categories, Index k_true) {
  Vec out = Vec::Zero(k_true);
  for (Index k = 0; k < cluster_scores.size(); ++k) {
    const Index c = categories[static_cast<std::size_t>(k)];
    if (c == metrics::kUnknownCategory) continue;
    out(c) = std::max(out(c), cluster_scores(k));
  }
  return out;
}

Evaluation evaluate(const ExperimentConfig& config, const Model& model, const Dataset& data,
                    const ReferrerToggles& toggles) {
  const Index kt = config.k_true;
  const Index k = model.classes();
  Evaluation ev;
  std::vector<Index> train_labels;
  for (const auto& s : data.train_single) train_labels.push_back(s.primary_class());
  ev.categories = metrics::cluster_to_category(model.prototypes.assignments, train_labels, k);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Unconstrained scenes: CIoU, AUC, multi-label audio classification.
  const auto& scenes = data.test_unconstrained;
  const std::vector<Inference> inf = infer_all(model, scenes, config.batch, toggles);
  std::vector<double> cious;
  Mat scores(static_cast<Index>(scenes.size()), kt);
  Mat truths = Mat::Zero(static_cast<Index>(scenes.size()), kt);
  double precision = 0.0;
  double recall = 0.0;
  double silent_sum = 0.0;
  double sounding_sum = 0.0;
  Index silent_n = 0;
  Index sounding_n = 0;
  Diagnostics& dg = ev.diagnostics;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    const auto& r = inf[i];
    SceneScore sc{"test_unconstrained", static_cast<Index>(i), 0.0, Vec::Constant(kt, nan)};
    for (Index t = 0; t < kt; ++t) {
      if (s.labels(t) == 0.0) continue;
      const auto boxes = s.boxes_for(t);
      const auto pred = metrics::binarize_prediction(category_map(r.av, ev.categories, t), config.iou_binarize_ratio);
      sc.iou(t) = metrics::iou(pred, metrics::box_mask(boxes, s.visual.height, s.visual.width));
    }
    sc.ciou = metrics::ciou(sc.iou.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; }), s.labels);
    cious.push_back(sc.ciou);
    ev.scenes.push_back(std::move(sc));

    for (const auto& obj : s.spec.objects) {
      const double gap = category_map(r.av, ev.categories, obj.class_id).values.mean();
      if (obj.sounding) {
        sounding_sum += gap;
        ++sounding_n;
      } else {
        silent_sum += gap;
        ++silent_n;
      }
    }

    const Vec mass = category_scores(r.p_av.distribution, ev.categories, kt);
    if (!s.spec.offscreen.empty()) {
      double off = 0.0;
      double on = 0.0;
      Index on_n = 0;
      for (const auto& o : s.spec.offscreen) off += mass(o.class_id);
      for (const auto& obj : s.spec.objects)
        if (obj.sounding) {
          on += mass(obj.class_id);
          ++on_n;
        }
      ++dg.offscreen_scenes;
      if (off / static_cast<double>(s.spec.offscreen.size()) < on / static_cast<double>(on_n)) ++dg.offscreen_suppressed;
    }
    if (toggles.offscreen_filter) {
      for (Index c = 0; c < k; ++c) {
        if (r.weights(c) != 0.0) continue;
        ++dg.masked_classes;
        if (r.p_av.scores(c) != 0.0) ++dg.masked_nonzero_scores;
      }
    }

    Vec truth = Vec::Zero(kt);
    for (const Index c : s.audible_classes()) truth(c) = 1.0;
    const Vec cs = category_scores(class_scores(model.prototypes.audio, r.expanded), ev.categories, kt);
    const auto pr = metrics::multilabel_pr(cs, truth, config.zeta);
    precision += pr.precision;
    recall += pr.recall;
    scores.row(static_cast<Index>(i)) = cs.transpose();
    truths.row(static_cast<Index>(i)) = truth.transpose();

    const AudioEncoding a = encode_audio(model.encoder, s.audio);
    const Mat flat = a.feature.transpose().replicate(k, 1);
    const auto base = metrics::multilabel_pr(
        category_scores(class_scores(model.prototypes.audio, flat), ev.categories, kt), truth, config.zeta);
    dg.precision_no_identifier += base.precision;
    dg.recall_no_identifier += base.recall;
  }
  const auto nu = static_cast<double>(scenes.size());
  ev.report.ciou_03 = static_cast<double>(std::count_if(cious.begin(), cious.end(), [](double v) { return v >= 0.3; })) / nu;
  ev.report.auc = metrics::auc(cious);
  ev.report.precision = precision / nu;
  ev.report.recall = recall / nu;
  ev.report.map = metrics::map_metric(scores, truths);
  dg.precision_no_identifier /= nu;
  dg.recall_no_identifier /= nu;
  dg.silent_gap = silent_n > 0 ? silent_sum / static_cast<double>(silent_n) : 0.0;
  dg.sounding_gap = sounding_n > 0 ? sounding_sum / static_cast<double>(sounding_n) : 0.0;

  // Single-source scenes: IoU@0.5 and NMI of nearest visual prototypes.
  const auto& singles = data.test_single;
  const std::vector<Inference> sinf = infer_all(model, singles, config.batch, toggles);
  Index hits = 0;
  std::vector<Index> predicted;
  std::vector<Index> truth_labels;
  for (std::size_t i = 0; i < singles.size(); ++i) {
    const auto& s = singles[i];
    const Index t = s.primary_class();
    const auto pred = metrics::binarize_prediction(category_map(sinf[i].av, ev.categories, t), config.iou_binarize_ratio);
    const double v = metrics::iou(pred, metrics::box_mask(s.boxes_for(t), s.visual.height, s.visual.width));
    if (v >= 0.5) ++hits;
    SceneScore sc{"test_single", static_cast<Index>(i), v, Vec::Constant(kt, nan)};
    sc.iou(t) = v;
    ev.scenes.push_back(std::move(sc));

    const Vec a = encode_audio(model.encoder, s.audio).feature;
    const Vec obj = object_feature(encode_visual(model.encoder, s.visual).features, a);
    Index best = 0;
    (model.prototypes.visual.rows * obj).maxCoeff(&best);
    predicted.push_back(best);
    truth_labels.push_back(t);
  }
  ev.report.iou_05 = static_cast<double>(hits) / static_cast<double>(singles.size());
  ev.report.nmi = metrics::nmi(predicted, truth_labels);
  return ev;
}

}  // namespace ier
