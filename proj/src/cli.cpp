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

#include "ier/cli.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

namespace ier::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void require_shape(const Mat& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols)
    throw UsageError("checkpoint " + what + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", config expects " + std::to_string(rows) + "x" + std::to_string(cols));
}

std::string log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,loss,p,m\n";
  for (const auto& e : log) os << e.epoch << ',' << fmt_double(e.loss) << ',' << fmt_double(e.p) << ',' << e.m << '\n';
  return os.str();
}

std::string per_sample_csv(const Evaluation& ev, Index k_true) {
  std::ostringstream os;
  os << "split,id,ciou";
  for (Index c = 0; c < k_true; ++c) os << ",iou_" << c;
  os << '\n';
  for (const auto& s : ev.scenes) {
    os << s.split << ',' << s.id << ',' << fmt_double(s.ciou);
    for (Index c = 0; c < k_true; ++c) os << ',' << fmt_double(s.iou(c));
    os << '\n';
  }
  return os.str();
}

std::string diagnostics_json(const Diagnostics& d) {
  json j = {{"silent_gap", d.silent_gap},
            {"sounding_gap", d.sounding_gap},
            {"offscreen_scenes", d.offscreen_scenes},
            {"offscreen_suppressed", d.offscreen_suppressed},
            {"masked_classes", d.masked_classes},
            {"masked_nonzero_scores", d.masked_nonzero_scores},
            {"recall_no_identifier", d.recall_no_identifier},
            {"precision_no_identifier", d.precision_no_identifier}};
  return j.dump(2) + "\n";
}

io::Stage previous(io::Stage stage) {
  return stage == io::Stage::kStage2 ? io::Stage::kIdentifier : io::Stage::kStage1;
}

}  // namespace

int exit_code(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) != nullptr || dynamic_cast<const ConfigError*>(&e) != nullptr)
    return kExitUsage;
  if (dynamic_cast<const IoError*>(&e) != nullptr || dynamic_cast<const FormatError*>(&e) != nullptr) return kExitIo;
  return kExitNumeric;
}

fs::path RunDir::checkpoint(io::Stage stage) const { return root / (stage_name(stage) + ".ckpt"); }

fs::path RunDir::log(io::Stage stage) const { return root / (stage_name(stage) + "_log.csv"); }

io::Stage parse_stage(const std::string& text) {
  if (text == "1") return io::Stage::kStage1;
  if (text == "identifier") return io::Stage::kIdentifier;
  if (text == "2") return io::Stage::kStage2;
  throw UsageError("unknown stage '" + text + "' (expected 1, identifier or 2)");
}

std::string stage_name(io::Stage stage) {
  switch (stage) {
    case io::Stage::kStage1:
      return "stage1";
    case io::Stage::kIdentifier:
      return "identifier";
    case io::Stage::kStage2:
      return "stage2";
  }
  throw UsageError("invalid stage");
}

Dataset load_run_dataset(const ExperimentConfig& config, const RunDir& run) {
  if (!fs::exists(run.data() / "manifest.json"))
    throw UsageError("no dataset in " + run.data().string() + "; run `ier synth` first");
  Dataset d = io::read_dataset(run.data().string());
  if (d.table.classes() != config.k_true || d.table.visual_dim() != config.c_in || d.table.audio_dim() != config.a_in)
    throw UsageError("dataset dimensions do not match the config");
  const auto check_grid = [&](const std::vector<world::ScenePair>& split) {
    for (const auto& s : split)
      if (s.visual.height != config.grid_h || s.visual.width != config.grid_w)
        throw UsageError("dataset grid does not match the config");
  };
  check_grid(d.train_single);
  check_grid(d.test_unconstrained);
  return d;
}

io::Checkpoint load_run_checkpoint(const ExperimentConfig& config, const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("missing checkpoint " + path.string());
  io::Checkpoint ck = io::load_checkpoint(path.string());
  const Model& m = ck.model;
  require_shape(m.encoder.visual.weight, config.c, config.c_in, "visual encoder");
  require_shape(m.encoder.audio_mid.weight, config.c_m, config.a_in, "audio mid layer");
  require_shape(m.encoder.audio_out.weight, config.c, config.c_m, "audio output layer");
  require_shape(m.prototypes.visual.rows, config.clusters(), config.c, "visual prototypes");
  if (ck.config_hash != config_hash(config))
    spdlog::warn("{} was written under a different config", path.string());
  return ck;
}

fs::path latest_checkpoint(const RunDir& run) {
  for (const auto stage : {io::Stage::kStage2, io::Stage::kIdentifier, io::Stage::kStage1})
    if (fs::exists(run.checkpoint(stage))) return run.checkpoint(stage);
  throw UsageError("no checkpoint in " + run.root.string() + "; run `ier train` first");
}

void cmd_synth(const ExperimentConfig& config, const RunDir& run) {
  config.validate();
  const Dataset d = synthesize_dataset(config);
  ensure_dir(run.data());
  io::write_dataset(run.data().string(), config, d);
}

io::Checkpoint cmd_train(const ExperimentConfig& config, const RunDir& run, io::Stage stage) {
  config.validate();
  Model prior;
  if (stage != io::Stage::kStage1) {
    const fs::path need = run.checkpoint(previous(stage));
    if (!fs::exists(need))
      throw UsageError("stage " + stage_name(stage) + " needs " + need.string() + "; train " +
                       stage_name(previous(stage)) + " first");
    prior = load_run_checkpoint(config, need).model;
  }
  const Dataset data = load_run_dataset(config, run);
  if (data.train_single.empty()) throw UsageError("dataset has no single-source training scenes");
  if (stage == io::Stage::kStage2 && data.train_unconstrained.empty())
    throw UsageError("dataset has no unconstrained training scenes");

  std::vector<EpochLog> log;
  const auto record = [&log](const EpochLog& e) {
    log.push_back(e);
    spdlog::info("epoch {} loss {:.6f}", e.epoch, e.loss);
  };
  io::Checkpoint ck;
  ck.config_hash = config_hash(config);
  ck.stage = stage;
  switch (stage) {
    case io::Stage::kStage1:
      ck.model = run_stage1(config, data, record);
      break;
    case io::Stage::kIdentifier:
      ck.model = run_identifier(config, prior, data, record);
      break;
    case io::Stage::kStage2:
      ck.model = run_stage2(config, prior, data, default_toggles(config), record);
      break;
  }
  for (const auto& e : log)
    if (!std::isfinite(e.loss)) throw DomainError("non-finite loss at epoch " + std::to_string(e.epoch));
  ensure_dir(run.root);
  io::save_checkpoint(run.checkpoint(stage).string(), ck);
  io::write_text(run.log(stage).string(), log_csv(log));
  return ck;
}

Evaluation cmd_eval(const ExperimentConfig& config, const RunDir& run, const std::optional<fs::path>& checkpoint) {
  config.validate();
  const fs::path path = checkpoint ? *checkpoint : latest_checkpoint(run);
  const Model model = load_run_checkpoint(config, path).model;
  const Dataset data = load_run_dataset(config, run);
  Evaluation ev = evaluate(config, model, data, default_toggles(config));
  ensure_dir(run.root);
  io::write_text(run.report().string(), io::report_json(ev.report));
  io::write_text(run.diagnostics().string(), diagnostics_json(ev.diagnostics));
  io::write_text(run.per_sample().string(), per_sample_csv(ev, config.k_true));
  return ev;
}

Sweep parse_sweep(const std::string& text) {
  if (text == "filters") return Sweep::kFilters;
  if (text == "threshold") return Sweep::kThreshold;
  if (text == "identifier") return Sweep::kIdentifier;
  throw UsageError("unknown sweep '" + text + "' (expected filters, threshold or identifier)");
}

std::vector<AblationRow> cmd_ablate(const ExperimentConfig& config, const RunDir& run, Sweep sweep) {
  config.validate();
  const Model base = load_run_checkpoint(config, run.checkpoint(io::Stage::kIdentifier)).model;
  const Dataset data = load_run_dataset(config, run);
  std::vector<ReferrerToggles> settings;
  const ReferrerToggles def = default_toggles(config);
  switch (sweep) {
    case Sweep::kFilters:
      for (const bool silent : {true, false})
        for (const bool offscreen : {true, false}) {
          ReferrerToggles t = def;
          t.silent_filter = silent;
          t.offscreen_filter = offscreen;
          settings.push_back(t);
        }
      break;
    case Sweep::kThreshold:
      for (int mode = 1; mode <= 5; ++mode) {
        ReferrerToggles t = def;
        t.threshold.mode = mode;
        settings.push_back(t);
      }
      break;
    case Sweep::kIdentifier:
      for (const bool on : {true, false}) {
        ReferrerToggles t = def;
        t.identifier = on;
        settings.push_back(t);
      }
      break;
  }
  std::vector<AblationRow> rows;
  for (const auto& t : settings) {
    const Model trained = run_stage2(config, base, data, t);
    const Evaluation ev = evaluate(config, trained, data, t);
    rows.push_back(AblationRow{t, ev.report, ev.diagnostics});
  }
  ensure_dir(run.root);
  io::write_text(run.ablation().string(), ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "silent_filter,offscreen_filter,identifier,threshold_mode,iou_05,auc,ciou_03,nmi,precision,recall,map\n";
  for (const auto& r : rows) {
    const auto& m = r.report;
    os << int(r.toggles.silent_filter) << ',' << int(r.toggles.offscreen_filter) << ',' << int(r.toggles.identifier)
       << ',' << r.toggles.threshold.mode << ',' << fmt_double(m.iou_05) << ',' << fmt_double(m.auc) << ','
       << fmt_double(m.ciou_03) << ',' << fmt_double(m.nmi) << ',' << fmt_double(m.precision) << ','
       << fmt_double(m.recall) << ',' << fmt_double(m.map) << '\n';
  }
  return os.str();
}

Index cmd_export_maps(const ExperimentConfig& config, const RunDir& run, const std::optional<fs::path>& checkpoint,
                      Index limit) {
  config.validate();
  if (limit < 0) throw UsageError("limit must be nonnegative");
  const fs::path path = checkpoint ? *checkpoint : latest_checkpoint(run);
  const Model model = load_run_checkpoint(config, path).model;
  const Dataset data = load_run_dataset(config, run);
  const auto& scenes = data.test_unconstrained;
  const std::vector<Inference> inf = infer_all(model, scenes, config.batch, default_toggles(config));
  ensure_dir(run.maps());
  const auto n = std::min<std::size_t>(scenes.size(), static_cast<std::size_t>(limit));
  Index written = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ClassMaps& av = inf[i].av;
    for (Index k = 0; k < av.classes(); ++k) {
      char stem[64];
      std::snprintf(stem, sizeof stem, "scene%04zu_k%02ld", i, static_cast<long>(k));
      const SimilarityMap map = av.map(k);
      io::Tensor t;
      t.dims = {static_cast<std::uint32_t>(map.height), static_cast<std::uint32_t>(map.width)};
      t.values.assign(map.values.data(), map.values.data() + map.values.size());
      io::write_tensor((run.maps() / (std::string(stem) + ".iert")).string(), t);
      io::write_pgm((run.maps() / (std::string(stem) + ".pgm")).string(), map);
      ++written;
    }
  }
  return written;
}

}  // namespace ier::cli
