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


#include "ier/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ier::io {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr char kTensorMagic[4] = {'I', 'E', 'R', 'T'};
constexpr char kCheckpointMagic[4] = {'I', 'E', 'R', '1'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <typename T>
  T get() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  void take(void* out, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("unexpected end of file");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

struct Named {
  std::string name;
  Mat value;
};

std::vector<Named> model_tensors(const Model& m) {
  std::vector<Named> out;
  auto add_affine = [&out](const std::string& name, const Affine& a) {
    out.push_back({name + ".weight", a.weight});
    out.push_back({name + ".bias", a.bias});
  };
  add_affine("encoder.visual", m.encoder.visual);
  add_affine("encoder.audio_mid", m.encoder.audio_mid);
  add_affine("encoder.audio_out", m.encoder.audio_out);
  out.push_back({"prototypes.visual", m.prototypes.visual.rows});
  out.push_back({"prototypes.audio", m.prototypes.audio.rows});
  Mat assign(static_cast<Index>(m.prototypes.assignments.size()), 1);
  for (std::size_t i = 0; i < m.prototypes.assignments.size(); ++i)
    assign(static_cast<Index>(i), 0) = static_cast<double>(m.prototypes.assignments[i]);
  out.push_back({"prototypes.assignments", assign});
  for (std::size_t n = 0; n < m.steps.steps.size(); ++n)
    add_affine("steps." + std::to_string(n), m.steps.steps[n]);
  return out;
}

Affine take_affine(std::map<std::string, Mat>& t, const std::string& name) {
  auto w = t.find(name + ".weight");
  auto b = t.find(name + ".bias");
  if (w == t.end() || b == t.end()) throw FormatError("checkpoint lacks " + name);
  if (b->second.cols() != 1) throw FormatError("checkpoint bias " + name + " is not a vector");
  Affine a(w->second, Vec(b->second.col(0)));
  t.erase(w);
  t.erase(b);
  return a;
}

json scene_json(const world::ScenePair& s) {
  json objects = json::array();
  for (const auto& o : s.spec.objects)
    objects.push_back({{"class", o.class_id},
                       {"box", {o.box.y0, o.box.x0, o.box.y1, o.box.x1}},
                       {"sounding", o.sounding},
                       {"volume", o.volume}});
  json off = json::array();
  for (const auto& o : s.spec.offscreen) off.push_back({{"class", o.class_id}, {"volume", o.volume}});
  return {{"objects", objects}, {"offscreen", off}, {"noise", s.spec.noise}};
}

world::SceneSpec scene_spec(const json& j) {
  world::SceneSpec spec;
  for (const auto& o : j.at("objects")) {
    world::SceneObject obj;
    obj.class_id = o.at("class").get<Index>();
    const auto& b = o.at("box");
    obj.box = Box{b.at(0).get<Index>(), b.at(1).get<Index>(), b.at(2).get<Index>(), b.at(3).get<Index>()};
    obj.sounding = o.at("sounding").get<bool>();
    obj.volume = o.at("volume").get<double>();
    spec.objects.push_back(obj);
  }
  for (const auto& o : j.at("offscreen")) spec.offscreen.push_back({o.at("class").get<Index>(), o.at("volume").get<double>()});
  spec.noise = j.at("noise").get<double>();
  return spec;
}

const char* const kSplits[] = {"train_single", "train_unconstrained", "test_single", "test_unconstrained"};

std::vector<world::ScenePair>& split_of(Dataset& d, int i) {
  switch (i) {
    case 0:
      return d.train_single;
    case 1:
      return d.train_unconstrained;
    case 2:
      return d.test_single;
    default:
      return d.test_unconstrained;
  }
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
  std::size_t count = 1;
  for (const auto d : t.dims) count *= d;
  if (count != t.values.size()) throw DomainError("write_tensor: dims do not match the payload");
  Writer w;
  w.put_bytes(kTensorMagic, 4);
  w.put(static_cast<std::uint32_t>(t.dims.size()));
  for (const auto d : t.dims) w.put(d);
  w.put_bytes(t.values.data(), t.values.size() * sizeof(float));
  write_bytes(path, w.bytes);
}

Tensor read_tensor(const std::string& path) {
  const auto bytes = read_bytes(path);
  Reader r(bytes);
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError(path + ": not an IERT tensor");
  Tensor t;
  const auto rank = r.get<std::uint32_t>();
  if (rank > 16) throw FormatError(path + ": implausible tensor rank");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(r.get<std::uint32_t>());
    count *= t.dims.back();
  }
  if (count * sizeof(float) > bytes.size()) throw FormatError(path + ": payload shorter than its dims");
  t.values.resize(count);
  r.take(t.values.data(), count * sizeof(float));
  if (!r.done()) throw FormatError(path + ": trailing bytes");
  return t;
}

Tensor to_tensor(const Mat& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.values.reserve(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) t.values.push_back(static_cast<float>(m(i, j)));
  return t;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put(kCheckpointVersion);
  w.put(ckpt.config_hash);
  w.put(static_cast<std::uint32_t>(ckpt.stage));
  const auto tensors = model_tensors(ckpt.model);
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.put(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    w.put(static_cast<std::uint32_t>(t.value.rows()));
    w.put(static_cast<std::uint32_t>(t.value.cols()));
    const RowMat rm = t.value;
    w.put_bytes(rm.data(), static_cast<std::size_t>(rm.size()) * sizeof(double));
  }
  return w.bytes;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.take(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("not an IER1 checkpoint");
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  const auto stage = r.get<std::uint32_t>();
  if (stage < 1 || stage > 3) throw FormatError("unknown checkpoint stage");
  ckpt.stage = static_cast<Stage>(stage);
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, Mat> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    if (len > 1024) throw FormatError("implausible tensor name length");
    std::string name(len, '\0');
    r.take(name.data(), len);
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    if (static_cast<std::size_t>(rows) * cols * sizeof(double) > bytes.size()) throw FormatError("tensor larger than file");
    RowMat rm(rows, cols);
    r.take(rm.data(), static_cast<std::size_t>(rm.size()) * sizeof(double));
    if (!tensors.emplace(name, Mat(rm)).second) throw FormatError("duplicate tensor " + name);
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint tensors");

  Model& m = ckpt.model;
  m.encoder.visual = take_affine(tensors, "encoder.visual");
  m.encoder.audio_mid = take_affine(tensors, "encoder.audio_mid");
  m.encoder.audio_out = take_affine(tensors, "encoder.audio_out");
  auto take = [&tensors](const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks " + name);
    Mat v = std::move(it->second);
    tensors.erase(it);
    return v;
  };
  try {
    m.prototypes.visual = PrototypeBank(Modality::kVisual, take("prototypes.visual"));
    m.prototypes.audio = PrototypeBank(Modality::kAudio, take("prototypes.audio"));
  } catch (const DomainError& e) {
    throw FormatError(std::string("checkpoint prototypes invalid: ") + e.what());
  }
  const Mat assign = take("prototypes.assignments");
  for (Index i = 0; i < assign.rows(); ++i) {
    const double v = assign(i, 0);
    if (v < 0 || v >= static_cast<double>(m.prototypes.visual.size()) || v != std::floor(v))
      throw FormatError("checkpoint assignment out of range");
    m.prototypes.assignments.push_back(static_cast<Index>(v));
  }
  for (Index n = 0; n < m.prototypes.visual.size(); ++n) m.steps.steps.push_back(take_affine(tensors, "steps." + std::to_string(n)));
  if (!tensors.empty()) throw FormatError("checkpoint has unexpected tensor " + tensors.begin()->first);
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_bytes(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_bytes(path)); }

void write_dataset(const std::string& dir, const ExperimentConfig& config, const Dataset& data) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  json manifest;
  manifest["format"] = "ier-dataset";
  manifest["version"] = 1;
  manifest["config_hash"] = config_hash(config);
  manifest["config"] = json::parse(config_to_json(config));
  manifest["grid"] = {config.grid_h, config.grid_w};
  manifest["c_in"] = config.c_in;
  manifest["a_in"] = config.a_in;
  manifest["k_true"] = config.k_true;
  write_tensor((fs::path(dir) / "class_table.visual.iert").string(), to_tensor(data.table.visual));
  write_tensor((fs::path(dir) / "class_table.audio.iert").string(), to_tensor(data.table.audio));
  manifest["class_table"] = {{"visual", "class_table.visual.iert"}, {"audio", "class_table.audio.iert"}};
  Dataset& mutable_data = const_cast<Dataset&>(data);
  json splits = json::object();
  for (int s = 0; s < 4; ++s) {
    const auto& scenes = split_of(mutable_data, s);
    const std::string name = kSplits[s];
    Tensor visual;
    visual.dims = {static_cast<std::uint32_t>(scenes.size()), static_cast<std::uint32_t>(config.grid_h * config.grid_w),
                   static_cast<std::uint32_t>(config.c_in)};
    Tensor audio;
    audio.dims = {static_cast<std::uint32_t>(scenes.size()), static_cast<std::uint32_t>(config.a_in)};
    json items = json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto& sc = scenes[i];
      const Tensor v = to_tensor(sc.visual.cells);
      visual.values.insert(visual.values.end(), v.values.begin(), v.values.end());
      for (Index j = 0; j < sc.audio.size(); ++j) audio.values.push_back(static_cast<float>(sc.audio(j)));
      json item = scene_json(sc);
      item["id"] = i;
      items.push_back(std::move(item));
    }
    write_tensor((fs::path(dir) / (name + ".visual.iert")).string(), visual);
    write_tensor((fs::path(dir) / (name + ".audio.iert")).string(), audio);
    splits[name] = {{"count", scenes.size()},
                    {"visual", name + ".visual.iert"},
                    {"audio", name + ".audio.iert"},
                    {"scenes", std::move(items)}};
  }
  manifest["splits"] = std::move(splits);
  write_text((fs::path(dir) / "manifest.json").string(), manifest.dump(1) + "\n");
}

Dataset read_dataset(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError(manifest_path + ": " + e.what());
  }
  try {
    if (manifest.at("format") != "ier-dataset") throw FormatError(manifest_path + ": not a dataset manifest");
    const Index h = manifest.at("grid").at(0).get<Index>();
    const Index w = manifest.at("grid").at(1).get<Index>();
    const Index c_in = manifest.at("c_in").get<Index>();
    const Index a_in = manifest.at("a_in").get<Index>();
    const Index k_true = manifest.at("k_true").get<Index>();
    Dataset d;
    auto load_matrix = [&](const std::string& file, Index rows, Index cols) {
      const Tensor t = read_tensor((fs::path(dir) / file).string());
      if (t.dims.size() != 2 || t.dims[0] != rows || t.dims[1] != cols) throw FormatError(file + ": unexpected shape");
      Mat m(rows, cols);
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = t.values[static_cast<std::size_t>(i * cols + j)];
      return m;
    };
    d.table.visual = load_matrix(manifest.at("class_table").at("visual").get<std::string>(), k_true, c_in);
    d.table.audio = load_matrix(manifest.at("class_table").at("audio").get<std::string>(), k_true, a_in);
    for (int s = 0; s < 4; ++s) {
      const json& split = manifest.at("splits").at(kSplits[s]);
      const auto n = split.at("count").get<std::size_t>();
      const Tensor visual = read_tensor((fs::path(dir) / split.at("visual").get<std::string>()).string());
      const Tensor audio = read_tensor((fs::path(dir) / split.at("audio").get<std::string>()).string());
      if (visual.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(h * w),
                                                     static_cast<std::uint32_t>(c_in)} ||
          audio.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(a_in)})
        throw FormatError(std::string(kSplits[s]) + ": tensor shapes disagree with the manifest");
      if (split.at("scenes").size() != n) throw FormatError(std::string(kSplits[s]) + ": scene count mismatch");
      auto& scenes = split_of(d, s);
      scenes.resize(n);
      const std::size_t vstride = static_cast<std::size_t>(h * w * c_in);
      for (std::size_t i = 0; i < n; ++i) {
        auto& sc = scenes[i];
        sc.spec = scene_spec(split.at("scenes").at(i));
        Mat cells(h * w, c_in);
        for (Index r = 0; r < h * w; ++r)
          for (Index c = 0; c < c_in; ++c) cells(r, c) = visual.values[i * vstride + static_cast<std::size_t>(r * c_in + c)];
        sc.visual = FeatureGrid(h, w, std::move(cells));
        sc.audio.resize(a_in);
        for (Index j = 0; j < a_in; ++j) sc.audio(j) = audio.values[i * static_cast<std::size_t>(a_in) + static_cast<std::size_t>(j)];
        sc.labels = Vec::Zero(k_true);
        for (const auto& o : sc.spec.objects) {
          if (o.class_id < 0 || o.class_id >= k_true) throw FormatError("scene class out of range");
          if (o.sounding) sc.labels(o.class_id) = 1.0;
        }
      }
    }
    return d;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint8_t pgm_level(double value) {
  const double v = std::clamp(value, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
}

void write_pgm(const std::string& path, const SimilarityMap& map) {
  Writer w;
  const std::string header = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  w.put_bytes(header.data(), header.size());
  for (Index i = 0; i < map.size(); ++i) w.put(pgm_level(map.values(i)));
  write_bytes(path, w.bytes);
}

std::string report_json(const metrics::MetricsReport& r) {
  json j = {{"iou_05", r.iou_05}, {"auc", r.auc}, {"ciou_03", r.ciou_03}, {"nmi", r.nmi},
            {"precision", r.precision}, {"recall", r.recall}, {"map", r.map}};
  return j.dump(2) + "\n";
}

}  // namespace ier::io
