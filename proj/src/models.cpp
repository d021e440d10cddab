// Copyright 2026 The bevmap Authors
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

#include "bevmap/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace bevmap {
namespace {

std::seed_seq make_seq(std::uint64_t seed, std::uint64_t a, std::uint32_t tag) {
  return std::seed_seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(a),
                       std::uint32_t(a >> 32), tag};
}

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = n(rng);
  return v;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::homography: return "homography";
    case ModelKind::grid: return "grid";
    case ModelKind::mlp: return "mlp";
    case ModelKind::sdpn: return "sdpn";
  }
  return "mlp";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind k : {ModelKind::homography, ModelKind::grid, ModelKind::mlp, ModelKind::sdpn})
    if (to_string(k) == text) return k;
  throw ParseError("unknown model kind '" + std::string(text) + "'");
}

Eigen::VectorXd class_prototype(ClassLabel label, std::uint64_t seed, int dim) {
  if (dim <= 0) throw ConfigError("feature_dim must be positive");
  auto seq = make_seq(seed, static_cast<std::uint64_t>(label), 0x70726f74u);
  std::mt19937_64 rng(seq);
  Eigen::VectorXd v = gaussian_vector(rng, dim);
  return v / v.norm();
}

Eigen::VectorXd synth_feature(std::int64_t model_id, ClassLabel label, std::uint64_t seed, int dim,
                              double perturbation) {
  Eigen::VectorXd v = class_prototype(label, seed, dim);
  if (perturbation == 0.0) return v;
  auto seq = make_seq(seed, static_cast<std::uint64_t>(model_id), 0x70657274u);
  std::mt19937_64 rng(seq);
  v += (perturbation / std::sqrt(double(dim))) * gaussian_vector(rng, dim);
  return v;
}

FeatureProvider::FeatureProvider(FeatureConfig config) : config_(std::move(config)) {
  if (config_.mode == FeatureConfig::Mode::file) {
    int dim = 0;
    table_ = read_feature_file(config_.path, &dim);
    config_.feature_dim = dim;
  }
  if (config_.feature_dim <= 0) throw ConfigError("feature_dim must be positive");
}

std::optional<Eigen::VectorXd> FeatureProvider::feature(const DetectionRecord& r) const {
  if (config_.mode == FeatureConfig::Mode::synthetic)
    return synth_feature(r.model_id, r.class_label, config_.seed, config_.feature_dim,
                         config_.perturbation);
  auto it = table_.find(r.key());
  if (it == table_.end()) return std::nullopt;
  return it->second.cast<double>();
}

void write_feature_file(const std::filesystem::path& path, int feature_dim,
                        const std::vector<std::pair<std::string, Eigen::VectorXf>>& entries) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write("BEVF", 4);
  const std::uint32_t dim = std::uint32_t(feature_dim);
  const std::uint64_t count = entries.size();
  out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& [key, v] : entries) {
    if (v.size() != feature_dim) throw ShapeError("feature for '" + key + "' has the wrong length");
    const std::uint32_t len = std::uint32_t(key.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(key.data(), std::streamsize(key.size()));
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(sizeof(float) * v.size()));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::unordered_map<std::string, Eigen::VectorXf> read_feature_file(const std::filesystem::path& path,
                                                                   int* feature_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  auto fail = [&](const std::string& what) {
    return ParseError("feature file '" + path.string() + "': " + what);
  };
  char magic[4];
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  if (!in.read(magic, 4) || std::string(magic, 4) != "BEVF") throw fail("bad magic");
  if (!in.read(reinterpret_cast<char*>(&dim), sizeof dim) ||
      !in.read(reinterpret_cast<char*>(&count), sizeof count) || dim == 0)
    throw fail("bad header");
  std::unordered_map<std::string, Eigen::VectorXf> table;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 20))
      throw fail("truncated record");
    std::string key(len, '\0');
    Eigen::VectorXf v(dim);
    if (!in.read(key.data(), len) ||
        !in.read(reinterpret_cast<char*>(v.data()), std::streamsize(sizeof(float) * dim)))
      throw fail("truncated record");
    table[key] = std::move(v);
  }
  if (feature_dim) *feature_dim = int(dim);
  return table;
}

nn::NetworkSpec build_sdpn(int feature_dim, double dropout_p) {
  if (feature_dim <= 0) throw ConfigError("build_sdpn: feature_dim must be positive");
  using nn::Activation;
  nn::NetworkSpec spec;
  spec.coord_dim = kCoordDim;
  spec.side_dim = feature_dim;
  int in = kCoordDim;
  for (int width : {256, 256, kEncodingDim}) {
    spec.encoder.push_back({in, width, Activation::relu, dropout_p});
    in = width;
  }
  in = feature_dim + kEncodingDim;
  for (int width : {1024, 1024, 512, 256, 128}) {
    spec.decoder.push_back({in, width, Activation::relu, dropout_p});
    in = width;
  }
  spec.decoder.push_back({in, kCoordDim, Activation::tanh, 0.0});
  return spec;
}

namespace {

std::size_t mlp_params(std::size_t w) {
  // input layer + (depth - 1) hidden-to-hidden layers + output layer
  return (kCoordDim * w + w) + (kMlpDepth - 1) * (w * w + w) + (w * kCoordDim + kCoordDim);
}

}  // namespace

nn::NetworkSpec build_mlp_baseline(std::size_t reference_param_count, double dropout_p) {
  if (reference_param_count == 0) throw ConfigError("build_mlp_baseline: reference count is zero");
  // (depth-1) w^2 + (2 k + depth) w + k - P = 0 with k = coordinate width.
  const double a = kMlpDepth - 1, b = 2.0 * kCoordDim + kMlpDepth;
  const double c = double(kCoordDim) - double(reference_param_count);
  const double root = (-b + std::sqrt(b * b - 4 * a * c)) / (2 * a);
  std::size_t best = 1;
  double best_err = std::numeric_limits<double>::infinity();
  for (long w = std::max(1L, long(std::floor(root)) - 1); w <= long(std::ceil(root)) + 1; ++w) {
    const double err = std::abs(double(mlp_params(std::size_t(w))) - double(reference_param_count));
    if (err < best_err) {
      best_err = err;
      best = std::size_t(w);
    }
  }
  if (best_err > 0.05 * double(reference_param_count))
    throw ConfigError("build_mlp_baseline: no width within 5% of " +
                      std::to_string(reference_param_count) + " parameters");
  using nn::Activation;
  const int w = int(best);
  nn::NetworkSpec spec;
  spec.coord_dim = kCoordDim;
  int in = kCoordDim;
  for (int i = 0; i < kMlpDepth; ++i) {
    spec.decoder.push_back({in, w, Activation::relu, dropout_p});
    in = w;
  }
  spec.decoder.push_back({in, kCoordDim, Activation::tanh, 0.0});
  return spec;
}

namespace {

void fill_inputs(ModelKind kind, std::span<const DetectionRecord> records,
                 const DatasetHeader& header, const FeatureProvider* features,
                 nn::Batch<double>& batch) {
  const Eigen::Index n = Eigen::Index(records.size());
  batch.coords.resize(kCoordDim, n);
  const bool sdpn = kind == ModelKind::sdpn;
  if (sdpn && !features) throw MissingInputError("SDPN requires an appearance feature provider");
  batch.side.resize(sdpn ? features->dim() : 0, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const DetectionRecord& r = records[std::size_t(i)];
    batch.coords.col(i) = normalize_bbox(r.frontal_box, header.frontal_dims).coords();
    if (sdpn) {
      auto f = features->feature(r);
      if (!f) throw MissingInputError("no appearance feature for record '" + r.key() + "'");
      if (f->size() != batch.side.rows())
        throw ShapeError("feature for record '" + r.key() + "' has the wrong length");
      batch.side.col(i) = *f;
    }
  }
}

}  // namespace

nn::TrainingData<double> make_training_data(ModelKind kind, std::span<const DetectionRecord> records,
                                            const DatasetHeader& header,
                                            const FeatureProvider* features) {
  if (kind != ModelKind::mlp && kind != ModelKind::sdpn)
    throw ConfigError("make_training_data: only mlp and sdpn are trainable networks");
  nn::TrainingData<double> data;
  fill_inputs(kind, records, header, features, data.inputs);
  data.targets.resize(kCoordDim, Eigen::Index(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i)
    data.targets.col(Eigen::Index(i)) =
        normalize_bbox(records[i].birdeye_box, header.birdeye_dims).coords();
  return data;
}

ValidationSplit split_validation(std::span<const DetectionRecord> records, double fraction,
                                 std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1))
    throw ConfigError("validation fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x76616cULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = static_cast<std::size_t>(fraction * double(records.size()));
  if (n_val == 0 || n_val == records.size())
    throw InsufficientDataError("too few records (" + std::to_string(records.size()) +
                                ") to hold out a validation split");
  ValidationSplit out;
  out.val.reserve(n_val);
  out.train.reserve(records.size() - n_val);
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_val ? out.val : out.train).push_back(records[idx[i]]);
  return out;
}

std::string_view to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

Precision parse_precision(std::string_view text) {
  if (text == "float32") return Precision::float32;
  if (text == "float64") return Precision::float64;
  throw ParseError("unknown precision '" + std::string(text) + "'");
}

TrainedModel train_model(ModelKind kind, const nn::NetworkSpec& spec,
                         std::span<const DetectionRecord> train_records,
                         std::span<const DetectionRecord> val_records, const DatasetHeader& header,
                         const nn::Hyper& hyper, const FeatureProvider* features,
                         Precision precision,
                         const std::function<void(const nn::EpochStats&)>& on_epoch) {
  const auto train_data = make_training_data(kind, train_records, header, features);
  const auto val_data = make_training_data(kind, val_records, header, features);
  nn::TrainResult<double> result;
  if (precision == Precision::float32) {
    auto r = nn::train(spec, nn::cast_data<float>(train_data), nn::cast_data<float>(val_data),
                       hyper, on_epoch);
    result = {nn::cast_state<double>(r.state), std::move(r.history), r.best_epoch};
  } else {
    result = nn::train(spec, train_data, val_data, hyper, on_epoch);
  }
  TrainedModel out;
  out.model.kind = kind;
  out.model.spec = spec;
  out.model.state = std::move(result.state);
  out.model.dims = header;
  if (kind == ModelKind::sdpn) out.model.features = features->config();
  out.history = std::move(result.history);
  out.best_epoch = result.best_epoch;
  return out;
}

std::vector<BBox> predict(const LearnedModel& model, std::span<const DetectionRecord> records,
                          const FeatureProvider* features) {
  constexpr std::size_t kChunk = 256;
  std::vector<BBox> out;
  out.reserve(records.size());
  for (std::size_t start = 0; start < records.size(); start += kChunk) {
    const auto chunk = records.subspan(start, std::min(kChunk, records.size() - start));
    nn::Batch<double> batch;
    fill_inputs(model.kind, chunk, model.dims, features, batch);
    const nn::Matrix<double> y = nn::forward(model.spec, model.state, batch);
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
      const BBox normalized =
          BBox::from_coords(y.col(i), Space::normalized, View::birdeye);
      out.push_back(denormalize_bbox(normalized, model.dims.birdeye_dims).ordered());
    }
  }
  return out;
}

BBox predict(const LearnedModel& model, const DetectionRecord& record,
             const FeatureProvider* features) {
  return predict(model, std::span<const DetectionRecord>(&record, 1), features).front();
}

void write_learned_model(std::ostream& out, const LearnedModel& model) {
  out << kLearnedModelMagic << '\n';
  out << "kind " << to_string(model.kind) << '\n';
  out << "frontal_dims " << model.dims.frontal_dims.width << ' ' << model.dims.frontal_dims.height
      << '\n';
  out << "birdeye_dims " << model.dims.birdeye_dims.width << ' ' << model.dims.birdeye_dims.height
      << '\n';
  if (!model.features) {
    out << "features none\n";
  } else if (model.features->mode == FeatureConfig::Mode::synthetic) {
    std::ostringstream p;
    p.precision(17);
    p << model.features->perturbation;
    out << "features synthetic " << model.features->feature_dim << ' ' << model.features->seed
        << ' ' << p.str() << '\n';
  } else {
    out << "features file " << model.features->feature_dim << ' '
        << model.features->path.string() << '\n';
  }
  nn::write_network(out, model.spec, model.state);
}

LearnedModel read_learned_model(std::istream& in) {
  auto fail = [](const std::string& what) { return ParseError("model file: " + what); };
  std::string line;
  if (!std::getline(in, line) || line != kLearnedModelMagic) throw fail("bad magic line");
  LearnedModel model;
  std::string key, value;
  if (!std::getline(in, line)) throw fail("truncated header");
  {
    std::istringstream ss(line);
    if (!(ss >> key >> value) || key != "kind") throw fail("expected kind");
    model.kind = parse_model_kind(value);
    if (model.kind != ModelKind::mlp && model.kind != ModelKind::sdpn)
      throw fail("network artifacts hold mlp or sdpn models only");
  }
  for (auto* d : {&model.dims.frontal_dims, &model.dims.birdeye_dims}) {
    if (!std::getline(in, line)) throw fail("truncated header");
    std::istringstream ss(line);
    if (!(ss >> key >> d->width >> d->height) || d->width <= 0 || d->height <= 0)
      throw fail("bad frame dims");
  }
  if (!std::getline(in, line)) throw fail("truncated header");
  {
    std::istringstream ss(line);
    std::string mode;
    if (!(ss >> key >> mode) || key != "features") throw fail("expected features line");
    if (mode == "synthetic") {
      FeatureConfig f;
      if (!(ss >> f.feature_dim >> f.seed >> f.perturbation)) throw fail("bad features line");
      model.features = f;
    } else if (mode == "file") {
      FeatureConfig f;
      f.mode = FeatureConfig::Mode::file;
      std::string path;
      if (!(ss >> f.feature_dim)) throw fail("bad features line");
      std::getline(ss >> std::ws, path);
      f.path = path;
      model.features = f;
    } else if (mode != "none") {
      throw fail("unknown feature mode '" + mode + "'");
    }
  }
  auto [spec, state] = nn::read_network(in);
  model.spec = std::move(spec);
  model.state = std::move(state);
  if (model.kind == ModelKind::sdpn && (!model.features || model.features->feature_dim != model.spec.side_dim))
    throw fail("SDPN feature source does not match the network input");
  return model;
}

void save_learned_model(const std::filesystem::path& path, const LearnedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_learned_model(out, model);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

LearnedModel load_learned_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return read_learned_model(in);
}

}  // namespace bevmap
