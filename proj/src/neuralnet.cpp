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

#include "bevmap/neuralnet.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace bevmap::nn {

static_assert(std::endian::native == std::endian::little,
              "tensor container I/O assumes a little-endian host");

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  if (text == "linear") return Activation::linear;
  throw ParseError("unknown activation '" + std::string(text) + "'");
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layer_count(); ++i) {
    const LayerSpec& l = layer(i);
    n += std::size_t(l.in_dim) * std::size_t(l.out_dim) + std::size_t(l.out_dim);
  }
  return n;
}

void validate(const NetworkSpec& spec) {
  if (spec.coord_dim <= 0 || spec.side_dim < 0) throw ShapeError("network: bad input widths");
  if (spec.layer_count() == 0) throw ShapeError("network: no layers");
  int width = spec.coord_dim;
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    if (i == spec.encoder.size()) width += spec.side_dim;
    const LayerSpec& l = spec.layer(i);
    if (l.in_dim <= 0 || l.out_dim <= 0)
      throw ShapeError("network: layer " + std::to_string(i) + " has a non-positive width");
    if (l.in_dim != width)
      throw ShapeError("network: layer " + std::to_string(i) + " expects " +
                       std::to_string(l.in_dim) + " inputs but receives " + std::to_string(width));
    if (!(l.dropout_p >= 0 && l.dropout_p < 1))
      throw ShapeError("network: dropout probability must be in [0, 1)");
    width = l.out_dim;
  }
}

void validate(const Hyper& h) {
  if (!(h.lr > 0)) throw ConfigError("hyper: lr must be > 0");
  if (!(h.beta1 >= 0 && h.beta1 < 1) || !(h.beta2 >= 0 && h.beta2 < 1))
    throw ConfigError("hyper: betas must be in [0, 1)");
  if (!(h.epsilon > 0)) throw ConfigError("hyper: epsilon must be > 0");
  if (h.batch_size <= 0) throw ConfigError("hyper: batch_size must be > 0");
  if (h.max_epochs <= 0) throw ConfigError("hyper: max_epochs must be > 0");
  if (h.patience < 0) throw ConfigError("hyper: patience must be >= 0");
}

namespace {

constexpr const char* kMagic = "bevmap-net 1";

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("network: truncated tensor");
  return v;
}

template <typename Derived>
void write_tensor(std::ostream& out, const Eigen::MatrixBase<Derived>& m) {
  write_u32(out, std::uint32_t(m.rows()));
  write_u32(out, std::uint32_t(m.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()), std::streamsize(rm.size() * sizeof(double)));
}

Matrix<double> read_tensor(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  const std::uint32_t r = read_u32(in), c = read_u32(in);
  if (r != rows || c != cols)
    throw ParseError("network: tensor is " + std::to_string(r) + "x" + std::to_string(c) +
                     ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  if (!in.read(reinterpret_cast<char*>(rm.data()), std::streamsize(rm.size() * sizeof(double))))
    throw ParseError("network: truncated tensor data");
  return rm;
}

void write_layers(std::ostream& out, const char* name, const std::vector<LayerSpec>& layers) {
  out << name << ' ' << layers.size() << '\n';
  std::ostringstream p;
  for (const auto& l : layers) {
    p.str("");
    p.precision(17);
    p << l.dropout_p;
    out << "layer " << l.in_dim << ' ' << l.out_dim << ' ' << to_string(l.activation) << ' '
        << p.str() << '\n';
  }
}

std::string expect_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("network: truncated header");
  return line;
}

long read_keyed(std::istream& in, const std::string& key) {
  std::istringstream ss(expect_line(in));
  std::string k;
  long v;
  if (!(ss >> k >> v) || k != key) throw ParseError("network: expected '" + key + "' line");
  return v;
}

std::vector<LayerSpec> read_layers(std::istream& in, const std::string& name) {
  const long n = read_keyed(in, name);
  if (n < 0 || n > 4096) throw ParseError("network: bad layer count");
  std::vector<LayerSpec> layers;
  for (long i = 0; i < n; ++i) {
    std::istringstream ss(expect_line(in));
    std::string tag, act;
    LayerSpec l;
    if (!(ss >> tag >> l.in_dim >> l.out_dim >> act >> l.dropout_p) || tag != "layer")
      throw ParseError("network: malformed layer line");
    l.activation = parse_activation(act);
    layers.push_back(l);
  }
  return layers;
}

}  // namespace

void write_network(std::ostream& out, const NetworkSpec& spec, const NetworkState<double>& state) {
  validate(spec);
  if (state.layers.size() != spec.layer_count())
    throw ShapeError("write_network: state does not match spec");
  out << kMagic << '\n';
  out << "coord_dim " << spec.coord_dim << '\n';
  out << "side_dim " << spec.side_dim << '\n';
  write_layers(out, "encoder", spec.encoder);
  write_layers(out, "decoder", spec.decoder);
  out << "step " << state.step << '\n';
  out << "tensors " << 6 * state.layers.size() << '\n';
  out << "end\n";
  for (std::size_t i = 0; i < state.layers.size(); ++i) {
    write_tensor(out, state.layers[i].w);
    write_tensor(out, state.layers[i].b);
    write_tensor(out, state.moments[i].m_w);
    write_tensor(out, state.moments[i].v_w);
    write_tensor(out, state.moments[i].m_b);
    write_tensor(out, state.moments[i].v_b);
  }
}

std::pair<NetworkSpec, NetworkState<double>> read_network(std::istream& in) {
  if (expect_line(in) != kMagic) throw ParseError("network: bad magic line");
  NetworkSpec spec;
  spec.coord_dim = int(read_keyed(in, "coord_dim"));
  spec.side_dim = int(read_keyed(in, "side_dim"));
  spec.encoder = read_layers(in, "encoder");
  spec.decoder = read_layers(in, "decoder");
  try {
    validate(spec);
  } catch (const ShapeError& e) {
    throw ParseError(std::string("network: inconsistent spec: ") + e.what());
  }
  NetworkState<double> state;
  state.step = read_keyed(in, "step");
  const long tensors = read_keyed(in, "tensors");
  if (tensors != long(6 * spec.layer_count())) throw ParseError("network: wrong tensor count");
  if (expect_line(in) != "end") throw ParseError("network: missing header terminator");
  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const LayerSpec& l = spec.layer(i);
    DenseParams<double> p;
    AdamMoments<double> m;
    p.w = read_tensor(in, l.out_dim, l.in_dim);
    p.b = read_tensor(in, l.out_dim, 1);
    m.m_w = read_tensor(in, l.out_dim, l.in_dim);
    m.v_w = read_tensor(in, l.out_dim, l.in_dim);
    m.m_b = read_tensor(in, l.out_dim, 1);
    m.v_b = read_tensor(in, l.out_dim, 1);
    state.layers.push_back(std::move(p));
    state.moments.push_back(std::move(m));
  }
  return {std::move(spec), std::move(state)};
}

}  // namespace bevmap::nn
