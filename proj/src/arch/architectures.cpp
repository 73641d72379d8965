#include "ssc/arch/architectures.hpp"

#include <algorithm>
#include <cmath>

namespace ssc::arch {

using nn::LayerKind;
using nn::LayerSpec;
using nn::Padding;

const char* to_string(ArchName name) {
  return name == ArchName::cnn_i ? "CNN_I" : "CNN_II";
}

ArchName arch_name_from_string(const std::string& s) {
  if (s == "CNN_I") return ArchName::cnn_i;
  if (s == "CNN_II") return ArchName::cnn_ii;
  throw Error("unknown architecture '" + s + "'");
}

namespace {

struct Blueprint {
  std::vector<int> block_sizes;
  int base_channels;
  int max_doublings;
  std::vector<int> hidden;
  int num_classes;
};

Blueprint blueprint(ArchName name) {
  if (name == ArchName::cnn_i) return {{2, 2, 2, 3}, 12, 3, {2048, 1024}, 3};
  return {{2, 2, 3, 3, 3}, 64, 3, {4096, 4096}, 2};
}

int scaled(int base, double scale) {
  const double v = base * scale;
  if (v < 1.0)
    throw Error("scale " + std::to_string(scale) + " leaves fewer than one unit");
  return static_cast<int>(std::lround(v));
}

NetworkSpec make_spec(ArchName name, double scale, int input, int pools,
                      Padding padding) {
  const Blueprint bp = blueprint(name);
  if (!(scale > 0.0)) throw Error("scale must be positive");
  if (pools < 0 || pools > static_cast<int>(bp.block_sizes.size()))
    throw Error("pool count out of range for this architecture");
  NetworkSpec spec;
  spec.name = name;
  spec.scale = scale;
  spec.input_h = spec.input_w = input;
  spec.num_classes = bp.num_classes;
  spec.pools = pools;
  spec.padding = padding;

  const int base = scaled(bp.base_channels, scale);
  int channels = 3;
  for (int b = 0; b < pools; ++b) {
    const int out = base << std::min(b, bp.max_doublings);
    for (int i = 0; i < bp.block_sizes[b]; ++i) {
      spec.layers.push_back(nn::conv_layer(channels, out, 3, padding));
      spec.layers.push_back(nn::relu_layer());
      channels = out;
    }
    spec.layers.push_back(nn::maxpool_layer());
  }
  const int extent = pre_dense_extent(spec);
  int in_extent = extent;
  for (int h : bp.hidden) {
    const int width = scaled(h, scale);
    spec.layers.push_back(nn::dense_layer(channels, in_extent, width));
    spec.layers.push_back(nn::relu_layer());
    spec.layers.push_back(nn::dropout_layer(spec.dropout));
    channels = width;
    in_extent = 1;
  }
  spec.layers.push_back(nn::dense_layer(channels, in_extent, bp.num_classes));
  spec.layers.push_back(nn::softmax_layer());
  nn::validate_layers(spec.layers);
  return spec;
}

}  // namespace

NetworkSpec cnn1_spec(double scale, int input_size, int pools, Padding padding) {
  return make_spec(ArchName::cnn_i, scale, input_size, pools, padding);
}

NetworkSpec cnn2_spec(double scale, int input_size, int pools, Padding padding) {
  return make_spec(ArchName::cnn_ii, scale, input_size, pools, padding);
}

NetworkSpec tiny_cnn1_spec(double scale, int input_size) {
  return cnn1_spec(scale, input_size, 2, Padding::valid);
}

NetworkSpec tiny_cnn2_spec(double scale, int input_size) {
  return cnn2_spec(scale, input_size, 2, Padding::valid);
}

std::vector<int> conv_channels(const NetworkSpec& spec) {
  std::vector<int> out;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::dense) break;
    if (l.kind == LayerKind::conv && l.kernel == 3 && l.padding == spec.padding)
      out.push_back(l.out_channels);
  }
  // Converted dense layers follow the last pool.
  if (spec.convolutionalized) {
    std::size_t last_pool = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
      if (spec.layers[i].kind == LayerKind::maxpool) last_pool = i;
    out.clear();
    for (std::size_t i = 0; i < last_pool; ++i)
      if (spec.layers[i].kind == LayerKind::conv)
        out.push_back(spec.layers[i].out_channels);
  }
  return out;
}

int pre_dense_extent(const NetworkSpec& spec) {
  int h = spec.input_h, w = spec.input_w;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::dense) break;
    if (l.kind == LayerKind::conv && l.padding == Padding::valid) {
      h -= l.kernel - 1;
      w -= l.kernel - 1;
    } else if (l.kind == LayerKind::maxpool) {
      if (h % 2 != 0 || w % 2 != 0)
        throw Error("input size " + std::to_string(spec.input_h) +
                    " gives an odd extent at a pool");
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1)
      throw Error("input size " + std::to_string(spec.input_h) +
                  " too small for " + std::to_string(spec.pools) + " pools");
  }
  if (h != w) throw Error("non-square pre-dense extent");
  return h;
}

nn::Network build_network(const NetworkSpec& spec, Rng& rng) {
  pre_dense_extent(spec);
  nn::Network net(spec.layers);
  net.initialize(rng);
  return net;
}

namespace {

std::vector<LayerSpec> convert_layers(const std::vector<LayerSpec>& layers) {
  std::vector<LayerSpec> out = layers;
  for (LayerSpec& l : out)
    if (l.kind == LayerKind::dense) {
      l.kind = LayerKind::conv;
      l.padding = Padding::valid;
    }
  return out;
}

bool has_dense(const std::vector<LayerSpec>& layers) {
  return std::any_of(layers.begin(), layers.end(),
                     [](const LayerSpec& l) { return l.kind == LayerKind::dense; });
}

}  // namespace

NetworkSpec convolutionalize(const NetworkSpec& spec) {
  if (spec.convolutionalized) throw Error("spec is already convolutionalized");
  if (!has_dense(spec.layers)) return spec;
  pre_dense_extent(spec);
  NetworkSpec out = spec;
  out.layers = convert_layers(spec.layers);
  out.convolutionalized = true;
  return out;
}

nn::Network convolutionalize(const nn::Network& net) {
  if (!has_dense(net.layers())) return net;
  nn::Network out = net;
  out.set_layers(convert_layers(net.layers()));
  return out;
}

StrideProfile stride_profile(const std::vector<LayerSpec>& layers) {
  StrideProfile p;
  int jump = 1;
  int rf = 1;
  for (const LayerSpec& l : layers) {
    if (l.kind == LayerKind::conv || l.kind == LayerKind::dense) {
      rf += (l.kernel - 1) * jump;
    } else if (l.kind == LayerKind::maxpool) {
      rf += jump;
      jump *= 2;
    }
  }
  p.output_stride = jump;
  p.receptive_field = rf;
  int s = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    const LayerSpec& l = *it;
    if (l.kind == LayerKind::dense) {
      s = l.kernel;
    } else if (l.kind == LayerKind::conv && l.padding == Padding::valid) {
      s += l.kernel - 1;
    } else if (l.kind == LayerKind::maxpool) {
      s *= 2;
    }
  }
  p.min_input = s;
  return p;
}

StrideProfile stride_profile(const NetworkSpec& spec) {
  return stride_profile(spec.layers);
}

nlohmann::json to_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : spec.layers) {
    layers.push_back({{"kind", nn::to_string(l.kind)},
                      {"in", l.in_channels},
                      {"out", l.out_channels},
                      {"kernel", l.kernel},
                      {"padding", l.padding == Padding::same ? "same" : "valid"},
                      {"rate", l.rate}});
  }
  return {{"name", to_string(spec.name)},
          {"scale", spec.scale},
          {"input_size", {spec.input_h, spec.input_w}},
          {"num_classes", spec.num_classes},
          {"pools", spec.pools},
          {"padding", spec.padding == Padding::same ? "same" : "valid"},
          {"dropout", spec.dropout},
          {"convolutionalized", spec.convolutionalized},
          {"layers", layers}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.name = arch_name_from_string(j.at("name").get<std::string>());
  spec.scale = j.at("scale").get<double>();
  spec.input_h = j.at("input_size").at(0).get<int>();
  spec.input_w = j.at("input_size").at(1).get<int>();
  spec.num_classes = j.at("num_classes").get<int>();
  spec.pools = j.at("pools").get<int>();
  spec.padding = j.at("padding") == "same" ? Padding::same : Padding::valid;
  spec.dropout = j.value("dropout", 0.5);
  spec.convolutionalized = j.at("convolutionalized").get<bool>();
  for (const auto& l : j.at("layers")) {
    LayerSpec s;
    s.kind = nn::layer_kind_from_string(l.at("kind").get<std::string>());
    s.in_channels = l.at("in").get<int>();
    s.out_channels = l.at("out").get<int>();
    s.kernel = l.at("kernel").get<int>();
    s.padding = l.at("padding") == "same" ? Padding::same : Padding::valid;
    s.rate = l.at("rate").get<double>();
    spec.layers.push_back(s);
  }
  nn::validate_layers(spec.layers);
  return spec;
}

}  // namespace ssc::arch
