#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ssc/nn/network.hpp"

namespace ssc::arch {

enum class ArchName { cnn_i, cnn_ii };

const char* to_string(ArchName name);
ArchName arch_name_from_string(const std::string& s);

/// Declarative description of one of the two networks.
///
/// CNN I: VGG-like, 3×3 convolutions in blocks of 2,2,2,3 starting at 12
/// filters and doubling after each pool, hidden widths 2048/1024, 3 classes.
/// CNN II: VGG configuration D, blocks of 2,2,3,3,3 with 64..512 filters,
/// hidden widths 4096/4096, 2 classes.
///
/// `pools` truncates the conv stack to its first blocks (tiny variants keep
/// the block structure, channel doubling and dense head). `scale` multiplies
/// every channel count and hidden width.
struct NetworkSpec {
  ArchName name = ArchName::cnn_i;
  double scale = 1.0;
  int input_h = 224;
  int input_w = 224;
  int num_classes = 3;
  int pools = 4;
  nn::Padding padding = nn::Padding::same;
  double dropout = 0.5;
  bool convolutionalized = false;
  std::vector<nn::LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;
};

/// Output stride, receptive field and smallest input producing a 1×1 output.
struct StrideProfile {
  int output_stride = 1;
  int receptive_field = 1;
  int min_input = 1;
};

NetworkSpec cnn1_spec(double scale = 1.0, int input_size = 224, int pools = 4,
                      nn::Padding padding = nn::Padding::same);
NetworkSpec cnn2_spec(double scale = 1.0, int input_size = 224, int pools = 5,
                      nn::Padding padding = nn::Padding::same);

/// Desk-scale variants: two pool blocks, valid padding, 32×32 patches.
NetworkSpec tiny_cnn1_spec(double scale = 0.25, int input_size = 32);
NetworkSpec tiny_cnn2_spec(double scale = 0.125, int input_size = 32);

/// Conv channel counts in layer order.
std::vector<int> conv_channels(const NetworkSpec& spec);

/// Spatial extent reaching the first dense layer; throws if the input is too
/// small for the pools (or odd at a pool).
int pre_dense_extent(const NetworkSpec& spec);

/// He-initialised network for `spec`.
nn::Network build_network(const NetworkSpec& spec, Rng& rng);

/// Replaces dense layers by convolutions (first k×k, then 1×1) carrying the
/// same weights. A spec with no dense layers is returned unchanged; converting
/// an already converted spec throws.
NetworkSpec convolutionalize(const NetworkSpec& spec);
nn::Network convolutionalize(const nn::Network& net);

StrideProfile stride_profile(const NetworkSpec& spec);
StrideProfile stride_profile(const std::vector<nn::LayerSpec>& layers);

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

}  // namespace ssc::arch
