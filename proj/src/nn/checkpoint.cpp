#include "ssc/nn/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ssc::nn {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'S', 'C', 'N'};

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_trivially_copyable_v<U>);
  std::array<unsigned char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename U>
U get(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw IoError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  U value;
  std::memcpy(&value, bytes.data(), sizeof(U));
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Network& net) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  std::uint32_t blobs = 0;
  for (const LayerSpec& l : net.layers()) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
    put<std::int32_t>(out, l.in_channels);
    put<std::int32_t>(out, l.out_channels);
    put<std::int32_t>(out, l.kernel);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.padding));
    put<double>(out, l.rate);
    if (l.has_params()) ++blobs;
  }
  put<std::uint32_t>(out, blobs);
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (!net.layers()[i].has_params()) continue;
    const LayerParams<float>& p = net.params()[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(i));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.weights.size()));
    for (float v : p.weights.data()) put<float>(out, v);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.bias.size()));
    for (float v : p.bias) put<float>(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Network read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError("not an SSCN checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);
  std::vector<LayerSpec> layers(count);
  for (LayerSpec& l : layers) {
    const auto kind = get<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(LayerKind::softmax))
      throw IoError("corrupt layer kind in checkpoint");
    l.kind = static_cast<LayerKind>(kind);
    l.in_channels = get<std::int32_t>(in);
    l.out_channels = get<std::int32_t>(in);
    l.kernel = get<std::int32_t>(in);
    l.padding = static_cast<Padding>(get<std::uint8_t>(in));
    l.rate = get<double>(in);
  }
  Network net(std::move(layers));
  const auto blobs = get<std::uint32_t>(in);
  for (std::uint32_t b = 0; b < blobs; ++b) {
    const auto idx = get<std::uint32_t>(in);
    if (idx >= net.layers().size() || !net.layers()[idx].has_params())
      throw IoError("checkpoint blob names a layer without parameters");
    LayerParams<float>& p = net.params()[idx];
    if (get<std::uint32_t>(in) != p.weights.size())
      throw IoError("checkpoint weight blob size mismatch");
    for (float& v : p.weights.data()) v = get<float>(in);
    if (get<std::uint32_t>(in) != p.bias.size())
      throw IoError("checkpoint bias blob size mismatch");
    for (float& v : p.bias) v = get<float>(in);
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, net);
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace ssc::nn
