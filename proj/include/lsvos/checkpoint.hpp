#pragma once

// Network checkpoint blob (all integers and floats little-endian):
//
//   magic        "VOSN"
//   version      u32 (= 1)
//   n_layers     u32
//   dims         u32 x (n_layers + 1)
//   activations  u8  x n_layers     (0 = identity, 1 = relu)
//   per layer:   weights f64 x (out * in), row-major (row = output unit)
//                bias    f64 x out

#include <cstdint>
#include <istream>
#include <ostream>

#include "lsvos/binary_io.hpp"
#include "lsvos/numerics.hpp"

namespace lsvos {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_net(std::ostream& os, const DenseNet& net) {
  io::write_magic(os, "VOSN");
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.depth()));
  for (std::size_t d : net.dims()) io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (Activation a : net.activations()) io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(a));
  for (const auto& layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) io::write_f64(os, layer.weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) io::write_f64(os, layer.bias.data()[i]);
  }
}

inline DenseNet read_net(std::istream& is) {
  io::expect_magic(is, "VOSN");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto n_layers = io::read_le<std::uint32_t>(is);
  if (n_layers == 0 || n_layers > 1024) throw FormatError("checkpoint: bad layer count");
  std::vector<std::size_t> dims(n_layers + 1);
  for (auto& d : dims) {
    d = io::read_le<std::uint32_t>(is);
    if (d == 0 || d > (1u << 20)) throw FormatError("checkpoint: bad layer dim");
  }
  std::vector<Activation> acts(n_layers);
  for (auto& a : acts) {
    const auto code = io::read_le<std::uint8_t>(is);
    if (code > 1) throw FormatError("checkpoint: unknown activation code");
    a = static_cast<Activation>(code);
  }
  DenseNet net(dims, acts);
  for (auto& layer : net.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = io::read_f64(is);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = io::read_f64(is);
  }
  if (!net.all_finite()) throw FormatError("checkpoint: non-finite parameter");
  return net;
}

}  // namespace lsvos
