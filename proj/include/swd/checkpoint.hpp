#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "swd/sample_io.hpp"
#include "swd/tensor.hpp"

namespace swd {

inline constexpr char kCheckpointMagic[8] = {'S', 'W', 'D', 'C', 'K', 'P', 'T', '1'};

// Checkpoint container: 8-byte magic, u32 tensor count, then per tensor a u16
// name length, the UTF-8 name, a u8 rank, u32 dims and little-endian f32 data.
// std::map keys keep the write order deterministic, so round-trips are
// bit-exact.
inline void write_checkpoint(const std::string& path,
                             const std::map<std::string, Array<float>>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kCheckpointMagic, 8);
  io_detail::put_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, a] : tensors) {
    if (name.size() > 0xffff)
      throw std::invalid_argument("checkpoint: tensor name too long: " + name);
    const uint16_t len = static_cast<uint16_t>(name.size());
    const unsigned char lb[2] = {static_cast<unsigned char>(len & 0xff),
                                 static_cast<unsigned char>(len >> 8)};
    os.write(reinterpret_cast<const char*>(lb), 2);
    os.write(name.data(), len);
    if (a.shape.size() > 0xff)
      throw std::invalid_argument("checkpoint: rank too large for " + name);
    os.put(static_cast<char>(a.shape.size()));
    for (int d : a.shape) io_detail::put_u32(os, static_cast<uint32_t>(d));
    for (float v : a.data) io_detail::put_f32(os, v);
  }
  if (!os) throw FormatError("failed writing " + path);
}

inline std::map<std::string, Array<float>> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError("bad magic in " + path + " (not an SWDCKPT1 file)");
  const uint32_t count = io_detail::get_u32(is, path);
  std::map<std::string, Array<float>> out;
  for (uint32_t i = 0; i < count; ++i) {
    unsigned char lb[2];
    if (!is.read(reinterpret_cast<char*>(lb), 2))
      throw FormatError("truncated payload in " + path);
    const uint16_t len = static_cast<uint16_t>(lb[0] | (lb[1] << 8));
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError("truncated payload in " + path);
    int rank = is.get();
    if (rank == EOF) throw FormatError("truncated payload in " + path);
    Shape shape(static_cast<size_t>(rank));
    for (auto& d : shape) d = static_cast<int>(io_detail::get_u32(is, path));
    Array<float> a(shape);
    for (auto& v : a.data) v = io_detail::get_f32(is, path);
    if (out.count(name)) throw FormatError("duplicate tensor '" + name + "' in " + path);
    out.emplace(std::move(name), std::move(a));
  }
  char extra;
  if (is.read(&extra, 1)) throw FormatError("trailing bytes in " + path);
  return out;
}

// Strings ride in checkpoints as tensors of byte values.
inline Array<float> text_to_array(const std::string& text) {
  Array<float> a(Shape{static_cast<int>(text.size())});
  for (size_t i = 0; i < text.size(); ++i)
    a.data[i] = static_cast<float>(static_cast<unsigned char>(text[i]));
  return a;
}

inline std::string array_to_text(const Array<float>& a) {
  std::string s(a.data.size(), '\0');
  for (size_t i = 0; i < a.data.size(); ++i)
    s[i] = static_cast<char>(static_cast<unsigned char>(a.data[i]));
  return s;
}

}  // namespace swd
