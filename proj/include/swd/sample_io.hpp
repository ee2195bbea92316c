#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "swd/synthgen.hpp"
#include "swd/tensor.hpp"

namespace swd {

namespace io_detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated payload in " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

inline float get_f32(std::istream& is, const std::string& path) {
  const uint32_t u = get_u32(is, path);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace io_detail

inline constexpr char kTensorMagic[8] = {'S', 'W', 'D', 'T', 'E', 'N', 'S', '1'};

// One CHW float32 array: 8-byte magic, little-endian u32 (channels, height,
// width), then channels*height*width little-endian floats in (c,y,x) order.
inline void write_tensor_file(const std::string& path, const Array<float>& a) {
  if (a.shape.size() != 3)
    throw std::invalid_argument("write_tensor_file: expected CHW, got " +
                                shape_str(a.shape));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.write(kTensorMagic, 8);
  io_detail::put_u32(os, static_cast<uint32_t>(a.shape[0]));
  io_detail::put_u32(os, static_cast<uint32_t>(a.shape[1]));
  io_detail::put_u32(os, static_cast<uint32_t>(a.shape[2]));
  for (float v : a.data) io_detail::put_f32(os, v);
  if (!os) throw FormatError("failed writing " + path);
}

inline Array<float> read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0)
    throw FormatError("bad magic in " + path + " (not an SWDTENS1 file)");
  const uint32_t c = io_detail::get_u32(is, path);
  const uint32_t h = io_detail::get_u32(is, path);
  const uint32_t w = io_detail::get_u32(is, path);
  Array<float> a(Shape{static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
  for (auto& v : a.data) v = io_detail::get_f32(is, path);
  char extra;
  if (is.read(&extra, 1))
    throw FormatError("trailing bytes in " + path);
  return a;
}

inline const std::vector<std::string>& sample_array_names() {
  static const std::vector<std::string> names{"i_l",     "i_r",     "clean_l", "clean_r",
                                              "trans_l", "trans_r", "drop_l",  "drop_r",
                                              "disp_l",  "disp_r",  "mask_l",  "mask_r"};
  return names;
}

inline std::map<std::string, std::string> parse_kv_text(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  return parse_kv_text(is);
}

// Sample container: a directory holding manifest.txt plus one SWDTENS1 file
// per array. Round-trips are bit-exact.
inline void write_sample(const StereoSample& s, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream os(dir + "/manifest.txt");
    if (!os) throw FormatError("cannot open " + dir + "/manifest.txt for writing");
    os << "format_version = 1\n";
    os << "width = " << s.width << "\n";
    os << "height = " << s.height << "\n";
    os << "seed = " << s.seed << "\n";
    os << "drop_mode = " << drop_mode_name(s.mode) << "\n";
    os << "arrays = ";
    const auto& names = sample_array_names();
    for (size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
    os << "\n";
  }
  const Array<float>* arrays[] = {&s.i_l,    &s.i_r,    &s.clean_l, &s.clean_r,
                                  &s.trans_l, &s.trans_r, &s.drop_l,  &s.drop_r,
                                  &s.disp_l,  &s.disp_r,  &s.mask_l,  &s.mask_r};
  const auto& names = sample_array_names();
  for (size_t i = 0; i < names.size(); ++i)
    write_tensor_file(dir + "/" + names[i] + ".swdt", *arrays[i]);
}

inline StereoSample read_sample(const std::string& dir) {
  auto kv = parse_kv_file(dir + "/manifest.txt");
  auto need = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end())
      throw FormatError("manifest " + dir + "/manifest.txt missing key '" + k + "'");
    return it->second;
  };
  if (need("format_version") != "1")
    throw FormatError("unsupported format_version '" + kv["format_version"] + "' in " + dir);
  StereoSample s;
  s.width = std::stoi(need("width"));
  s.height = std::stoi(need("height"));
  s.seed = static_cast<uint64_t>(std::stoull(need("seed")));
  s.mode = drop_mode_from_name(need("drop_mode"));

  Array<float>* arrays[] = {&s.i_l,    &s.i_r,    &s.clean_l, &s.clean_r,
                            &s.trans_l, &s.trans_r, &s.drop_l,  &s.drop_r,
                            &s.disp_l,  &s.disp_r,  &s.mask_l,  &s.mask_r};
  const auto& names = sample_array_names();
  for (size_t i = 0; i < names.size(); ++i) {
    const std::string path = dir + "/" + names[i] + ".swdt";
    *arrays[i] = read_tensor_file(path);
    const Shape& sh = arrays[i]->shape;
    if (sh[1] != s.height || sh[2] != s.width)
      throw FormatError("array " + path + " dims " + shape_str(sh) +
                        " disagree with manifest " + std::to_string(s.width) + "x" +
                        std::to_string(s.height));
  }
  return s;
}

// Lists sample subdirectories (those with a manifest.txt), sorted by name.
inline std::vector<std::string> list_sample_dirs(const std::string& root) {
  namespace fs = std::filesystem;
  std::vector<std::string> dirs;
  if (!fs::is_directory(root)) throw FormatError("not a directory: " + root);
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "manifest.txt"))
      dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// 8-bit PPM image from a (3,H,W) array in [0,1].
inline void write_ppm(const std::string& path, const Array<float>& img) {
  if (img.shape.size() != 3 || img.shape[0] != 3)
    throw std::invalid_argument("write_ppm: expected (3,H,W), got " + shape_str(img.shape));
  const int H = img.shape[1], W = img.shape[2];
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "P6\n" << W << " " << H << "\n255\n";
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::min(1.0f, std::max(0.0f, img.at(c, y, x)));
        os.put(static_cast<char>(static_cast<int>(v * 255.0f + 0.5f)));
      }
}

}  // namespace swd
