#pragma once

// Flat binary container for named arrays.
//
//   magic    4 bytes  "STDD"
//   version  u32      currently 1
//   count    u32      number of arrays
//   per array:
//     name_len u32, name bytes (UTF-8)
//     rank     u32, extents u64 x rank
//     payload  f32 x product(extents), row-major
//
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "stdd/tensor.hpp"

namespace stdd {

inline constexpr char kStddMagic[4] = {'S', 'T', 'D', 'D'};
inline constexpr std::uint32_t kStddVersion = 1;

// Ordered collection of named tensors; iteration order is by name.
using NamedTensors = std::map<std::string, Tensor>;

namespace detail {

static_assert(std::endian::native == std::endian::little, "STDD I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(path + ": truncated STDD file");
  return v;
}

}  // namespace detail

inline void write_stdd(std::ostream& os, const NamedTensors& arrays) {
  os.write(kStddMagic, 4);
  detail::put<std::uint32_t>(os, kStddVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, t] : arrays) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) detail::put<std::uint64_t>(os, e);
    for (real v : t.data()) detail::put<float>(os, static_cast<float>(v));
  }
}

inline NamedTensors read_stdd(std::istream& is, const std::string& path = "<stream>") {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kStddMagic, 4) != 0) throw IoError(path + ": bad STDD magic");
  const auto version = detail::get<std::uint32_t>(is, path);
  if (version != kStddVersion) throw IoError(path + ": unsupported STDD version " + std::to_string(version));
  const auto count = detail::get<std::uint32_t>(is, path);
  NamedTensors out;
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto len = detail::get<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError(path + ": truncated array name");
    const auto rank = detail::get<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(detail::get<std::uint64_t>(is, path));
    std::vector<real> data(shape_size(shape));
    for (auto& v : data) v = static_cast<real>(detail::get<float>(is, path));
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

inline void save_stdd(const std::string& path, const NamedTensors& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_stdd(os, arrays);
  if (!os) throw IoError("write failed: " + path);
}

inline NamedTensors load_stdd(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_stdd(is, path);
}

}  // namespace stdd
