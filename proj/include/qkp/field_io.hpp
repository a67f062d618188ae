#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "qkp/field.hpp"

namespace qkp {

// QKPF layout: "QKPF", u32 n1, u32 n2, f64 l1, f64 l2, then n1*n2 f64 samples
// (x1 fastest). Everything little-endian.
inline constexpr std::array<char, 4> kQkpfMagic{'Q', 'K', 'P', 'F'};

namespace detail {

inline void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint64_t get_le(const std::vector<unsigned char>& in, std::size_t& pos, int bytes) {
  if (pos + bytes > in.size()) throw FormatError("QKPF: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(in[pos + i]) << (8 * i);
  pos += bytes;
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_qkpf(const RealField2D& f) {
  const Grid2D& g = f.grid();
  std::vector<unsigned char> out;
  out.reserve(4 + 8 + 16 + 8 * f.size());
  out.insert(out.end(), kQkpfMagic.begin(), kQkpfMagic.end());
  detail::put_le(out, static_cast<std::uint32_t>(g.n1()), 4);
  detail::put_le(out, static_cast<std::uint32_t>(g.n2()), 4);
  detail::put_le(out, std::bit_cast<std::uint64_t>(g.l1()), 8);
  detail::put_le(out, std::bit_cast<std::uint64_t>(g.l2()), 8);
  for (double v : f.values()) detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline RealField2D decode_qkpf(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || !std::equal(kQkpfMagic.begin(), kQkpfMagic.end(), bytes.begin()))
    throw FormatError("QKPF: bad magic");
  std::size_t pos = 4;
  const auto n1 = static_cast<std::uint32_t>(detail::get_le(bytes, pos, 4));
  const auto n2 = static_cast<std::uint32_t>(detail::get_le(bytes, pos, 4));
  const double l1 = std::bit_cast<double>(detail::get_le(bytes, pos, 8));
  const double l2 = std::bit_cast<double>(detail::get_le(bytes, pos, 8));
  GridPtr g;
  try {
    g = make_grid(static_cast<int>(n1), static_cast<int>(n2), l1, l2);
  } catch (const InvalidParam& e) {
    throw FormatError(std::string("QKPF: bad dimensions: ") + e.what());
  }
  const std::size_t count = std::size_t(n1) * n2;
  if (bytes.size() != pos + 8 * count) throw FormatError("QKPF: payload size mismatch");
  std::vector<double> v(count);
  for (auto& x : v) x = std::bit_cast<double>(detail::get_le(bytes, pos, 8));
  return RealField2D(g, std::move(v));
}

inline void write_qkpf(const std::string& path, const RealField2D& f) {
  const auto bytes = encode_qkpf(f);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("write failed: " + path);
}

inline RealField2D read_qkpf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_qkpf(bytes);
}

}  // namespace qkp
