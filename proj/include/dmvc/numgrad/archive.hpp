#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "dmvc/error.hpp"
#include "dmvc/numgrad/param_store.hpp"

namespace dmvc::ng {

// Parameter archive layout (all integers and floats little-endian):
//
//   magic      8 bytes  "DMVCPAR\0"
//   version    u32      kArchiveVersion
//   flags      u32      bit 0: Adam moments present
//   step       u64      optimizer step counter
//   count      u64      number of parameters, then per parameter in name order:
//     name_len u32, name bytes, trainable u8, rank u32, extents u64 x rank,
//     value f64 x size, [first moment f64 x size, second moment f64 x size]
//
// Identical stores always serialize to identical bytes.

inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr char kArchiveMagic[8] = {'D', 'M', 'V', 'C', 'P', 'A', 'R', '\0'};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return read_le(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read_le(4)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(read_le(1)); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw LoadError("parameter archive is truncated");
  }
  std::uint64_t read_le(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize(const ParamStore& store, bool with_moments = true) {
  std::string out(kArchiveMagic, sizeof kArchiveMagic);
  detail::put_u32(out, kArchiveVersion);
  detail::put_u32(out, with_moments ? 1u : 0u);
  detail::put_u64(out, store.step());
  detail::put_u64(out, store.size());
  for (const auto& [name, p] : store) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(p.trainable ? 1 : 0);
    detail::put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto e : p.value.shape()) detail::put_u64(out, e);
    for (double v : p.value.data()) detail::put_f64(out, v);
    if (with_moments) {
      for (double v : p.first_moment.data()) detail::put_f64(out, v);
      for (double v : p.second_moment.data()) detail::put_f64(out, v);
    }
  }
  return out;
}

inline ParamStore deserialize(std::string_view bytes) {
  detail::Reader r(bytes);
  if (r.bytes(sizeof kArchiveMagic) != std::string_view(kArchiveMagic, sizeof kArchiveMagic))
    throw LoadError("not a parameter archive (bad magic)");
  const auto version = r.u32();
  if (version != kArchiveVersion)
    throw LoadError("unsupported parameter archive version " + std::to_string(version));
  const bool with_moments = (r.u32() & 1u) != 0;
  ParamStore store;
  store.set_step(r.u64());
  const auto count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name(r.bytes(r.u32()));
    const bool trainable = r.u8() != 0;
    Shape shape(r.u32());
    for (auto& e : shape) e = r.u64();
    Tensor value(shape);
    for (auto& v : value.data()) v = r.f64();
    auto& p = store.add(name, std::move(value));
    p.trainable = trainable;
    if (with_moments) {
      for (auto& v : p.first_moment.data()) v = r.f64();
      for (auto& v : p.second_moment.data()) v = r.f64();
    }
  }
  if (!r.done()) throw LoadError("parameter archive has trailing bytes");
  return store;
}

inline void save_archive(const std::filesystem::path& path, const ParamStore& store, bool with_moments = true) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError("cannot write parameter archive " + path.string());
  const auto bytes = serialize(store, with_moments);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw LoadError("failed writing parameter archive " + path.string());
}

inline ParamStore load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open parameter archive " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

}  // namespace dmvc::ng
