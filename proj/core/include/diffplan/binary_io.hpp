#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "diffplan/datagen.hpp"

namespace diffplan::io {

/// Little-endian encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);
  void raw(std::string_view s) { buf_.append(s); }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Little-endian decoder; every read past the end raises FormatError with the
/// byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  std::string_view raw(std::size_t n);
  void expect_magic(std::string_view magic);

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n, const char* what);

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
/// Writes through a temporary file and renames, so a failed write leaves no partial output.
void write_file(const std::string& path, std::string_view bytes);

inline constexpr std::uint32_t kDatasetVersion = 1;

/// Header {magic "DPDS", version, L, dt, N_D, map_id, scene hash}, then per
/// demo {flags, real length, 4 x L f64 poses, optional 2 x L f64 obstacle}.
std::string encode_dataset(const datagen::Dataset& ds);
datagen::Dataset decode_dataset(std::string_view bytes);
void save_dataset(const datagen::Dataset& ds, const std::string& path);
datagen::Dataset load_dataset(const std::string& path);

}  // namespace diffplan::io
