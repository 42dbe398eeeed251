#include "diffplan/binary_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "diffplan/error.hpp"

namespace diffplan::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

enum DemoFlags : std::uint8_t {
  kHasObstacle = 1,
  kTruncated = 2,
};

}  // namespace

void ByteWriter::u32(std::uint32_t v) {
  v = to_le(v);
  buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
}
void ByteWriter::u64(std::uint64_t v) {
  v = to_le(v);
  buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
}
void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void ByteReader::need(std::size_t n, const char* what) {
  if (data_.size() - pos_ < n) throw FormatError(std::string("unexpected end of data reading ") + what, pos_);
}

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return static_cast<std::uint8_t>(data_[pos_++]);
}
std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return to_le(v);
}
std::uint64_t ByteReader::u64() {
  need(8, "u64");
  std::uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return to_le(v);
}
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }
std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(raw(n));
}
std::string_view ByteReader::raw(std::size_t n) {
  need(n, "bytes");
  std::string_view v = data_.substr(pos_, n);
  pos_ += n;
  return v;
}
void ByteReader::expect_magic(std::string_view magic) {
  const std::size_t at = pos_;
  if (data_.size() - pos_ < magic.size() || data_.substr(pos_, magic.size()) != magic)
    throw FormatError("bad magic, expected '" + std::string(magic) + "'", at);
  pos_ += magic.size();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kFileNotFound, "cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kFileNotFound, "short write: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw Error(ErrorCode::kFileNotFound, "cannot move output into place: " + path);
  }
}

std::string encode_dataset(const datagen::Dataset& ds) {
  ds.validate();
  ByteWriter w;
  w.raw("DPDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.horizon));
  w.f64(ds.dt);
  w.u32(static_cast<std::uint32_t>(ds.demos.size()));
  w.str(ds.map_id);
  w.u64(ds.scene_hash);
  for (const datagen::Demonstration& d : ds.demos) {
    std::uint8_t flags = 0;
    if (d.obstacle) flags |= kHasObstacle;
    if (d.truncated) flags |= kTruncated;
    w.u8(flags);
    w.u32(d.real_length);
    for (const Pose& p : d.traj.poses) {
      w.f64(p.x);
      w.f64(p.y);
      w.f64(p.qz);
      w.f64(p.qw);
    }
    if (d.obstacle) {
      for (Eigen::Index j = 0; j < d.obstacle->cols(); ++j) {
        w.f64((*d.obstacle)(0, j));
        w.f64((*d.obstacle)(1, j));
      }
    }
  }
  return w.take();
}

datagen::Dataset decode_dataset(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("DPDS");
  const std::size_t version_at = r.offset();
  if (r.u32() != kDatasetVersion) throw FormatError("unsupported dataset version", version_at);
  datagen::Dataset ds;
  const std::size_t horizon_at = r.offset();
  ds.horizon = static_cast<int>(r.u32());
  if (ds.horizon < 2) throw FormatError("dataset horizon must be >= 2", horizon_at);
  ds.dt = r.f64();
  const std::uint32_t n = r.u32();
  ds.map_id = r.str();
  ds.scene_hash = r.u64();
  ds.demos.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    datagen::Demonstration d;
    const std::size_t flags_at = r.offset();
    const std::uint8_t flags = r.u8();
    if (flags & ~(kHasObstacle | kTruncated)) throw FormatError("unknown demonstration flags", flags_at);
    d.truncated = (flags & kTruncated) != 0;
    d.real_length = r.u32();
    d.traj.dt = ds.dt;
    d.traj.poses.resize(static_cast<std::size_t>(ds.horizon));
    for (Pose& p : d.traj.poses) {
      p.x = r.f64();
      p.y = r.f64();
      p.qz = r.f64();
      p.qw = r.f64();
    }
    if (flags & kHasObstacle) {
      ObstacleTrack track(2, ds.horizon);
      for (int j = 0; j < ds.horizon; ++j) {
        track(0, j) = r.f64();
        track(1, j) = r.f64();
      }
      d.obstacle = std::move(track);
    }
    ds.demos.push_back(std::move(d));
  }
  if (!r.done()) throw FormatError("trailing bytes after dataset", r.offset());
  return ds;
}

void save_dataset(const datagen::Dataset& ds, const std::string& path) { write_file(path, encode_dataset(ds)); }

datagen::Dataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

}  // namespace diffplan::io
