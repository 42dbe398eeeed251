#include "diffplan/checkpoint.hpp"

#include "diffplan/binary_io.hpp"
#include "diffplan/error.hpp"

namespace diffplan::diffusion {

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const LearnedDenoiser& m = ckpt.model;
  const NetConfig& nc = m.net().config();
  io::ByteWriter w;
  w.raw("DPCK");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(m.schedule().steps));
  w.f64(m.schedule().beta_min);
  w.f64(m.schedule().beta_max);
  w.u32(static_cast<std::uint32_t>(nc.horizon));
  w.u32(static_cast<std::uint32_t>(kPoseChannels));
  for (int v : {nc.base_channels, nc.mid_channels, nc.kernel, nc.time_dim, nc.embed_dim, nc.groups})
    w.u32(static_cast<std::uint32_t>(v));
  for (int c = 0; c < kPoseChannels; ++c) {
    w.f64(m.norm().lo[c]);
    w.f64(m.norm().hi[c]);
  }
  w.u64(ckpt.config_hash);
  w.u64(ckpt.seed);
  const auto& blocks = m.net().blocks();
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.str(b.name);
    w.u64(b.size);
  }
  const std::vector<float>& p = m.net().params();
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.size; ++i) w.f32(p[b.offset + i]);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("DPCK");
  const std::size_t version_at = r.offset();
  if (r.u32() != kCheckpointVersion) throw FormatError("unsupported checkpoint version", version_at);
  const std::size_t sched_at = r.offset();
  const auto steps = static_cast<int>(r.u32());
  const double beta_min = r.f64();
  const double beta_max = r.f64();
  NoiseSchedule sched;
  try {
    sched = make_schedule(steps, beta_min, beta_max);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid schedule: ") + e.what(), sched_at);
  }
  NetConfig nc;
  const std::size_t shape_at = r.offset();
  nc.horizon = static_cast<int>(r.u32());
  if (r.u32() != static_cast<std::uint32_t>(kPoseChannels)) throw FormatError("unexpected channel count", shape_at);
  nc.base_channels = static_cast<int>(r.u32());
  nc.mid_channels = static_cast<int>(r.u32());
  nc.kernel = static_cast<int>(r.u32());
  nc.time_dim = static_cast<int>(r.u32());
  nc.embed_dim = static_cast<int>(r.u32());
  nc.groups = static_cast<int>(r.u32());
  try {
    nc.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid network shape: ") + e.what(), shape_at);
  }
  NormStats norm;
  for (int c = 0; c < kPoseChannels; ++c) {
    norm.lo[c] = r.f64();
    norm.hi[c] = r.f64();
  }
  Checkpoint ckpt{LearnedDenoiser(nc, std::move(sched), norm), 0, 0};
  ckpt.config_hash = r.u64();
  ckpt.seed = r.u64();
  const auto& blocks = ckpt.model.net().blocks();
  const std::size_t table_at = r.offset();
  if (r.u32() != blocks.size()) throw FormatError("weight blob count does not match the network shape", table_at);
  for (const auto& b : blocks) {
    const std::size_t at = r.offset();
    const std::string name = r.str();
    const std::uint64_t len = r.u64();
    if (name != b.name || len != b.size) throw FormatError("weight blob table mismatch for '" + b.name + "'", at);
  }
  std::vector<float>& p = ckpt.model.net().params();
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.size; ++i) p[b.offset + i] = r.f32();
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.offset());
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { io::write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace diffplan::diffusion
