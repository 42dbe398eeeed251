#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "diffplan/network.hpp"

namespace diffplan::diffusion {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  LearnedDenoiser model;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Header {magic "DPCK", version, T, beta range, L, channel count, network
/// shape, normalization stats, config hash, seed, blob table of (name, length)}
/// followed by little-endian f32 weight blobs in table order.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace diffplan::diffusion
