#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffplan/denoiser.hpp"

namespace diffplan::diffusion {

/// Shape of the temporal U-Net noise predictor.
struct NetConfig {
  int horizon = kDefaultHorizon;  // L, divisible by 4
  int base_channels = 32;
  int mid_channels = 64;
  int kernel = 5;
  int time_dim = 32;
  int embed_dim = 64;
  int groups = 8;

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

/// Batched network inputs. Columns of `x` and `obstacle` hold B consecutive
/// blocks of L waypoints.
template <typename S>
struct NetInputs {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  Mat x;                              // 4 x (B L), normalized noisy trajectories
  std::vector<int> t;                 // B diffusion steps
  Mat start_goal;                     // 8 x B, normalized start and goal poses
  Mat obstacle;                       // 2 x (B L), normalized obstacle tracks
  std::vector<std::uint8_t> use_obstacle;  // B flags; 0 selects the learned null token

  int batch() const { return static_cast<int>(t.size()); }
};

/// Time-aligned obstacle input rows appended to the noisy trajectory: obstacle
/// x, obstacle y and a use-obstacle flag (all zero when the obstacle is masked).
inline constexpr int kObstacleChannels = 3;

/// 1-D convolutional encoder-decoder over the waypoint axis with skip
/// connections, group norm, SiLU and a conditioning vector (sinusoidal time
/// embedding + start/goal embedding + mean-pooled obstacle embedding) added to
/// every residual block. The first block also sees the obstacle track as
/// kObstacleChannels extra input rows. Backward passes are written out layer by
/// layer.
template <typename S>
class TemporalUnet {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  struct Tape;

  explicit TemporalUnet(NetConfig cfg);
  ~TemporalUnet();
  TemporalUnet(const TemporalUnet&);
  TemporalUnet& operator=(const TemporalUnet&);

  const NetConfig& config() const { return cfg_; }

  /// Deterministic initialization from a seed.
  void init(std::uint64_t seed);

  std::size_t num_params() const { return params_.size(); }
  std::vector<S>& params() { return params_; }
  const std::vector<S>& params() const { return params_; }
  std::vector<S>& grads() { return grads_; }
  void zero_grad();

  /// Returns the 4 x (B L) prediction. When `tape` is non-null, intermediates are
  /// kept for backward().
  Mat forward(const NetInputs<S>& in, Tape* tape = nullptr) const;
  /// Accumulates parameter gradients of <dout, forward(in)> into grads().
  void backward(const Tape& tape, const Mat& dout);

  /// Named parameter blocks in storage order (used for checkpoint blobs).
  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  struct Layers;

  NetConfig cfg_;
  std::vector<S> params_;
  std::vector<S> grads_;
  std::vector<Block> blocks_;
  std::unique_ptr<Layers> layers_;
};

extern template class TemporalUnet<float>;
extern template class TemporalUnet<double>;

/// Sinusoidal embedding of the diffusion step, dim x B.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> time_embedding(const std::vector<int>& t, int dim);

/// Assembles network inputs from normalized trajectories and world-unit conditioning.
template <typename S>
NetInputs<S> make_inputs(const std::vector<TrajArray>& x, const std::vector<int>& t,
                         const std::vector<const Conditioning*>& cond, const NormStats& norm);

/// Mean squared error between the network's epsilon prediction and `eps`, per
/// element. Parameter gradients are accumulated into net.grads().
template <typename S>
double loss_and_grad(TemporalUnet<S>& net, const NetInputs<S>& in,
                     const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& eps);

/// Trained network plus the schedule and normalization it was trained with.
class LearnedDenoiser final : public Denoiser {
 public:
  LearnedDenoiser(NetConfig cfg, NoiseSchedule sched, NormStats norm);

  int horizon() const override { return net_.config().horizon; }
  const NoiseSchedule& schedule() const override { return sched_; }
  const NormStats& norm() const override { return norm_; }
  std::vector<TrajArray> predict(const std::vector<TrajArray>& x, int t, const Conditioning& cond) const override;

  TemporalUnet<float>& net() { return net_; }
  const TemporalUnet<float>& net() const { return net_; }

 private:
  TemporalUnet<float> net_;
  NoiseSchedule sched_;
  NormStats norm_;
};

}  // namespace diffplan::diffusion
