#include "diffplan/network.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "diffplan/error.hpp"

namespace diffplan::diffusion {

void NetConfig::validate() const {
  if (horizon < 4 || horizon % 4 != 0) throw_invalid("network horizon must be a positive multiple of 4");
  if (base_channels <= 0 || mid_channels <= 0) throw_invalid("network channel counts must be positive");
  if (kernel <= 0 || kernel % 2 == 0) throw_invalid("network kernel must be odd");
  if (time_dim < 2 || time_dim % 2 != 0) throw_invalid("time embedding dimension must be even");
  if (embed_dim <= 0) throw_invalid("embedding dimension must be positive");
  if (groups <= 0 || base_channels % groups != 0 || mid_channels % groups != 0)
    throw_invalid("group count must divide the channel counts");
}

namespace {

template <typename S>
using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct Slot {
  std::size_t off = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

template <typename S>
Eigen::Map<const MatT<S>> view(const std::vector<S>& p, const Slot& s) {
  return {p.data() + s.off, s.rows, s.cols};
}
template <typename S>
Eigen::Map<MatT<S>> view(std::vector<S>& p, const Slot& s) {
  return {p.data() + s.off, s.rows, s.cols};
}

template <typename S>
MatT<S> silu(const MatT<S>& x) {
  return x.unaryExpr([](S v) { return v / (S(1) + std::exp(-v)); });
}

template <typename S>
MatT<S> silu_back(const MatT<S>& x, const MatT<S>& dy) {
  return dy.binaryExpr(x, [](S g, S v) {
    const S s = S(1) / (S(1) + std::exp(-v));
    return g * s * (S(1) + v * (S(1) - s));
  });
}

struct Linear {
  Slot w, b;

  template <typename S>
  MatT<S> forward(const std::vector<S>& p, const MatT<S>& x) const {
    MatT<S> y = view(p, w) * x;
    y.colwise() += view(p, b).col(0);
    return y;
  }
  template <typename S>
  void backward(const std::vector<S>& p, std::vector<S>& g, const MatT<S>& x, const MatT<S>& dy,
                MatT<S>* dx) const {
    view(g, w).noalias() += dy * x.transpose();
    view(g, b).col(0) += dy.rowwise().sum();
    if (dx != nullptr) *dx = view(p, w).transpose() * dy;
  }
};

// Same-padded 1-D convolution applied independently to each length-L block of
// columns. Weight layout is cout x (k cin) with column index kk * cin + ci.
struct Conv {
  int cin = 0, cout = 0, k = 1;
  Slot w, b;

  template <typename S>
  MatT<S> im2col(const MatT<S>& x, int len) const {
    if (k == 1) return x;
    const Eigen::Index n = x.cols();
    const int pad = k / 2;
    MatT<S> cols = MatT<S>::Zero(static_cast<Eigen::Index>(k) * cin, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const Eigen::Index base = c - c % len;
      const Eigen::Index j = c % len;
      for (int kk = 0; kk < k; ++kk) {
        const Eigen::Index src = j + kk - pad;
        if (src < 0 || src >= len) continue;
        cols.block(static_cast<Eigen::Index>(kk) * cin, c, cin, 1) = x.col(base + src);
      }
    }
    return cols;
  }

  template <typename S>
  MatT<S> forward(const std::vector<S>& p, const MatT<S>& x, int len, MatT<S>* cols_out) const {
    MatT<S> cols = im2col(x, len);
    MatT<S> y = view(p, w) * cols;
    y.colwise() += view(p, b).col(0);
    if (cols_out != nullptr) *cols_out = std::move(cols);
    return y;
  }

  template <typename S>
  MatT<S> backward(const std::vector<S>& p, std::vector<S>& g, const MatT<S>& cols, const MatT<S>& dy,
                   int len, bool need_dx) const {
    view(g, w).noalias() += dy * cols.transpose();
    view(g, b).col(0) += dy.rowwise().sum();
    if (!need_dx) return {};
    MatT<S> dcols = view(p, w).transpose() * dy;
    if (k == 1) return dcols;
    const Eigen::Index n = dy.cols();
    const int pad = k / 2;
    MatT<S> dx = MatT<S>::Zero(cin, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const Eigen::Index base = c - c % len;
      const Eigen::Index j = c % len;
      for (int kk = 0; kk < k; ++kk) {
        const Eigen::Index src = j + kk - pad;
        if (src < 0 || src >= len) continue;
        dx.col(base + src) += dcols.block(static_cast<Eigen::Index>(kk) * cin, c, cin, 1);
      }
    }
    return dx;
  }
};

constexpr double kNormEps = 1e-5;

struct GroupNorm {
  int channels = 0, groups = 1;
  Slot gamma, beta;

  template <typename S>
  MatT<S> forward(const std::vector<S>& p, const MatT<S>& x, int len, MatT<S>& xhat, MatT<S>& inv_std) const {
    const int cg = channels / groups;
    const Eigen::Index batch = x.cols() / len;
    xhat.resize(x.rows(), x.cols());
    inv_std.resize(groups, batch);
    const S count = static_cast<S>(cg * len);
    for (Eigen::Index bi = 0; bi < batch; ++bi) {
      for (int gi = 0; gi < groups; ++gi) {
        auto blk = x.block(gi * cg, bi * len, cg, len);
        const S mean = blk.sum() / count;
        const S var = (blk.array() - mean).square().sum() / count;
        const S inv = S(1) / std::sqrt(var + static_cast<S>(kNormEps));
        inv_std(gi, bi) = inv;
        xhat.block(gi * cg, bi * len, cg, len) = (blk.array() - mean) * inv;
      }
    }
    MatT<S> y = view(p, gamma).col(0).asDiagonal() * xhat;
    y.colwise() += view(p, beta).col(0);
    return y;
  }

  template <typename S>
  MatT<S> backward(const std::vector<S>& p, std::vector<S>& g, const MatT<S>& xhat, const MatT<S>& inv_std,
                   const MatT<S>& dy, int len) const {
    view(g, gamma).col(0) += (dy.array() * xhat.array()).rowwise().sum().matrix();
    view(g, beta).col(0) += dy.rowwise().sum();
    const MatT<S> dxhat = view(p, gamma).col(0).asDiagonal() * dy;
    const int cg = channels / groups;
    const Eigen::Index batch = dy.cols() / len;
    const S count = static_cast<S>(cg * len);
    MatT<S> dx(dy.rows(), dy.cols());
    for (Eigen::Index bi = 0; bi < batch; ++bi) {
      for (int gi = 0; gi < groups; ++gi) {
        auto dh = dxhat.block(gi * cg, bi * len, cg, len);
        auto xh = xhat.block(gi * cg, bi * len, cg, len);
        const S m1 = dh.sum() / count;
        const S m2 = (dh.array() * xh.array()).sum() / count;
        dx.block(gi * cg, bi * len, cg, len) = inv_std(gi, bi) * (dh.array() - m1 - xh.array() * m2);
      }
    }
    return dx;
  }
};

template <typename S>
MatT<S> pool2(const MatT<S>& x) {
  MatT<S> y(x.rows(), x.cols() / 2);
  for (Eigen::Index c = 0; c < y.cols(); ++c) y.col(c) = S(0.5) * (x.col(2 * c) + x.col(2 * c + 1));
  return y;
}

template <typename S>
MatT<S> pool2_back(const MatT<S>& dy) {
  MatT<S> dx(dy.rows(), dy.cols() * 2);
  for (Eigen::Index c = 0; c < dy.cols(); ++c) {
    dx.col(2 * c) = S(0.5) * dy.col(c);
    dx.col(2 * c + 1) = S(0.5) * dy.col(c);
  }
  return dx;
}

template <typename S>
MatT<S> up2(const MatT<S>& x) {
  MatT<S> y(x.rows(), x.cols() * 2);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    y.col(2 * c) = x.col(c);
    y.col(2 * c + 1) = x.col(c);
  }
  return y;
}

template <typename S>
MatT<S> up2_back(const MatT<S>& dy) {
  MatT<S> dx(dy.rows(), dy.cols() / 2);
  for (Eigen::Index c = 0; c < dx.cols(); ++c) dx.col(c) = dy.col(2 * c) + dy.col(2 * c + 1);
  return dx;
}

template <typename S>
MatT<S> vcat(const MatT<S>& a, const MatT<S>& b) {
  MatT<S> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace

template <typename S>
struct ResCache {
  MatT<S> x, cols_a, xhat_a, inv_a, act_a, cols_b, xhat_b, inv_b, act_b, cols_s;
};

namespace {

// conv -> norm -> SiLU -> + context projection -> conv -> norm -> SiLU, plus a
// (projected) residual path.
struct ResBlock {
  int cin = 0, cout = 0;
  Conv a, b, skip;
  GroupNorm na, nb;
  Linear film;
  bool project = false;

  template <typename S>
  MatT<S> forward(const std::vector<S>& p, const MatT<S>& x, int len, const MatT<S>& ctx, ResCache<S>& c) const {
    c.x = x;
    MatT<S> h = a.forward(p, x, len, &c.cols_a);
    c.act_a = na.forward(p, h, len, c.xhat_a, c.inv_a);
    h = silu(c.act_a);
    const MatT<S> e = film.forward(p, ctx);
    for (Eigen::Index bi = 0; bi < e.cols(); ++bi) h.middleCols(bi * len, len).colwise() += e.col(bi);
    h = b.forward(p, h, len, &c.cols_b);
    c.act_b = nb.forward(p, h, len, c.xhat_b, c.inv_b);
    h = silu(c.act_b);
    if (project) {
      h += skip.forward(p, x, len, &c.cols_s);
    } else {
      h += x;
    }
    return h;
  }

  template <typename S>
  MatT<S> backward(const std::vector<S>& p, std::vector<S>& g, const ResCache<S>& c, const MatT<S>& dout, int len,
                   const MatT<S>& ctx, MatT<S>& dctx) const {
    MatT<S> dh = silu_back(c.act_b, dout);
    dh = nb.backward(p, g, c.xhat_b, c.inv_b, dh, len);
    dh = b.backward(p, g, c.cols_b, dh, len, true);
    const Eigen::Index batch = ctx.cols();
    MatT<S> de(cout, batch);
    for (Eigen::Index bi = 0; bi < batch; ++bi) de.col(bi) = dh.middleCols(bi * len, len).rowwise().sum();
    MatT<S> dctx_part;
    film.backward(p, g, ctx, de, &dctx_part);
    dctx += dctx_part;
    dh = silu_back(c.act_a, dh);
    dh = na.backward(p, g, c.xhat_a, c.inv_a, dh, len);
    MatT<S> dx = a.backward(p, g, c.cols_a, dh, len, true);
    if (project) {
      dx += skip.backward(p, g, c.cols_s, dout, len, true);
    } else {
      dx += dout;
    }
    return dx;
  }
};

}  // namespace

template <typename S>
struct TemporalUnet<S>::Layers {
  Linear t1, t2, sg, obs;
  Slot null_token;
  ResBlock e0, e1, mid, d1, d0;
  Conv out;
};

template <typename S>
struct TemporalUnet<S>::Tape {
  int batch = 0;
  int len = 0;
  MatT<S> temb0, t1_pre, t_act, sg_in, obs_in, obs_pre, ctx_pre, ctx;
  std::vector<std::uint8_t> use_obstacle;
  ResCache<S> e0, e1, mid, d1, d0;
  MatT<S> d0_out;
};

template <typename S>
TemporalUnet<S>::TemporalUnet(NetConfig cfg) : cfg_(cfg), layers_(std::make_unique<Layers>()) {
  cfg_.validate();
  std::size_t total = 0;
  auto slot = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    Slot s{total, rows, cols};
    blocks_.push_back({name, total, static_cast<std::size_t>(rows * cols)});
    total += static_cast<std::size_t>(rows * cols);
    return s;
  };
  auto linear = [&](const std::string& name, int in, int out) {
    return Linear{slot(name + ".w", out, in), slot(name + ".b", out, 1)};
  };
  auto conv = [&](const std::string& name, int cin, int cout, int k) {
    Conv c;
    c.cin = cin;
    c.cout = cout;
    c.k = k;
    c.w = slot(name + ".w", cout, static_cast<Eigen::Index>(cin) * k);
    c.b = slot(name + ".b", cout, 1);
    return c;
  };
  auto norm = [&](const std::string& name, int ch) {
    GroupNorm n;
    n.channels = ch;
    n.groups = cfg_.groups;
    n.gamma = slot(name + ".gamma", ch, 1);
    n.beta = slot(name + ".beta", ch, 1);
    return n;
  };
  auto res = [&](const std::string& name, int cin, int cout) {
    ResBlock r;
    r.cin = cin;
    r.cout = cout;
    r.a = conv(name + ".conv_a", cin, cout, cfg_.kernel);
    r.na = norm(name + ".norm_a", cout);
    r.film = linear(name + ".film", cfg_.embed_dim, cout);
    r.b = conv(name + ".conv_b", cout, cout, cfg_.kernel);
    r.nb = norm(name + ".norm_b", cout);
    r.project = cin != cout;
    if (r.project) r.skip = conv(name + ".skip", cin, cout, 1);
    return r;
  };

  const int c1 = cfg_.base_channels;
  const int c2 = cfg_.mid_channels;
  const int e = cfg_.embed_dim;
  Layers& l = *layers_;
  l.t1 = linear("time.fc1", cfg_.time_dim, e);
  l.t2 = linear("time.fc2", e, e);
  l.sg = linear("endpoints.fc", 8, e);
  l.obs = linear("obstacle.fc", 2, e);
  l.null_token = slot("obstacle.null", e, 1);
  l.e0 = res("down0", kPoseChannels + kObstacleChannels, c1);
  l.e1 = res("down1", c1, c2);
  l.mid = res("mid", c2, c2);
  l.d1 = res("up1", 2 * c2, c1);
  l.d0 = res("up0", 2 * c1, c1);
  l.out = conv("head", c1, kPoseChannels, 1);

  params_.assign(total, S(0));
  grads_.assign(total, S(0));
}

template <typename S>
TemporalUnet<S>::~TemporalUnet() = default;

template <typename S>
TemporalUnet<S>::TemporalUnet(const TemporalUnet& o)
    : cfg_(o.cfg_),
      params_(o.params_),
      grads_(o.grads_),
      blocks_(o.blocks_),
      layers_(std::make_unique<Layers>(*o.layers_)) {}

template <typename S>
TemporalUnet<S>& TemporalUnet<S>::operator=(const TemporalUnet& o) {
  if (this != &o) {
    cfg_ = o.cfg_;
    params_ = o.params_;
    grads_ = o.grads_;
    blocks_ = o.blocks_;
    layers_ = std::make_unique<Layers>(*o.layers_);
  }
  return *this;
}

template <typename S>
void TemporalUnet<S>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const Block& blk : blocks_) {
    S* dst = params_.data() + blk.offset;
    const std::string& n = blk.name;
    auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".gamma")) {
      std::fill(dst, dst + blk.size, S(1));
    } else if (ends_with(".beta") || ends_with(".null")) {
      std::fill(dst, dst + blk.size, S(0));
    } else {
      // Fan-in of the matching weight block decides the uniform bound for both
      // weights and biases.
      const std::string stem = n.substr(0, n.size() - 2);
      std::size_t fan_in = 1;
      for (const Block& w : blocks_) {
        if (w.name == stem + ".w") {
          std::size_t rows = 1;
          for (const Block& bias : blocks_)
            if (bias.name == stem + ".b") rows = bias.size;
          fan_in = w.size / rows;
        }
      }
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < blk.size; ++i) dst[i] = static_cast<S>(dist(rng));
    }
  }
  zero_grad();
}

template <typename S>
void TemporalUnet<S>::zero_grad() {
  std::fill(grads_.begin(), grads_.end(), S(0));
}

template <typename S>
MatT<S> time_embedding(const std::vector<int>& t, int dim) {
  const int half = dim / 2;
  MatT<S> out(dim, static_cast<Eigen::Index>(t.size()));
  for (std::size_t b = 0; b < t.size(); ++b) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      const double arg = t[b] * freq;
      out(i, static_cast<Eigen::Index>(b)) = static_cast<S>(std::sin(arg));
      out(half + i, static_cast<Eigen::Index>(b)) = static_cast<S>(std::cos(arg));
    }
  }
  return out;
}

template <typename S>
typename TemporalUnet<S>::Mat TemporalUnet<S>::forward(const NetInputs<S>& in, Tape* tape) const {
  const Layers& l = *layers_;
  const int len = cfg_.horizon;
  const int batch = in.batch();
  if (batch <= 0) throw_invalid("network forward needs a non-empty batch");
  if (in.x.rows() != kPoseChannels || in.x.cols() != static_cast<Eigen::Index>(batch) * len)
    throw Error(ErrorCode::kShapeMismatch, "network input must be 4 x (B L)");
  if (in.start_goal.rows() != 8 || in.start_goal.cols() != batch)
    throw Error(ErrorCode::kShapeMismatch, "endpoint conditioning must be 8 x B");
  if (static_cast<int>(in.use_obstacle.size()) != batch)
    throw Error(ErrorCode::kShapeMismatch, "obstacle flags must have one entry per batch member");
  bool any_obstacle = false;
  for (std::uint8_t f : in.use_obstacle) any_obstacle = any_obstacle || f != 0;
  if (any_obstacle && (in.obstacle.rows() != 2 || in.obstacle.cols() != in.x.cols()))
    throw Error(ErrorCode::kShapeMismatch, "obstacle input must be 2 x (B L)");

  Tape local;
  Tape& tp = tape != nullptr ? *tape : local;
  tp.batch = batch;
  tp.len = len;
  tp.use_obstacle = in.use_obstacle;

  tp.temb0 = time_embedding<S>(in.t, cfg_.time_dim);
  tp.t1_pre = l.t1.forward(params_, tp.temb0);
  tp.t_act = silu(tp.t1_pre);
  tp.ctx_pre = l.t2.forward(params_, tp.t_act);
  tp.sg_in = in.start_goal;
  tp.ctx_pre += l.sg.forward(params_, tp.sg_in);
  const auto null_token = view(params_, l.null_token).col(0);
  if (any_obstacle) {
    tp.obs_in = in.obstacle;
    tp.obs_pre = l.obs.forward(params_, tp.obs_in);
    const MatT<S> act = silu(tp.obs_pre);
    for (int b = 0; b < batch; ++b) {
      if (in.use_obstacle[b] != 0) {
        tp.ctx_pre.col(b) += act.middleCols(static_cast<Eigen::Index>(b) * len, len).rowwise().mean();
      } else {
        tp.ctx_pre.col(b) += null_token;
      }
    }
  } else {
    tp.ctx_pre.colwise() += null_token;
  }
  tp.ctx = silu(tp.ctx_pre);

  MatT<S> x_in = MatT<S>::Zero(kPoseChannels + kObstacleChannels, in.x.cols());
  x_in.topRows(kPoseChannels) = in.x;
  for (int b = 0; b < batch; ++b) {
    if (in.use_obstacle[b] == 0) continue;
    const Eigen::Index c0 = static_cast<Eigen::Index>(b) * len;
    x_in.block(kPoseChannels, c0, 2, len) = in.obstacle.middleCols(c0, len);
    x_in.block(kPoseChannels + 2, c0, 1, len).setOnes();
  }
  const MatT<S> h0 = l.e0.forward(params_, x_in, len, tp.ctx, tp.e0);
  const MatT<S> h1 = l.e1.forward(params_, pool2(h0), len / 2, tp.ctx, tp.e1);
  const MatT<S> hm = l.mid.forward(params_, pool2(h1), len / 4, tp.ctx, tp.mid);
  const MatT<S> g1 = l.d1.forward(params_, vcat(up2(hm), h1), len / 2, tp.ctx, tp.d1);
  tp.d0_out = l.d0.forward(params_, vcat(up2(g1), h0), len, tp.ctx, tp.d0);
  return l.out.forward(params_, tp.d0_out, len, static_cast<MatT<S>*>(nullptr));
}

template <typename S>
void TemporalUnet<S>::backward(const Tape& tp, const Mat& dout) {
  const Layers& l = *layers_;
  const int len = tp.len;
  const int batch = tp.batch;
  const int c1 = cfg_.base_channels;
  const int c2 = cfg_.mid_channels;
  if (dout.rows() != kPoseChannels || dout.cols() != static_cast<Eigen::Index>(batch) * len)
    throw Error(ErrorCode::kShapeMismatch, "backward gradient must match the forward output");

  MatT<S> dctx = MatT<S>::Zero(cfg_.embed_dim, batch);
  MatT<S> d = l.out.backward(params_, grads_, tp.d0_out, dout, len, true);
  d = l.d0.backward(params_, grads_, tp.d0, d, len, tp.ctx, dctx);
  MatT<S> dh0 = d.bottomRows(c1);
  d = up2_back<S>(d.topRows(c1));
  d = l.d1.backward(params_, grads_, tp.d1, d, len / 2, tp.ctx, dctx);
  MatT<S> dh1 = d.bottomRows(c2);
  d = up2_back<S>(d.topRows(c2));
  d = l.mid.backward(params_, grads_, tp.mid, d, len / 4, tp.ctx, dctx);
  dh1 += pool2_back(d);
  d = l.e1.backward(params_, grads_, tp.e1, dh1, len / 2, tp.ctx, dctx);
  dh0 += pool2_back(d);
  l.e0.backward(params_, grads_, tp.e0, dh0, len, tp.ctx, dctx);

  const MatT<S> dpre = silu_back(tp.ctx_pre, dctx);
  MatT<S> dt_act;
  l.t2.backward(params_, grads_, tp.t_act, dpre, &dt_act);
  l.t1.backward(params_, grads_, tp.temb0, silu_back(tp.t1_pre, dt_act), static_cast<MatT<S>*>(nullptr));
  l.sg.backward(params_, grads_, tp.sg_in, dpre, static_cast<MatT<S>*>(nullptr));
  auto dnull = view(grads_, l.null_token).col(0);
  bool any_obstacle = false;
  for (std::uint8_t f : tp.use_obstacle) any_obstacle = any_obstacle || f != 0;
  if (!any_obstacle) {
    dnull += dpre.rowwise().sum();
    return;
  }
  MatT<S> dact = MatT<S>::Zero(cfg_.embed_dim, tp.obs_in.cols());
  for (int b = 0; b < batch; ++b) {
    if (tp.use_obstacle[b] != 0) {
      dact.middleCols(static_cast<Eigen::Index>(b) * len, len).colwise() = dpre.col(b) / static_cast<S>(len);
    } else {
      dnull += dpre.col(b);
    }
  }
  l.obs.backward(params_, grads_, tp.obs_in, silu_back(tp.obs_pre, dact), static_cast<MatT<S>*>(nullptr));
}

template class TemporalUnet<float>;
template class TemporalUnet<double>;
template MatT<float> time_embedding<float>(const std::vector<int>&, int);
template MatT<double> time_embedding<double>(const std::vector<int>&, int);

template <typename S>
double loss_and_grad(TemporalUnet<S>& net, const NetInputs<S>& in,
                     const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& eps) {
  auto tape = std::make_unique<typename TemporalUnet<S>::Tape>();
  const auto pred = net.forward(in, tape.get());
  if (pred.rows() != eps.rows() || pred.cols() != eps.cols())
    throw Error(ErrorCode::kShapeMismatch, "noise target shape differs from the prediction");
  const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> diff = pred - eps;
  const double n = static_cast<double>(diff.size());
  const double loss = static_cast<double>(diff.squaredNorm()) / n;
  net.backward(*tape, diff * static_cast<S>(2.0 / n));
  return loss;
}

template double loss_and_grad<float>(TemporalUnet<float>&, const NetInputs<float>&, const Eigen::MatrixXf&);
template double loss_and_grad<double>(TemporalUnet<double>&, const NetInputs<double>&, const Eigen::MatrixXd&);

template <typename S>
NetInputs<S> make_inputs(const std::vector<TrajArray>& x, const std::vector<int>& t,
                         const std::vector<const Conditioning*>& cond, const NormStats& norm) {
  if (x.empty() || x.size() != t.size() || x.size() != cond.size())
    throw Error(ErrorCode::kShapeMismatch, "network inputs: batch sizes differ");
  const Eigen::Index len = x.front().cols();
  const auto batch = static_cast<Eigen::Index>(x.size());
  NetInputs<S> in;
  in.x.resize(kPoseChannels, batch * len);
  in.t = t;
  in.start_goal.resize(8, batch);
  in.use_obstacle.assign(x.size(), 0);
  bool any = false;
  for (const Conditioning* c : cond) any = any || c->uses_obstacle();
  if (any) in.obstacle = MatT<S>::Zero(2, batch * len);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto i = static_cast<std::size_t>(b);
    if (x[i].cols() != len) throw Error(ErrorCode::kShapeMismatch, "network inputs: trajectory lengths differ");
    in.x.middleCols(b * len, len) = x[i].cast<S>();
    in.start_goal.col(b).head(4) = norm.normalize_pose(cond[i]->start).cast<S>();
    in.start_goal.col(b).tail(4) = norm.normalize_pose(cond[i]->goal).cast<S>();
    if (cond[i]->uses_obstacle()) {
      const ObstacleTrack& track = *cond[i]->obstacle;
      if (track.cols() != len) throw Error(ErrorCode::kShapeMismatch, "obstacle track length must equal the horizon");
      in.obstacle.middleCols(b * len, len) = norm.normalize_track(track).cast<S>();
      in.use_obstacle[i] = 1;
    }
  }
  return in;
}

template NetInputs<float> make_inputs<float>(const std::vector<TrajArray>&, const std::vector<int>&,
                                             const std::vector<const Conditioning*>&, const NormStats&);
template NetInputs<double> make_inputs<double>(const std::vector<TrajArray>&, const std::vector<int>&,
                                               const std::vector<const Conditioning*>&, const NormStats&);

LearnedDenoiser::LearnedDenoiser(NetConfig cfg, NoiseSchedule sched, NormStats norm)
    : net_(cfg), sched_(std::move(sched)), norm_(norm) {}

std::vector<TrajArray> LearnedDenoiser::predict(const std::vector<TrajArray>& x, int t,
                                                const Conditioning& cond) const {
  if (x.empty()) return {};
  if (t < 0 || t > sched_.steps) throw_invalid("diffusion step out of range");
  const std::vector<int> steps(x.size(), t);
  const std::vector<const Conditioning*> conds(x.size(), &cond);
  const NetInputs<float> in = make_inputs<float>(x, steps, conds, norm_);
  const Eigen::MatrixXf y = net_.forward(in);
  std::vector<TrajArray> out;
  out.reserve(x.size());
  const Eigen::Index len = horizon();
  for (std::size_t b = 0; b < x.size(); ++b)
    out.emplace_back(y.middleCols(static_cast<Eigen::Index>(b) * len, len).cast<double>());
  return out;
}

}  // namespace diffplan::diffusion
