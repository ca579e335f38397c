#include "eegspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "eegspec/error.hpp"
#include "eegspec/rng.hpp"

namespace eegspec {
namespace {

constexpr std::size_t kParamsPerBlock = 3;  // conv weight, bn gamma, bn beta
constexpr std::uint64_t kHeadStream = 0x68656164ull;  // "head"

Tensor MakeTensor(std::string name, std::vector<std::size_t> shape, double fill = 0.0) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor{std::move(name), std::move(shape), std::vector<double>(n, fill)};
}

void HeUniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.Uniform(-bound, bound);
}

std::string BlockName(std::size_t b, const char* suffix) { return "block" + std::to_string(b) + "." + suffix; }

// Index helpers into VggLiteNet::params.
std::size_t ConvIdx(std::size_t b) { return kParamsPerBlock * b; }
std::size_t GammaIdx(std::size_t b) { return kParamsPerBlock * b + 1; }
std::size_t BetaIdx(std::size_t b) { return kParamsPerBlock * b + 2; }
std::size_t HeadIdx(const NetShape& s, std::size_t i) { return kParamsPerBlock * s.widths.size() + i; }

void Conv3x3Forward(const double* in, const double* wt, double* out, std::size_t n, std::size_t cin, std::size_t cout,
                    std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  std::fill(out, out + n * cout * plane, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* op = out + (s * cout + o) * plane;
      for (std::size_t i = 0; i < cin; ++i) {
        const double* ip = in + (s * cin + i) * plane;
        const double* k = wt + (o * cin + i) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const long dy = ky - 1;
          const std::size_t y0 = dy < 0 ? 1 : 0;
          const std::size_t y1 = dy > 0 ? h - 1 : h;
          for (int kx = 0; kx < 3; ++kx) {
            const long dx = kx - 1;
            const std::size_t x0 = dx < 0 ? 1 : 0;
            const std::size_t x1 = dx > 0 ? w - 1 : w;
            const double wv = k[ky * 3 + kx];
            for (std::size_t y = y0; y < y1; ++y) {
              double* orow = op + y * w;
              const double* irow = ip + (y + dy) * w + dx;
              for (std::size_t x = x0; x < x1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
}

// Accumulates weight gradients and, when din != nullptr, input gradients.
void Conv3x3Backward(const double* in, const double* wt, const double* dout, double* dwt, double* din, std::size_t n,
                     std::size_t cin, std::size_t cout, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  if (din) std::fill(din, din + n * cin * plane, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* gp = dout + (s * cout + o) * plane;
      for (std::size_t i = 0; i < cin; ++i) {
        const double* ip = in + (s * cin + i) * plane;
        double* dip = din ? din + (s * cin + i) * plane : nullptr;
        const double* k = wt + (o * cin + i) * 9;
        double* dk = dwt + (o * cin + i) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const long dy = ky - 1;
          const std::size_t y0 = dy < 0 ? 1 : 0;
          const std::size_t y1 = dy > 0 ? h - 1 : h;
          for (int kx = 0; kx < 3; ++kx) {
            const long dx = kx - 1;
            const std::size_t x0 = dx < 0 ? 1 : 0;
            const std::size_t x1 = dx > 0 ? w - 1 : w;
            const double wv = k[ky * 3 + kx];
            double acc = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
              const double* grow = gp + y * w;
              const double* irow = ip + (y + dy) * w + dx;
              for (std::size_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
              if (dip) {
                double* drow = dip + (y + dy) * w + dx;
                for (std::size_t x = x0; x < x1; ++x) drow[x] += wv * grow[x];
              }
            }
            dk[ky * 3 + kx] += acc;
          }
        }
      }
    }
  }
}

struct BlockCache {
  std::size_t cin = 0, cout = 0, h = 0, w = 0;  // conv spatial size (pre-pool)
  std::vector<double> input;
  std::vector<double> conv;
  std::vector<double> mean, inv_std, var;
  std::vector<std::uint32_t> argmax;  // offset within the h*w plane
};

struct Cache {
  std::vector<BlockCache> blocks;
  std::vector<double> flat;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
};

void CheckBatch(const NetShape& shape, const ImageBatch& batch) {
  if (batch.n == 0) Fail(ErrorCode::kInvalidArgument, "empty batch");
  if (batch.c != shape.in_channels || batch.h != shape.input_height || batch.w != shape.input_width) {
    std::ostringstream os;
    os << "batch shape " << batch.c << "x" << batch.h << "x" << batch.w << " does not match network input "
       << shape.in_channels << "x" << shape.input_height << "x" << shape.input_width;
    Fail(ErrorCode::kInvalidArgument, os.str());
  }
  if (batch.data.size() != batch.n * batch.c * batch.h * batch.w) {
    Fail(ErrorCode::kInvalidArgument, "batch buffer size does not match its shape");
  }
}

// Forward pass. batch_stats selects train-mode batch normalisation. When
// cache is given every intermediate needed by the backward pass is kept.
RealMatrix Run(const VggLiteNet& net, const ImageBatch& batch, bool batch_stats, Cache* cache) {
  const NetShape& shape = net.shape;
  CheckBatch(shape, batch);
  const std::size_t n = batch.n;
  std::vector<double> x = batch.data;
  std::size_t cin = batch.c, h = batch.h, w = batch.w;
  if (cache) cache->blocks.resize(shape.widths.size());

  for (std::size_t b = 0; b < shape.widths.size(); ++b) {
    const std::size_t cout = shape.widths[b];
    const std::size_t plane = h * w;
    std::vector<double> conv(n * cout * plane);
    Conv3x3Forward(x.data(), net.params[ConvIdx(b)].data.data(), conv.data(), n, cin, cout, h, w);

    std::vector<double> mean(cout), var(cout), inv_std(cout);
    if (batch_stats) {
      const double m = static_cast<double>(n * plane);
      for (std::size_t c = 0; c < cout; ++c) {
        double sum = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          const double* p = conv.data() + (s * cout + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        mean[c] = sum / m;
        double sq = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          const double* p = conv.data() + (s * cout + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean[c]) * (p[i] - mean[c]);
        }
        var[c] = sq / m;
        inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEpsilon);
      }
    } else {
      const auto& rm = net.bn_running[2 * b].data;
      const auto& rv = net.bn_running[2 * b + 1].data;
      for (std::size_t c = 0; c < cout; ++c) {
        mean[c] = rm[c];
        var[c] = rv[c];
        inv_std[c] = 1.0 / std::sqrt(rv[c] + kBatchNormEpsilon);
      }
    }

    const auto& gamma = net.params[GammaIdx(b)].data;
    const auto& beta = net.params[BetaIdx(b)].data;
    const std::size_t ph = h / 2, pw = w / 2;
    std::vector<double> pooled(n * cout * ph * pw);
    std::vector<std::uint32_t> argmax(cache ? pooled.size() : 0);
    std::vector<double> act(plane);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t c = 0; c < cout; ++c) {
        const double* p = conv.data() + (s * cout + c) * plane;
        // Same expression as the ReLU mask in Backward.
        for (std::size_t i = 0; i < plane; ++i) act[i] = std::max(0.0, gamma[c] * ((p[i] - mean[c]) * inv_std[c]) + beta[c]);
        double* out = pooled.data() + (s * cout + c) * ph * pw;
        std::uint32_t* am = cache ? argmax.data() + (s * cout + c) * ph * pw : nullptr;
        for (std::size_t py = 0; py < ph; ++py) {
          for (std::size_t px = 0; px < pw; ++px) {
            const std::size_t base = 2 * py * w + 2 * px;
            const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
            std::size_t best = cand[0];
            for (int q = 1; q < 4; ++q) {
              if (act[cand[q]] > act[best]) best = cand[q];
            }
            out[py * pw + px] = act[best];
            if (am) am[py * pw + px] = static_cast<std::uint32_t>(best);
          }
        }
      }
    }

    if (cache) {
      BlockCache& bc = cache->blocks[b];
      bc.cin = cin;
      bc.cout = cout;
      bc.h = h;
      bc.w = w;
      bc.input = std::move(x);
      bc.conv = std::move(conv);
      bc.mean = std::move(mean);
      bc.var = std::move(var);
      bc.inv_std = std::move(inv_std);
      bc.argmax = std::move(argmax);
    }
    x = std::move(pooled);
    cin = cout;
    h = ph;
    w = pw;
  }

  const std::size_t flat_w = cin * h * w;
  const std::size_t hidden = shape.hidden;
  const std::size_t k = shape.classes;
  const auto& w1 = net.params[HeadIdx(shape, 0)].data;
  const auto& b1 = net.params[HeadIdx(shape, 1)].data;
  const auto& w2 = net.params[HeadIdx(shape, 2)].data;
  const auto& b2 = net.params[HeadIdx(shape, 3)].data;

  std::vector<double> hpre(n * hidden), hid(n * hidden);
  for (std::size_t s = 0; s < n; ++s) {
    const double* f = x.data() + s * flat_w;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double* row = w1.data() + j * flat_w;
      double acc = b1[j];
      for (std::size_t i = 0; i < flat_w; ++i) acc += row[i] * f[i];
      hpre[s * hidden + j] = acc;
      hid[s * hidden + j] = std::max(0.0, acc);
    }
  }
  RealMatrix logits(n, k);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < k; ++c) {
      const double* row = w2.data() + c * hidden;
      double acc = b2[c];
      for (std::size_t j = 0; j < hidden; ++j) acc += row[j] * hid[s * hidden + j];
      logits(s, c) = acc;
    }
  }
  if (cache) {
    cache->flat = std::move(x);
    cache->hidden_pre = std::move(hpre);
    cache->hidden = std::move(hid);
  }
  return logits;
}

void UpdateRunningStats(VggLiteNet& net, const std::vector<std::vector<double>>& mean,
                        const std::vector<std::vector<double>>& var, std::size_t batch_n) {
  std::size_t h = net.shape.input_height, w = net.shape.input_width;
  for (std::size_t b = 0; b < net.shape.widths.size(); ++b) {
    const double m = static_cast<double>(batch_n * h * w);
    const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
    auto& rm = net.bn_running[2 * b].data;
    auto& rv = net.bn_running[2 * b + 1].data;
    for (std::size_t c = 0; c < rm.size(); ++c) {
      rm[c] = (1.0 - kBatchNormMomentum) * rm[c] + kBatchNormMomentum * mean[b][c];
      rv[c] = (1.0 - kBatchNormMomentum) * rv[c] + kBatchNormMomentum * var[b][c] * unbias;
    }
    h /= 2;
    w /= 2;
  }
}

}  // namespace

std::size_t NetShape::FlattenWidth() const {
  const std::size_t div = std::size_t{1} << widths.size();
  return (input_height / div) * (input_width / div) * widths.back();
}

void NetShape::Validate() const {
  if (classes < 2) Fail(ErrorCode::kInvalidArgument, "network needs at least 2 output classes");
  if (widths.empty()) Fail(ErrorCode::kInvalidArgument, "network needs at least one conv block");
  if (in_channels == 0 || hidden == 0) Fail(ErrorCode::kInvalidArgument, "network layer widths must be positive");
  for (std::size_t wd : widths) {
    if (wd == 0) Fail(ErrorCode::kInvalidArgument, "network layer widths must be positive");
  }
  const std::size_t div = std::size_t{1} << widths.size();
  if (input_height == 0 || input_width == 0 || input_height % div != 0 || input_width % div != 0) {
    Fail(ErrorCode::kInvalidArgument, "input height and width must be positive multiples of " + std::to_string(div));
  }
}

const Tensor& VggLiteNet::param(const std::string& name) const {
  for (const Tensor& t : params) {
    if (t.name == name) return t;
  }
  Fail(ErrorCode::kNotFound, "no parameter named " + name);
}

Tensor& VggLiteNet::param(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const VggLiteNet&>(*this).param(name));
}

VggLiteNet InitNet(const NetShape& shape, std::uint64_t seed) {
  shape.Validate();
  Rng rng(seed);
  VggLiteNet net;
  net.shape = shape;
  std::size_t cin = shape.in_channels;
  for (std::size_t b = 0; b < shape.widths.size(); ++b) {
    const std::size_t cout = shape.widths[b];
    Tensor conv = MakeTensor(BlockName(b, "conv.weight"), {cout, cin, 3, 3});
    HeUniform(conv, cin * 9, rng);
    net.params.push_back(std::move(conv));
    net.params.push_back(MakeTensor(BlockName(b, "bn.gamma"), {cout}, 1.0));
    net.params.push_back(MakeTensor(BlockName(b, "bn.beta"), {cout}, 0.0));
    net.bn_running.push_back(MakeTensor(BlockName(b, "bn.running_mean"), {cout}, 0.0));
    net.bn_running.push_back(MakeTensor(BlockName(b, "bn.running_var"), {cout}, 1.0));
    cin = cout;
  }
  const std::size_t flat = shape.FlattenWidth();
  Tensor fc1 = MakeTensor("head.fc1.weight", {shape.hidden, flat});
  HeUniform(fc1, flat, rng);
  net.params.push_back(std::move(fc1));
  net.params.push_back(MakeTensor("head.fc1.bias", {shape.hidden}));
  Tensor fc2 = MakeTensor("head.fc2.weight", {shape.classes, shape.hidden});
  HeUniform(fc2, shape.hidden, rng);
  net.params.push_back(std::move(fc2));
  net.params.push_back(MakeTensor("head.fc2.bias", {shape.classes}));
  net.mode = Mode::kTrain;
  return net;
}

VggLiteNet InitNet(std::size_t classes, std::uint64_t seed) {
  NetShape shape;
  shape.classes = classes;
  return InitNet(shape, seed);
}

VggLiteNet ReplaceHead(const VggLiteNet& net, std::size_t classes, std::uint64_t seed) {
  if (classes < 2) Fail(ErrorCode::kInvalidArgument, "network needs at least 2 output classes");
  VggLiteNet out = net;
  out.shape.classes = classes;
  Rng rng(seed ^ kHeadStream);
  Tensor fc2 = MakeTensor("head.fc2.weight", {classes, net.shape.hidden});
  HeUniform(fc2, net.shape.hidden, rng);
  out.params[HeadIdx(out.shape, 2)] = std::move(fc2);
  out.params[HeadIdx(out.shape, 3)] = MakeTensor("head.fc2.bias", {classes});
  return out;
}

RealMatrix Forward(VggLiteNet& net, const ImageBatch& batch) {
  if (net.mode == Mode::kEval) return Run(net, batch, false, nullptr);
  if (batch.n < 2) Fail(ErrorCode::kInvalidArgument, "train-mode forward needs a batch of at least 2");
  Cache cache;
  RealMatrix logits = Run(net, batch, true, &cache);
  std::vector<std::vector<double>> mean, var;
  for (const BlockCache& bc : cache.blocks) {
    mean.push_back(bc.mean);
    var.push_back(bc.var);
  }
  UpdateRunningStats(net, mean, var, batch.n);
  return logits;
}

RealMatrix ForwardEval(const VggLiteNet& net, const ImageBatch& batch) { return Run(net, batch, false, nullptr); }

CrossEntropy CrossEntropyLoss(const RealMatrix& logits, std::span<const int> labels) {
  const std::size_t n = logits.rows, k = logits.cols;
  if (labels.size() != n) Fail(ErrorCode::kInvalidArgument, "label count does not match batch size");
  if (n == 0) Fail(ErrorCode::kInvalidArgument, "cross-entropy of an empty batch");
  CrossEntropy ce{0.0, RealMatrix(n, k)};
  for (std::size_t s = 0; s < n; ++s) {
    if (labels[s] < 0 || static_cast<std::size_t>(labels[s]) >= k) {
      Fail(ErrorCode::kInvalidArgument, "label " + std::to_string(labels[s]) + " outside [0, " + std::to_string(k) + ")");
    }
    double mx = logits(s, 0);
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits(s, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(logits(s, c) - mx);
    const double lse = mx + std::log(sum);
    ce.loss += lse - logits(s, static_cast<std::size_t>(labels[s]));
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(logits(s, c) - lse);
      ce.dlogits(s, c) = (p - (static_cast<int>(c) == labels[s] ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  ce.loss /= static_cast<double>(n);
  return ce;
}

Gradients Backward(const VggLiteNet& net, const ImageBatch& batch, std::span<const int> labels) {
  const bool train = net.mode == Mode::kTrain;
  if (train && batch.n < 2) Fail(ErrorCode::kInvalidArgument, "train-mode backward needs a batch of at least 2");
  const NetShape& shape = net.shape;
  Cache cache;
  Gradients g;
  g.logits = Run(net, batch, train, &cache);
  CrossEntropy ce = CrossEntropyLoss(g.logits, labels);
  g.loss = ce.loss;
  g.grads = ZerosLike(net.params);

  const std::size_t n = batch.n;
  const std::size_t k = shape.classes;
  const std::size_t hidden = shape.hidden;
  const std::size_t flat_w = cache.flat.size() / n;
  const auto& w1 = net.params[HeadIdx(shape, 0)].data;
  const auto& w2 = net.params[HeadIdx(shape, 2)].data;
  auto& dw1 = g.grads[HeadIdx(shape, 0)].data;
  auto& db1 = g.grads[HeadIdx(shape, 1)].data;
  auto& dw2 = g.grads[HeadIdx(shape, 2)].data;
  auto& db2 = g.grads[HeadIdx(shape, 3)].data;

  std::vector<double> dhpre(n * hidden, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < k; ++c) {
      const double d = ce.dlogits(s, c);
      db2[c] += d;
      for (std::size_t j = 0; j < hidden; ++j) {
        dw2[c * hidden + j] += d * cache.hidden[s * hidden + j];
        dhpre[s * hidden + j] += d * w2[c * hidden + j];
      }
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      if (!(cache.hidden_pre[s * hidden + j] > 0.0)) dhpre[s * hidden + j] = 0.0;
    }
  }
  std::vector<double> dx(n * flat_w, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double* f = cache.flat.data() + s * flat_w;
    double* dfs = dx.data() + s * flat_w;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double d = dhpre[s * hidden + j];
      if (d == 0.0) continue;
      db1[j] += d;
      double* dw_row = dw1.data() + j * flat_w;
      const double* w_row = w1.data() + j * flat_w;
      for (std::size_t i = 0; i < flat_w; ++i) {
        dw_row[i] += d * f[i];
        dfs[i] += d * w_row[i];
      }
    }
  }

  for (std::size_t bi = shape.widths.size(); bi-- > 0;) {
    const BlockCache& bc = cache.blocks[bi];
    const std::size_t plane = bc.h * bc.w;
    const std::size_t pplane = (bc.h / 2) * (bc.w / 2);
    const auto& gamma = net.params[GammaIdx(bi)].data;
    const auto& beta = net.params[BetaIdx(bi)].data;
    auto& dgamma = g.grads[GammaIdx(bi)].data;
    auto& dbeta = g.grads[BetaIdx(bi)].data;

    // Unpool, then mask by the ReLU, giving dL/d(bn output).
    std::vector<double> dy(n * bc.cout * plane, 0.0);
    for (std::size_t sc = 0; sc < n * bc.cout; ++sc) {
      for (std::size_t q = 0; q < pplane; ++q) dy[sc * plane + bc.argmax[sc * pplane + q]] += dx[sc * pplane + q];
    }
    std::vector<double> dconv(dy.size());
    const double m = static_cast<double>(n * plane);
    for (std::size_t c = 0; c < bc.cout; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t off = (s * bc.cout + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xhat = (bc.conv[off + i] - bc.mean[c]) * bc.inv_std[c];
          if (!(gamma[c] * xhat + beta[c] > 0.0)) dy[off + i] = 0.0;
          sum_dy += dy[off + i];
          sum_dy_xhat += dy[off + i] * xhat;
        }
      }
      dgamma[c] = sum_dy_xhat;
      dbeta[c] = sum_dy;
      const double scale = gamma[c] * bc.inv_std[c];
      for (std::size_t s = 0; s < n; ++s) {
        const std::size_t off = (s * bc.cout + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          if (train) {
            const double xhat = (bc.conv[off + i] - bc.mean[c]) * bc.inv_std[c];
            dconv[off + i] = scale / m * (m * dy[off + i] - sum_dy - xhat * sum_dy_xhat);
          } else {
            dconv[off + i] = scale * dy[off + i];
          }
        }
      }
    }

    std::vector<double> din;
    if (bi > 0) din.resize(n * bc.cin * plane);
    Conv3x3Backward(bc.input.data(), net.params[ConvIdx(bi)].data.data(), dconv.data(),
                    g.grads[ConvIdx(bi)].data.data(), bi > 0 ? din.data() : nullptr, n, bc.cin, bc.cout, bc.h, bc.w);
    dx = std::move(din);
  }

  if (train) {
    for (const BlockCache& bc : cache.blocks) {
      g.batch_mean.push_back(bc.mean);
      g.batch_var.push_back(bc.var);
    }
  }
  return g;
}

std::vector<Tensor> ZerosLike(const std::vector<Tensor>& tensors) {
  std::vector<Tensor> out;
  out.reserve(tensors.size());
  for (const Tensor& t : tensors) out.push_back(Tensor{t.name, t.shape, std::vector<double>(t.data.size(), 0.0)});
  return out;
}

void SgdStep(std::vector<Tensor>& params, const std::vector<Tensor>& grads, std::vector<Tensor>& velocity, double lr,
             double momentum) {
  if (grads.size() != params.size() || velocity.size() != params.size()) {
    Fail(ErrorCode::kInvalidArgument, "SGD: parameter, gradient and velocity lists differ in length");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (grads[t].shape != params[t].shape || velocity[t].shape != params[t].shape) {
      Fail(ErrorCode::kInvalidArgument, "SGD: shape mismatch for " + params[t].name);
    }
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t].data;
    auto& v = velocity[t].data;
    const auto& g = grads[t].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  }
}

void TrainConfig::Validate() const {
  if (!(lr > 0.0)) Fail(ErrorCode::kInvalidArgument, "train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) Fail(ErrorCode::kInvalidArgument, "train.momentum must be in [0, 1)");
  if (batch_size < 1) Fail(ErrorCode::kInvalidArgument, "train.batch_size must be >= 1");
}

ImageBatch MakeBatch(const LabeledImages& set, std::span<const std::size_t> indices) {
  if (indices.empty()) Fail(ErrorCode::kInvalidArgument, "empty batch");
  const Matrix<float>& first = set.images.at(indices[0])->plane;
  ImageBatch batch(indices.size(), StackedSpectrogram::kComponents, first.rows, first.cols);
  const std::size_t plane = first.rows * first.cols;
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const StackedSpectrogram& img = *set.images.at(indices[s]);
    for (std::size_t c = 0; c < StackedSpectrogram::kComponents; ++c) {
      const Matrix<float>& comp = img.component(c);
      if (comp.rows != first.rows || comp.cols != first.cols) {
        Fail(ErrorCode::kInvalidArgument, "images in a batch must share one geometry");
      }
      double* dst = batch.data.data() + (s * StackedSpectrogram::kComponents + c) * plane;
      std::copy(comp.data.begin(), comp.data.end(), dst);
    }
  }
  return batch;
}

Prediction PredictFromLogits(std::span<const double> logits) {
  Prediction p;
  if (logits.empty()) Fail(ErrorCode::kInvalidArgument, "empty logits");
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  p.label = static_cast<int>(best);
  double sum = 0.0;
  p.probs.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p.probs[c] = std::exp(logits[c] - logits[best]);
    sum += p.probs[c];
  }
  for (double& v : p.probs) v /= sum;
  return p;
}

std::vector<Prediction> Predict(const VggLiteNet& net, const LabeledImages& set) {
  constexpr std::size_t kChunk = 32;
  std::vector<Prediction> out;
  out.reserve(set.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + kChunk); ++i) idx.push_back(i);
    const RealMatrix logits = ForwardEval(net, MakeBatch(set, idx));
    for (std::size_t s = 0; s < logits.rows; ++s) {
      out.push_back(PredictFromLogits(std::span<const double>(&logits.data[s * logits.cols], logits.cols)));
    }
  }
  return out;
}

TrainResult Train(const VggLiteNet& initial, const LabeledImages& train, const LabeledImages& val,
                  const TrainConfig& cfg) {
  cfg.Validate();
  if (train.size() == 0) Fail(ErrorCode::kInvalidArgument, "training set is empty");
  if (val.size() == 0) Fail(ErrorCode::kInvalidArgument, "validation set is empty");
  if (train.labels.size() != train.size() || val.labels.size() != val.size()) {
    Fail(ErrorCode::kInvalidArgument, "image and label counts differ");
  }
  for (const LabeledImages* set : {&train, &val}) {
    for (int label : set->labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= initial.shape.classes) {
        Fail(ErrorCode::kInvalidArgument, "label " + std::to_string(label) + " outside the network's classes");
      }
    }
  }

  TrainResult result{initial, {}};
  VggLiteNet& net = result.net;
  if (cfg.epochs == 0) {
    net.mode = Mode::kEval;
    return result;
  }
  net.mode = Mode::kTrain;

  const std::size_t n = train.size();
  if (n < 2) Fail(ErrorCode::kInvalidArgument, "training needs at least 2 examples for batch statistics");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  // Batch boundaries; a trailing singleton joins the previous batch.
  std::vector<std::size_t> bounds;
  for (std::size_t start = 0; start < n; start += cfg.batch_size) bounds.push_back(start);
  bounds.push_back(n);
  if (bounds.size() > 2 && bounds[bounds.size() - 1] - bounds[bounds.size() - 2] == 1) {
    bounds.erase(bounds.end() - 2);
  }

  Rng rng(cfg.seed);
  std::vector<Tensor> velocity = ZerosLike(net.params);
  VggLiteNet best = net;
  double best_val = -1.0;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.Shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      std::span<const std::size_t> idx(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
      if (idx.size() < 2) Fail(ErrorCode::kInvalidArgument, "batch_size 1 is incompatible with batch normalisation");
      batch_labels.clear();
      for (std::size_t i : idx) batch_labels.push_back(train.labels[i]);
      const ImageBatch batch = MakeBatch(train, idx);
      Gradients g = Backward(net, batch, batch_labels);
      if (!std::isfinite(g.loss)) {
        Fail(ErrorCode::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1));
      }
      UpdateRunningStats(net, g.batch_mean, g.batch_var, idx.size());
      SgdStep(net.params, g.grads, velocity, cfg.lr, cfg.momentum);
      loss_sum += g.loss * static_cast<double>(idx.size());
      for (std::size_t s = 0; s < idx.size(); ++s) {
        const Prediction p = PredictFromLogits(std::span<const double>(&g.logits.data[s * g.logits.cols], g.logits.cols));
        if (p.label == batch_labels[s]) ++correct;
      }
    }

    const std::vector<Prediction> preds = Predict(net, val);
    std::size_t val_correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].label == val.labels[i]) ++val_correct;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    rec.val_acc = static_cast<double>(val_correct) / static_cast<double>(val.size());
    result.history.push_back(rec);
    if (rec.val_acc > best_val) {
      best_val = rec.val_acc;
      best = net;
    }
  }
  if (cfg.selection == Selection::kBestVal) net = std::move(best);
  net.mode = Mode::kEval;
  return result;
}

void SaveCheckpoint(const VggLiteNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  detail::WriteBytes(out, "VGL1", 4);
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(net.shape.classes));
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(net.shape.widths.size()));
  for (std::size_t wd : net.shape.widths) detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(wd));
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(net.params.size() + net.bn_running.size()));
  for (const auto* list : {&net.params, &net.bn_running}) {
    for (const Tensor& t : *list) {
      detail::WriteString16(out, t.name);
      detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
      for (std::size_t d : t.shape) detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      detail::WriteBytes(out, t.data.data(), t.data.size() * sizeof(double));
    }
  }
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

VggLiteNet LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kNotFound, "missing checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != "VGL1") Fail(ErrorCode::kFormat, "bad magic in " + path.string());

  VggLiteNet net;
  net.shape.classes = detail::ReadLe<std::uint32_t>(in, "classes");
  const auto n_blocks = detail::ReadLe<std::uint32_t>(in, "block count");
  if (n_blocks == 0 || n_blocks > 16) Fail(ErrorCode::kFormat, "implausible block count in checkpoint");
  net.shape.widths.clear();
  for (std::uint32_t b = 0; b < n_blocks; ++b) net.shape.widths.push_back(detail::ReadLe<std::uint32_t>(in, "widths"));
  const auto n_tensors = detail::ReadLe<std::uint32_t>(in, "tensor count");
  const std::size_t n_params = kParamsPerBlock * n_blocks + 4;
  if (n_tensors != n_params + 2 * n_blocks) Fail(ErrorCode::kFormat, "unexpected tensor count in checkpoint");

  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t;
    t.name = detail::ReadString16(in, "tensor name");
    const auto rank = detail::ReadLe<std::uint32_t>(in, "tensor rank");
    if (rank > 8) Fail(ErrorCode::kFormat, "implausible tensor rank in checkpoint");
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(detail::ReadLe<std::uint32_t>(in, "tensor dims"));
      count *= t.shape.back();
    }
    if (count > (std::size_t{1} << 32)) Fail(ErrorCode::kFormat, "implausible tensor size in checkpoint");
    t.data.resize(count);
    detail::ReadBytes(in, t.data.data(), count * sizeof(double), "tensor data");
    (i < n_params ? net.params : net.bn_running).push_back(std::move(t));
  }

  // Geometry follows from the tensors; the input is taken to be square.
  const Tensor& conv0 = net.params[ConvIdx(0)];
  const Tensor& fc1 = net.params[HeadIdx(net.shape, 0)];
  if (conv0.shape.size() != 4 || fc1.shape.size() != 2) Fail(ErrorCode::kFormat, "malformed checkpoint tensors");
  net.shape.in_channels = conv0.shape[1];
  net.shape.hidden = fc1.shape[0];
  const std::size_t spatial = fc1.shape[1] / net.shape.widths.back();
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(spatial))));
  if (side * side * net.shape.widths.back() != fc1.shape[1]) {
    Fail(ErrorCode::kFormat, "checkpoint head does not match a square input");
  }
  net.shape.input_height = net.shape.input_width = side << n_blocks;

  // Every tensor must match what InitNet would lay out for this shape.
  const VggLiteNet reference = InitNet(net.shape, 0);
  for (std::size_t i = 0; i < reference.params.size(); ++i) {
    if (reference.params[i].name != net.params[i].name || reference.params[i].shape != net.params[i].shape) {
      Fail(ErrorCode::kFormat, "checkpoint tensor " + net.params[i].name + " does not match the network layout");
    }
  }
  for (std::size_t i = 0; i < reference.bn_running.size(); ++i) {
    if (reference.bn_running[i].name != net.bn_running[i].name ||
        reference.bn_running[i].shape != net.bn_running[i].shape) {
      Fail(ErrorCode::kFormat, "checkpoint tensor " + net.bn_running[i].name + " does not match the network layout");
    }
  }
  net.mode = Mode::kEval;
  return net;
}

std::string HistoryToCsv(const TrainHistory& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,train_acc,val_acc\n";
  for (const EpochRecord& r : history) {
    os << r.epoch << "," << r.train_loss << "," << r.train_acc << "," << r.val_acc << "\n";
  }
  return os.str();
}

}  // namespace eegspec
