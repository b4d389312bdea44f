#include "somnus/cnn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "somnus/kernels.hpp"

namespace somnus::cnn {

namespace {

using json = nlohmann::json;

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;
constexpr double kPosteriorFloor = 1e-12;
constexpr int kRows = static_cast<int>(kEpochChannels);

std::atomic<std::uint64_t> g_gradient_batches{0};

int filters_in_block(const ModelConfig& c, int k) {  // k is 0-based
  return c.initial_filters << k;
}

}  // namespace

// ============================================================
// Config queries
// ============================================================

void validate_config(const ModelConfig& c) {
  auto fail = [](const std::string& msg) { throw InvalidConfig(msg); };
  if (c.num_blocks < 1) fail("num_blocks must be >= 1");
  if (c.num_blocks > 20) fail("num_blocks is unreasonably large");
  if (c.kernel_rows < 1 || c.kernel_rows > kRows) {
    fail("kernel_rows must be between 1 and " + std::to_string(kRows));
  }
  if (c.kernel_cols < 1) fail("kernel_cols must be >= 1");
  if (c.initial_filters < 1) fail("initial_filters must be >= 1");
  if (c.num_classes < 2) fail("num_classes must be >= 2");
  if (c.input_samples < 1) fail("input_samples must be >= 1");
  if ((c.input_samples >> c.num_blocks) < 1) {
    fail("time axis vanishes: input_samples too small for num_blocks poolings");
  }
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.max_epochs < 1) fail("max_epochs must be >= 1");
  if (!(c.initial_lr > 0.0)) fail("initial_lr must be positive");
  if (c.lr_step_epochs < 1) fail("lr_step_epochs must be >= 1");
  if (!(c.lr_decay >= 1.0)) fail("lr_decay must be >= 1");
  if (!(c.min_lr > 0.0)) fail("min_lr must be positive");
  if (c.val_checks_per_epoch < 1) fail("val_checks_per_epoch must be >= 1");
  if (c.patience_checks < 1) fail("patience_checks must be >= 1");
  if (!(c.dropout >= 0.0) || c.dropout >= 1.0) fail("dropout must be in [0, 1)");
}

double learning_rate(const ModelConfig& c, int epoch) {
  const int steps = (epoch - 1) / c.lr_step_epochs;
  double lr = c.initial_lr;
  for (int i = 0; i < steps; ++i) lr /= c.lr_decay;
  return std::max(lr, c.min_lr);
}

std::vector<LayerShape> layer_shapes(const ModelConfig& c) {
  validate_config(c);
  std::vector<LayerShape> shapes;
  int w = c.input_samples;
  for (int k = 0; k < c.num_blocks; ++k) {
    w /= 2;  // conv is same-padded; only the pool changes the width
    shapes.push_back({filters_in_block(c, k), kRows, w});
  }
  return shapes;
}

std::size_t flattened_size(const ModelConfig& c) {
  const LayerShape last = layer_shapes(c).back();
  return static_cast<std::size_t>(last.channels) * last.rows * last.cols;
}

std::size_t parameter_count(const ModelConfig& c) {
  validate_config(c);
  std::size_t total = 0;
  int c_in = 1;
  for (int k = 0; k < c.num_blocks; ++k) {
    const int f = filters_in_block(c, k);
    total += static_cast<std::size_t>(f) * c_in * c.kernel_rows * c.kernel_cols;  // weights
    total += static_cast<std::size_t>(f) * 3;  // bias + batch-norm scale/shift
    c_in = f;
  }
  total += flattened_size(c) * c.num_classes + c.num_classes;  // dense
  return total;
}

// ============================================================
// Initialization
// ============================================================

TrainedModel init_model(const ModelConfig& c) {
  validate_config(c);
  TrainedModel m;
  m.config = c;
  m.provenance.seed = c.seed;
  Rng rng(c.seed);

  // Scaled uniform fan-in: U(-L, L) with L = sqrt(3 / fan_in), so the weight
  // variance is 1 / fan_in. Biases start at zero, batch norm at identity.
  int c_in = 1;
  for (int k = 0; k < c.num_blocks; ++k) {
    const int f = filters_in_block(c, k);
    ConvBlock b;
    const std::size_t fan_in =
        static_cast<std::size_t>(c_in) * c.kernel_rows * c.kernel_cols;
    const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
    b.weight.resize(static_cast<std::size_t>(f) * fan_in);
    for (double& w : b.weight) w = rng.uniform(-limit, limit);
    b.bias.assign(f, 0.0);
    b.gamma.assign(f, 1.0);
    b.beta.assign(f, 0.0);
    b.run_mean.assign(f, 0.0);
    b.run_var.assign(f, 1.0);
    m.blocks.push_back(std::move(b));
    c_in = f;
  }

  const std::size_t flat = flattened_size(c);
  const double limit = std::sqrt(3.0 / static_cast<double>(flat));
  m.dense.weight.resize(flat * c.num_classes);
  for (double& w : m.dense.weight) w = rng.uniform(-limit, limit);
  m.dense.bias.assign(c.num_classes, 0.0);
  return m;
}

// ============================================================
// Forward / backward machinery
// ============================================================

namespace {

struct BlockCache {
  std::vector<double> xpad;    // [B][C_in][R][Wp], zero padded
  std::vector<double> xhat;    // [B][C_out][R][W], batch-normalized pre-affine
  std::vector<double> inv_sd;  // [C_out], 1/sqrt(var + eps) of this batch
};

struct Scratch {
  std::vector<std::vector<double>> pooled;  // pooled[k] = output of block k
  std::vector<BlockCache> caches;
  std::vector<double> flat;  // dense input after dropout, [B][F]
  std::vector<double> mask;  // dropout mask, [B][F]
  std::vector<double> posteriors;  // [B][K]
};

struct Dims {
  int b;                      // batch size
  std::vector<int> w;         // width entering each block
  std::vector<int> c_in;      // channels entering each block
  std::vector<int> c_out;
};

Dims make_dims(const ModelConfig& cfg, std::size_t batch) {
  Dims d;
  d.b = static_cast<int>(batch);
  int w = cfg.input_samples;
  int ci = 1;
  for (int k = 0; k < cfg.num_blocks; ++k) {
    d.w.push_back(w);
    d.c_in.push_back(ci);
    d.c_out.push_back(filters_in_block(cfg, k));
    w /= 2;
    ci = d.c_out.back();
  }
  return d;
}

// Pads every row of in ([B][C][R][W]) into out ([B][C][R][W + kw - 1]).
void pad_rows(const double* in, double* out, int b, int c, int w, int kw) {
  const int wp = w + kw - 1;
  const int pl = (kw - 1) / 2;
  const std::size_t rows = static_cast<std::size_t>(b) * c * kRows;
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out + r * wp;
    std::fill(dst, dst + wp, 0.0);
    std::copy(in + r * w, in + (r + 1) * w, dst + pl);
  }
}

// Same-padded convolution: out[b][f][r] = bias[f] + sum over c, dr, t of
// weight[f][c][dr][t] * xpad[b][c][r - pt + dr][t .. t+W).
void conv_forward(const double* xpad, double* out, const double* weight, const double* bias,
                  int b, int ci, int co, int w, int kh, int kw) {
  const int wp = w + kw - 1;
  const int pt = (kh - 1) / 2;
  const std::size_t in_sample = static_cast<std::size_t>(ci) * kRows * wp;
  const std::size_t out_sample = static_cast<std::size_t>(co) * kRows * w;
  for (int bi = 0; bi < b; ++bi) {
    const double* xs = xpad + bi * in_sample;
    for (int f = 0; f < co; ++f) {
      double* out_f = out + bi * out_sample + static_cast<std::size_t>(f) * kRows * w;
      std::fill(out_f, out_f + static_cast<std::size_t>(kRows) * w, bias[f]);
      for (int r = 0; r < kRows; ++r) {
        double* out_row = out_f + static_cast<std::size_t>(r) * w;
        for (int c = 0; c < ci; ++c) {
          for (int dr = 0; dr < kh; ++dr) {
            const int r_in = r - pt + dr;
            if (r_in < 0 || r_in >= kRows) continue;
            const double* x_row = xs + (static_cast<std::size_t>(c) * kRows + r_in) * wp;
            const double* wt = weight + ((static_cast<std::size_t>(f) * ci + c) * kh + dr) * kw;
            for (int t = 0; t < kw; ++t) {
              kern::axpy(wt[t], x_row + t, out_row, static_cast<std::size_t>(w));
            }
          }
        }
      }
    }
  }
}

// Gradient halves of the convolution.
void conv_backward(const double* xpad, const double* dconv, const double* weight,
                   double* dweight, double* dbias, double* dxpad,
                   int b, int ci, int co, int w, int kh, int kw) {
  const int wp = w + kw - 1;
  const int pt = (kh - 1) / 2;
  const std::size_t in_sample = static_cast<std::size_t>(ci) * kRows * wp;
  const std::size_t out_sample = static_cast<std::size_t>(co) * kRows * w;
  std::fill(dxpad, dxpad + static_cast<std::size_t>(b) * in_sample, 0.0);
  for (int bi = 0; bi < b; ++bi) {
    const double* xs = xpad + bi * in_sample;
    double* dxs = dxpad + bi * in_sample;
    for (int f = 0; f < co; ++f) {
      const double* dout_f = dconv + bi * out_sample + static_cast<std::size_t>(f) * kRows * w;
      for (int r = 0; r < kRows; ++r) {
        const double* dout_row = dout_f + static_cast<std::size_t>(r) * w;
        dbias[f] += kern::sum(dout_row, static_cast<std::size_t>(w));
        for (int c = 0; c < ci; ++c) {
          for (int dr = 0; dr < kh; ++dr) {
            const int r_in = r - pt + dr;
            if (r_in < 0 || r_in >= kRows) continue;
            const double* x_row = xs + (static_cast<std::size_t>(c) * kRows + r_in) * wp;
            double* dx_row = dxs + (static_cast<std::size_t>(c) * kRows + r_in) * wp;
            const double* wt = weight + ((static_cast<std::size_t>(f) * ci + c) * kh + dr) * kw;
            double* dwt = dweight + ((static_cast<std::size_t>(f) * ci + c) * kh + dr) * kw;
            for (int t = 0; t < kw; ++t) {
              dwt[t] += kern::dot(dout_row, x_row + t, static_cast<std::size_t>(w));
              kern::axpy(wt[t], dout_row, dx_row + t, static_cast<std::size_t>(w));
            }
          }
        }
      }
    }
  }
}

// Train-mode forward for one batch. Activations flow conv -> batch norm
// (batch statistics; running ones updated) -> ReLU -> halving average pool.
// Caches hold what the backward pass needs: padded inputs, normalized
// activations and batch inverse deviations.
void forward_train(TrainedModel& m, const std::vector<const Epoch*>& batch, Rng* rng,
                   Scratch& s) {
  const ModelConfig& cfg = m.config;
  const Dims d = make_dims(cfg, batch.size());
  const int b = d.b;

  // Gather epochs into one contiguous input block.
  std::vector<double> input(static_cast<std::size_t>(b) * kRows * cfg.input_samples);
  for (int bi = 0; bi < b; ++bi) {
    if (batch[bi]->cols != static_cast<std::size_t>(cfg.input_samples)) {
      throw ShapeMismatch("epoch width " + std::to_string(batch[bi]->cols) +
                          " does not match configured input of " +
                          std::to_string(cfg.input_samples));
    }
    std::copy(batch[bi]->data.begin(), batch[bi]->data.end(),
              input.begin() + static_cast<std::size_t>(bi) * kRows * cfg.input_samples);
  }

  s.caches.assign(cfg.num_blocks, {});
  s.pooled.assign(cfg.num_blocks, {});
  const double* cur = input.data();
  std::vector<double> conv;  // reused per block, becomes xhat in place
  for (int k = 0; k < cfg.num_blocks; ++k) {
    ConvBlock& blk = m.blocks[k];
    BlockCache& cache = s.caches[k];
    const int w = d.w[k], ci = d.c_in[k], co = d.c_out[k];
    const int wp = w + cfg.kernel_cols - 1;
    cache.xpad.resize(static_cast<std::size_t>(b) * ci * kRows * wp);
    pad_rows(cur, cache.xpad.data(), b, ci, w, cfg.kernel_cols);

    conv.assign(static_cast<std::size_t>(b) * co * kRows * w, 0.0);
    conv_forward(cache.xpad.data(), conv.data(), blk.weight.data(), blk.bias.data(), b, ci, co,
                 w, cfg.kernel_rows, cfg.kernel_cols);

    // Batch norm over (batch, rows, width) per filter, in place: conv
    // becomes xhat.
    cache.inv_sd.assign(co, 0.0);
    const std::size_t region = static_cast<std::size_t>(kRows) * w;
    const std::size_t sample = static_cast<std::size_t>(co) * region;
    const double mcount = static_cast<double>(b) * static_cast<double>(region);
    for (int f = 0; f < co; ++f) {
      double total = 0.0;
      for (int bi = 0; bi < b; ++bi) {
        total += kern::sum(conv.data() + bi * sample + f * region, region);
      }
      const double mean = total / mcount;
      double sq = 0.0;
      for (int bi = 0; bi < b; ++bi) {
        double* reg = conv.data() + bi * sample + f * region;
        kern::affine(reg, 1.0, -mean, reg, region);
        sq += kern::sumsq(reg, region);
      }
      const double var = sq / mcount;
      const double inv_sd = 1.0 / std::sqrt(var + kBnEps);
      cache.inv_sd[f] = inv_sd;
      for (int bi = 0; bi < b; ++bi) {
        kern::scale(inv_sd, conv.data() + bi * sample + f * region, region);
      }
      blk.run_mean[f] = (1.0 - kBnMomentum) * blk.run_mean[f] + kBnMomentum * mean;
      blk.run_var[f] = (1.0 - kBnMomentum) * blk.run_var[f] + kBnMomentum * var;
    }
    cache.xhat = std::move(conv);
    conv.clear();

    // Affine + ReLU row by row into a scratch row, pool straight out of it.
    const int w_out = w / 2;
    s.pooled[k].resize(static_cast<std::size_t>(b) * co * kRows * w_out);
    std::vector<double> row(static_cast<std::size_t>(w));
    for (int bi = 0; bi < b; ++bi) {
      for (int f = 0; f < co; ++f) {
        for (int r = 0; r < kRows; ++r) {
          const double* xh =
              cache.xhat.data() + bi * sample + f * region + static_cast<std::size_t>(r) * w;
          kern::affine(xh, blk.gamma[f], blk.beta[f], row.data(), static_cast<std::size_t>(w));
          kern::relu(row.data(), row.data(), static_cast<std::size_t>(w));
          double* dst = s.pooled[k].data() +
                        ((static_cast<std::size_t>(bi) * co + f) * kRows + r) * w_out;
          kern::avgpool2(row.data(), dst, static_cast<std::size_t>(w_out));
        }
      }
    }
    cur = s.pooled[k].data();
  }

  // Dropout on the flattened block output (inverted scaling), dense, softmax.
  const std::size_t flat = flattened_size(cfg);
  s.flat.assign(static_cast<std::size_t>(b) * flat, 0.0);
  s.mask.assign(static_cast<std::size_t>(b) * flat, 1.0);
  const double* last = s.pooled.back().data();
  if (cfg.dropout > 0.0) {
    if (!rng) throw InvalidConfig("train-mode forward with dropout needs a generator");
    const double keep_scale = 1.0 / (1.0 - cfg.dropout);
    for (std::size_t i = 0; i < s.mask.size(); ++i) {
      s.mask[i] = rng->next_double() < cfg.dropout ? 0.0 : keep_scale;
    }
    kern::mul(last, s.mask.data(), s.flat.data(), s.flat.size());
  } else {
    std::copy(last, last + s.flat.size(), s.flat.begin());
  }

  const int k_classes = cfg.num_classes;
  s.posteriors.assign(static_cast<std::size_t>(b) * k_classes, 0.0);
  for (int bi = 0; bi < b; ++bi) {
    const double* fx = s.flat.data() + bi * flat;
    double* post = s.posteriors.data() + static_cast<std::size_t>(bi) * k_classes;
    double maxv = -std::numeric_limits<double>::infinity();
    for (int kc = 0; kc < k_classes; ++kc) {
      post[kc] = kern::dot(m.dense.weight.data() + static_cast<std::size_t>(kc) * flat, fx, flat) +
                 m.dense.bias[kc];
      maxv = std::max(maxv, post[kc]);
    }
    double total = 0.0;
    for (int kc = 0; kc < k_classes; ++kc) {
      post[kc] = std::exp(post[kc] - maxv);
      total += post[kc];
    }
    for (int kc = 0; kc < k_classes; ++kc) post[kc] /= total;
  }
}

// Inference forward: running statistics, no dropout, no caches kept.
std::vector<double> forward_infer(const TrainedModel& m, const std::vector<const Epoch*>& batch) {
  const ModelConfig& cfg = m.config;
  const Dims d = make_dims(cfg, batch.size());
  const int b = d.b;

  std::vector<double> cur(static_cast<std::size_t>(b) * kRows * cfg.input_samples);
  for (int bi = 0; bi < b; ++bi) {
    if (batch[bi]->cols != static_cast<std::size_t>(cfg.input_samples)) {
      throw ShapeMismatch("epoch width " + std::to_string(batch[bi]->cols) +
                          " does not match configured input of " +
                          std::to_string(cfg.input_samples));
    }
    std::copy(batch[bi]->data.begin(), batch[bi]->data.end(),
              cur.begin() + static_cast<std::size_t>(bi) * kRows * cfg.input_samples);
  }

  std::vector<double> xpad, conv, pooled;
  for (int k = 0; k < cfg.num_blocks; ++k) {
    const ConvBlock& blk = m.blocks[k];
    const int w = d.w[k], ci = d.c_in[k], co = d.c_out[k];
    const int wp = w + cfg.kernel_cols - 1;
    xpad.resize(static_cast<std::size_t>(b) * ci * kRows * wp);
    pad_rows(cur.data(), xpad.data(), b, ci, w, cfg.kernel_cols);
    conv.assign(static_cast<std::size_t>(b) * co * kRows * w, 0.0);
    conv_forward(xpad.data(), conv.data(), blk.weight.data(), blk.bias.data(), b, ci, co, w,
                 cfg.kernel_rows, cfg.kernel_cols);

    const std::size_t region = static_cast<std::size_t>(kRows) * w;
    const std::size_t sample = static_cast<std::size_t>(co) * region;
    const int w_out = w / 2;
    pooled.assign(static_cast<std::size_t>(b) * co * kRows * w_out, 0.0);
    std::vector<double> row(static_cast<std::size_t>(w));
    for (int bi = 0; bi < b; ++bi) {
      for (int f = 0; f < co; ++f) {
        // y = gamma * (x - rm)/sqrt(rv + eps) + beta, folded into one affine.
        const double inv_sd = 1.0 / std::sqrt(blk.run_var[f] + kBnEps);
        const double a = blk.gamma[f] * inv_sd;
        const double b0 = blk.beta[f] - blk.gamma[f] * blk.run_mean[f] * inv_sd;
        for (int r = 0; r < kRows; ++r) {
          const double* src = conv.data() + bi * sample + f * region + static_cast<std::size_t>(r) * w;
          kern::affine(src, a, b0, row.data(), static_cast<std::size_t>(w));
          kern::relu(row.data(), row.data(), static_cast<std::size_t>(w));
          double* dst =
              pooled.data() + ((static_cast<std::size_t>(bi) * co + f) * kRows + r) * w_out;
          kern::avgpool2(row.data(), dst, static_cast<std::size_t>(w_out));
        }
      }
    }
    cur = pooled;
  }

  const std::size_t flat = flattened_size(cfg);
  const int k_classes = cfg.num_classes;
  std::vector<double> post(static_cast<std::size_t>(b) * k_classes);
  for (int bi = 0; bi < b; ++bi) {
    const double* fx = cur.data() + bi * flat;
    double* p = post.data() + static_cast<std::size_t>(bi) * k_classes;
    double maxv = -std::numeric_limits<double>::infinity();
    for (int kc = 0; kc < k_classes; ++kc) {
      p[kc] = kern::dot(m.dense.weight.data() + static_cast<std::size_t>(kc) * flat, fx, flat) +
              m.dense.bias[kc];
      maxv = std::max(maxv, p[kc]);
    }
    double total = 0.0;
    for (int kc = 0; kc < k_classes; ++kc) {
      p[kc] = std::exp(p[kc] - maxv);
      total += p[kc];
    }
    for (int kc = 0; kc < k_classes; ++kc) p[kc] /= total;
  }
  return post;
}

}  // namespace

std::vector<double> forward(TrainedModel& m, const std::vector<const Epoch*>& batch, Mode mode,
                            Rng* rng) {
  validate_config(m.config);
  if (batch.empty()) throw EmptyBatch("forward needs at least one epoch");
  if (mode == Mode::Infer) return forward_infer(m, batch);
  Scratch s;
  forward_train(m, batch, rng, s);
  return std::move(s.posteriors);
}

std::vector<double> forward(const TrainedModel& m, const std::vector<const Epoch*>& batch) {
  validate_config(m.config);
  if (batch.empty()) throw EmptyBatch("forward needs at least one epoch");
  return forward_infer(m, batch);
}

// ============================================================
// Loss and class weights
// ============================================================

std::vector<double> class_weights(const std::vector<std::uint64_t>& cardinalities,
                                  LossWeighting w) {
  if (cardinalities.empty()) throw EmptyClass("no class cardinalities given");
  if (w == LossWeighting::Unweighted) {
    return std::vector<double>(cardinalities.size(), 1.0);
  }
  double denom = 0.0;
  for (std::size_t i = 0; i < cardinalities.size(); ++i) {
    if (cardinalities[i] == 0) {
      throw EmptyClass("class " + std::to_string(i) +
                       " has no examples; weighted loss is undefined");
    }
    denom += 1.0 / static_cast<double>(cardinalities[i]);
  }
  std::vector<double> out(cardinalities.size());
  for (std::size_t i = 0; i < cardinalities.size(); ++i) {
    out[i] = (1.0 / static_cast<double>(cardinalities[i])) / denom;
  }
  return out;
}

double weighted_cross_entropy(const std::vector<double>& posteriors,
                              const std::vector<SleepStage>& labels,
                              const std::vector<double>& class_weights, int num_classes) {
  if (labels.empty()) throw EmptyBatch("loss needs at least one sample");
  if (posteriors.size() != labels.size() * static_cast<std::size_t>(num_classes)) {
    throw ShapeMismatch("posterior matrix does not match label count");
  }
  if (class_weights.size() != static_cast<std::size_t>(num_classes)) {
    throw ShapeMismatch("class weight vector does not match class count");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = static_cast<int>(labels[i]);
    if (y < 0 || y >= num_classes) {
      throw ShapeMismatch("label " + std::to_string(y) + " outside the class range");
    }
    const double p = std::max(posteriors[i * num_classes + y], kPosteriorFloor);
    total += -class_weights[y] * std::log(p);
  }
  return total / static_cast<double>(labels.size());
}

// ============================================================
// Backward pass
// ============================================================

Gradients gradients(TrainedModel& m, const std::vector<const Epoch*>& batch,
                    const std::vector<double>& weights, Rng* dropout_rng) {
  validate_config(m.config);
  if (batch.empty()) throw EmptyBatch("gradient step needs at least one epoch");
  const ModelConfig& cfg = m.config;
  if (weights.size() != static_cast<std::size_t>(cfg.num_classes)) {
    throw ShapeMismatch("class weight vector does not match class count");
  }
  g_gradient_batches.fetch_add(1, std::memory_order_relaxed);

  Scratch s;
  forward_train(m, batch, dropout_rng, s);
  const Dims d = make_dims(cfg, batch.size());
  const int b = d.b;
  const int k_classes = cfg.num_classes;
  const std::size_t flat = flattened_size(cfg);

  Gradients g;
  g.blocks.resize(cfg.num_blocks);
  for (int k = 0; k < cfg.num_blocks; ++k) {
    g.blocks[k].weight.assign(m.blocks[k].weight.size(), 0.0);
    g.blocks[k].bias.assign(m.blocks[k].bias.size(), 0.0);
    g.blocks[k].gamma.assign(m.blocks[k].gamma.size(), 0.0);
    g.blocks[k].beta.assign(m.blocks[k].beta.size(), 0.0);
  }
  g.dense_weight.assign(m.dense.weight.size(), 0.0);
  g.dense_bias.assign(m.dense.bias.size(), 0.0);

  // Loss and dlogits. loss = mean_b -w(y_b) log p_b[y_b], so
  // dlogits_b = (w(y_b)/B) (p_b - onehot(y_b)).
  std::vector<double> dlogits(static_cast<std::size_t>(b) * k_classes);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (int bi = 0; bi < b; ++bi) {
    const int y = static_cast<int>(batch[bi]->label);
    if (y < 0 || y >= k_classes) {
      throw ShapeMismatch("label " + std::to_string(y) + " outside the class range");
    }
    const double* post = s.posteriors.data() + static_cast<std::size_t>(bi) * k_classes;
    loss += -weights[y] * std::log(std::max(post[y], kPosteriorFloor));
    double* dl = dlogits.data() + static_cast<std::size_t>(bi) * k_classes;
    for (int kc = 0; kc < k_classes; ++kc) {
      dl[kc] = weights[y] * inv_b * (post[kc] - (kc == y ? 1.0 : 0.0));
    }
  }
  g.loss = loss * inv_b;

  // Dense backward and gradient into the flattened activations.
  std::vector<double> dflat(static_cast<std::size_t>(b) * flat, 0.0);
  for (int bi = 0; bi < b; ++bi) {
    const double* fx = s.flat.data() + bi * flat;
    double* dfx = dflat.data() + bi * flat;
    const double* dl = dlogits.data() + static_cast<std::size_t>(bi) * k_classes;
    for (int kc = 0; kc < k_classes; ++kc) {
      kern::axpy(dl[kc], fx, g.dense_weight.data() + static_cast<std::size_t>(kc) * flat, flat);
      g.dense_bias[kc] += dl[kc];
      kern::axpy(dl[kc], m.dense.weight.data() + static_cast<std::size_t>(kc) * flat, dfx, flat);
    }
  }
  if (cfg.dropout > 0.0) {
    kern::mul(dflat.data(), s.mask.data(), dflat.data(), dflat.size());
  }

  // Walk the blocks backwards. dflat doubles as d(pool output) of the last
  // block; each iteration turns d(pool out) into d(pool out) of the block
  // below.
  std::vector<double> dpool = std::move(dflat);
  std::vector<double> dy, dxpad, row;
  for (int k = cfg.num_blocks - 1; k >= 0; --k) {
    const ConvBlock& blk = m.blocks[k];
    BlockCache& cache = s.caches[k];
    const int w = d.w[k], ci = d.c_in[k], co = d.c_out[k];
    const int w_out = w / 2;
    const int wp = w + cfg.kernel_cols - 1;
    const std::size_t region = static_cast<std::size_t>(kRows) * w;
    const std::size_t sample = static_cast<std::size_t>(co) * region;
    const double mcount = static_cast<double>(b) * static_cast<double>(region);

    // Pool backward, then ReLU backward against the recomputed
    // pre-activation sign (y = gamma xhat + beta).
    dy.assign(static_cast<std::size_t>(b) * sample, 0.0);
    row.resize(static_cast<std::size_t>(w));
    for (int bi = 0; bi < b; ++bi) {
      for (int f = 0; f < co; ++f) {
        for (int r = 0; r < kRows; ++r) {
          const double* dp = dpool.data() +
                             ((static_cast<std::size_t>(bi) * co + f) * kRows + r) * w_out;
          double* dyr = dy.data() + bi * sample + f * region + static_cast<std::size_t>(r) * w;
          kern::avgpool2_grad(dp, dyr, static_cast<std::size_t>(w_out));
          if (w % 2 == 1) dyr[w - 1] = 0.0;  // odd tail never reached the pool
          const double* xh =
              cache.xhat.data() + bi * sample + f * region + static_cast<std::size_t>(r) * w;
          kern::affine(xh, blk.gamma[f], blk.beta[f], row.data(), static_cast<std::size_t>(w));
          kern::relu_grad(row.data(), dyr, dyr, static_cast<std::size_t>(w));
        }
      }
    }

    // Batch-norm backward per filter. With s1 = sum dy, s2 = sum dy*xhat:
    // dx = (gamma/sd) * (dy - s1/M - xhat * s2/M).
    for (int f = 0; f < co; ++f) {
      double s1 = 0.0, s2 = 0.0;
      for (int bi = 0; bi < b; ++bi) {
        const double* dyr = dy.data() + bi * sample + f * region;
        const double* xh = cache.xhat.data() + bi * sample + f * region;
        s1 += kern::sum(dyr, region);
        s2 += kern::dot(dyr, xh, region);
      }
      g.blocks[k].beta[f] += s1;
      g.blocks[k].gamma[f] += s2;
      const double a = blk.gamma[f] * cache.inv_sd[f];
      const double shift = -a * s1 / mcount;
      const double xh_coef = -a * s2 / mcount;
      for (int bi = 0; bi < b; ++bi) {
        double* dyr = dy.data() + bi * sample + f * region;
        const double* xh = cache.xhat.data() + bi * sample + f * region;
        kern::affine(dyr, a, shift, dyr, region);
        kern::axpy(xh_coef, xh, dyr, region);
      }
    }

    // Convolution backward; the padded-input gradient trimmed of its
    // padding becomes d(pool out) of the previous block.
    dxpad.resize(static_cast<std::size_t>(b) * ci * kRows * wp);
    conv_backward(cache.xpad.data(), dy.data(), blk.weight.data(), g.blocks[k].weight.data(),
                  g.blocks[k].bias.data(), dxpad.data(), b, ci, co, w, cfg.kernel_rows,
                  cfg.kernel_cols);
    if (k > 0) {
      const int pl = (cfg.kernel_cols - 1) / 2;
      dpool.assign(static_cast<std::size_t>(b) * ci * kRows * w, 0.0);
      const std::size_t rows = static_cast<std::size_t>(b) * ci * kRows;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = dxpad.data() + r * wp + pl;
        std::copy(src, src + w, dpool.begin() + r * w);
      }
    }
  }
  return g;
}

// ============================================================
// Prediction
// ============================================================

std::vector<Prediction> predict(const TrainedModel& m, const std::vector<Epoch>& raw_epochs) {
  validate_config(m.config);
  if (m.config.normalization == norm::Strategy::TrBased && !m.stats) {
    throw norm::MissingStats("model was trained TR_BASED but carries no channel statistics");
  }
  std::vector<Prediction> out;
  out.reserve(raw_epochs.size());
  constexpr std::size_t kChunk = 100;
  const int k_classes = m.config.num_classes;
  for (std::size_t base = 0; base < raw_epochs.size(); base += kChunk) {
    const std::size_t n = std::min(kChunk, raw_epochs.size() - base);
    std::vector<Epoch> normalized;
    normalized.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      normalized.push_back(norm::apply(raw_epochs[base + i], m.config.normalization, m.stats));
    }
    std::vector<const Epoch*> ptrs;
    ptrs.reserve(n);
    for (const Epoch& e : normalized) ptrs.push_back(&e);
    const std::vector<double> post = forward_infer(m, ptrs);
    for (std::size_t i = 0; i < n; ++i) {
      Prediction p;
      p.posterior.assign(post.begin() + i * k_classes, post.begin() + (i + 1) * k_classes);
      int best = 0;
      for (int kc = 1; kc < k_classes; ++kc) {
        if (p.posterior[kc] > p.posterior[best]) best = kc;  // ties keep the earlier stage
      }
      p.stage = static_cast<SleepStage>(best);
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ============================================================
// Training loop
// ============================================================

namespace {

double validation_loss(const TrainedModel& m, const std::vector<Epoch>& val,
                       const std::vector<double>& weights) {
  constexpr std::size_t kChunk = 100;
  double total = 0.0;
  for (std::size_t base = 0; base < val.size(); base += kChunk) {
    const std::size_t n = std::min(kChunk, val.size() - base);
    std::vector<const Epoch*> ptrs;
    ptrs.reserve(n);
    std::vector<SleepStage> labels;
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ptrs.push_back(&val[base + i]);
      labels.push_back(val[base + i].label);
    }
    const std::vector<double> post = forward_infer(m, ptrs);
    // weighted_cross_entropy averages per chunk; re-scale to a global mean.
    total += weighted_cross_entropy(post, labels, weights, m.config.num_classes) *
             static_cast<double>(n);
  }
  return total / static_cast<double>(val.size());
}

struct ParamSnapshot {
  std::vector<ConvBlock> blocks;
  Dense dense;
};

}  // namespace

TrainedModel train(const std::vector<Epoch>& tr_epochs, const std::vector<Epoch>& val_epochs,
                   const ModelConfig& config, const std::string& dataset_id,
                   const ValCheckHook& hook) {
  validate_config(config);
  if (tr_epochs.empty()) throw norm::EmptyTrainingSet("cannot train on an empty training set");

  // Normalization first: statistics come from the training set only.
  std::optional<norm::ChannelStats> stats;
  if (config.normalization == norm::Strategy::TrBased) {
    stats = norm::fit_channel_stats(tr_epochs);
  }
  const std::vector<Epoch> tr = norm::apply_all(tr_epochs, config.normalization, stats);
  const std::vector<Epoch> val = norm::apply_all(val_epochs, config.normalization, stats);

  std::vector<std::uint64_t> cards(config.num_classes, 0);
  for (const Epoch& e : tr) {
    const int y = static_cast<int>(e.label);
    if (y < 0 || y >= config.num_classes) {
      throw ShapeMismatch("training label outside the class range");
    }
    ++cards[static_cast<std::size_t>(y)];
  }
  const std::vector<double> weights = class_weights(cards, config.loss_weighting);

  TrainedModel m = init_model(config);
  m.stats = stats;
  m.provenance.dataset_id = dataset_id;
  Rng rng(mix_seed(config.seed, 0x7261696e));  // training stream, distinct from init

  const std::size_t n = tr.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t n_batches = (n + bs - 1) / bs;

  // Validation checkpoints: evenly spaced 1-based batch indices, the last
  // one landing on the epoch boundary. Fewer batches than checks simply
  // means checking after every batch.
  std::set<std::size_t> check_points;
  const bool has_val = !val.empty();
  if (has_val) {
    for (int c = 1; c <= config.val_checks_per_epoch; ++c) {
      const std::size_t pos =
          (n_batches * static_cast<std::size_t>(c) + config.val_checks_per_epoch - 1) /
          static_cast<std::size_t>(config.val_checks_per_epoch);
      check_points.insert(std::max<std::size_t>(pos, 1));
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  ParamSnapshot best;
  bool have_best = false;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t check_idx = 0;
  std::size_t bad_streak = 0;
  bool stop = false;

  for (int epoch = 1; epoch <= config.max_epochs && !stop; ++epoch) {
    const double lr = learning_rate(config, epoch);
    rng.shuffle(order);
    for (std::size_t bi = 0; bi < n_batches && !stop; ++bi) {
      const std::size_t lo = bi * bs;
      const std::size_t hi = std::min(lo + bs, n);
      std::vector<const Epoch*> batch;
      batch.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&tr[order[i]]);

      const Gradients g = gradients(m, batch, weights, &rng);
      for (int k = 0; k < config.num_blocks; ++k) {
        kern::axpy(-lr, g.blocks[k].weight.data(), m.blocks[k].weight.data(),
                   m.blocks[k].weight.size());
        kern::axpy(-lr, g.blocks[k].bias.data(), m.blocks[k].bias.data(),
                   m.blocks[k].bias.size());
        kern::axpy(-lr, g.blocks[k].gamma.data(), m.blocks[k].gamma.data(),
                   m.blocks[k].gamma.size());
        kern::axpy(-lr, g.blocks[k].beta.data(), m.blocks[k].beta.data(),
                   m.blocks[k].beta.size());
      }
      kern::axpy(-lr, g.dense_weight.data(), m.dense.weight.data(), m.dense.weight.size());
      kern::axpy(-lr, g.dense_bias.data(), m.dense.bias.data(), m.dense.bias.size());
      ++m.provenance.training_iterations;

      if (has_val && check_points.count(bi + 1)) {
        ++check_idx;
        const double measured = validation_loss(m, val, weights);
        const double used = hook ? hook(check_idx, measured, m) : measured;
        if (used < best_loss) {
          best_loss = used;
          best.blocks = m.blocks;
          best.dense = m.dense;
          have_best = true;
          m.provenance.best_check = static_cast<std::int64_t>(check_idx);
          bad_streak = 0;
        } else if (++bad_streak >= static_cast<std::size_t>(config.patience_checks)) {
          stop = true;
          m.provenance.stopped_check = static_cast<std::int64_t>(check_idx);
        }
      }
    }
    m.provenance.epochs_run = epoch;
  }

  if (have_best) {
    // Hand back the snapshot that scored best, not the last state.
    m.blocks = std::move(best.blocks);
    m.dense = std::move(best.dense);
    m.provenance.best_val_loss = best_loss;
    m.provenance.has_val_loss = true;
  }
  return m;
}

// ============================================================
// Serialization
// ============================================================

namespace {

const char kMagic[8] = {'S', 'O', 'M', 'N', 'U', 'S', 'M', '1'};

const char* weighting_name(LossWeighting w) {
  return w == LossWeighting::Weighted ? "WEIGHTED" : "UNWEIGHTED";
}

LossWeighting weighting_from_name(const std::string& s) {
  if (s == "WEIGHTED") return LossWeighting::Weighted;
  if (s == "UNWEIGHTED") return LossWeighting::Unweighted;
  throw Error("unknown loss weighting '" + s + "'");
}

json config_to_json_obj(const ModelConfig& c) {
  json j;
  j["name"] = c.name;
  j["num_blocks"] = c.num_blocks;
  j["kernel_rows"] = c.kernel_rows;
  j["kernel_cols"] = c.kernel_cols;
  j["initial_filters"] = c.initial_filters;
  j["loss_weighting"] = weighting_name(c.loss_weighting);
  j["normalization"] = norm::strategy_name(c.normalization);
  j["filtering_enabled"] = c.filtering_enabled;
  j["num_classes"] = c.num_classes;
  j["input_samples"] = c.input_samples;
  j["seed"] = c.seed;
  j["max_epochs"] = c.max_epochs;
  j["batch_size"] = c.batch_size;
  j["initial_lr"] = c.initial_lr;
  j["lr_step_epochs"] = c.lr_step_epochs;
  j["lr_decay"] = c.lr_decay;
  j["min_lr"] = c.min_lr;
  j["val_checks_per_epoch"] = c.val_checks_per_epoch;
  j["patience_checks"] = c.patience_checks;
  j["dropout"] = c.dropout;
  return j;
}

ModelConfig config_from_json_obj(const json& j) {
  ModelConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "name") c.name = it.value().get<std::string>();
    else if (key == "num_blocks") c.num_blocks = it.value().get<int>();
    else if (key == "kernel_rows") c.kernel_rows = it.value().get<int>();
    else if (key == "kernel_cols") c.kernel_cols = it.value().get<int>();
    else if (key == "initial_filters") c.initial_filters = it.value().get<int>();
    else if (key == "loss_weighting") c.loss_weighting = weighting_from_name(it.value().get<std::string>());
    else if (key == "normalization") c.normalization = norm::strategy_from_name(it.value().get<std::string>());
    else if (key == "filtering_enabled") c.filtering_enabled = it.value().get<bool>();
    else if (key == "num_classes") c.num_classes = it.value().get<int>();
    else if (key == "input_samples") c.input_samples = it.value().get<int>();
    else if (key == "seed") c.seed = it.value().get<std::uint64_t>();
    else if (key == "max_epochs") c.max_epochs = it.value().get<int>();
    else if (key == "batch_size") c.batch_size = it.value().get<int>();
    else if (key == "initial_lr") c.initial_lr = it.value().get<double>();
    else if (key == "lr_step_epochs") c.lr_step_epochs = it.value().get<int>();
    else if (key == "lr_decay") c.lr_decay = it.value().get<double>();
    else if (key == "min_lr") c.min_lr = it.value().get<double>();
    else if (key == "val_checks_per_epoch") c.val_checks_per_epoch = it.value().get<int>();
    else if (key == "patience_checks") c.patience_checks = it.value().get<int>();
    else if (key == "dropout") c.dropout = it.value().get<double>();
    else throw Error("unknown model config key '" + key + "'");
  }
  return c;
}

void append_f64(std::vector<std::uint8_t>& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
}

void read_f64(const std::vector<std::uint8_t>& bytes, std::size_t& off, std::vector<double>& v,
              std::size_t count) {
  if (off + count * 8 > bytes.size()) throw BadModelFile("parameter payload truncated");
  v.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int k = 0; k < 8; ++k) {
      u |= static_cast<std::uint64_t>(bytes[off + i * 8 + k]) << (8 * k);
    }
    std::memcpy(&v[i], &u, 8);
  }
  off += count * 8;
}

}  // namespace

std::string config_to_json(const ModelConfig& c) { return config_to_json_obj(c).dump(); }

ModelConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a JSON object");
  return config_from_json_obj(j);
}

std::vector<std::uint8_t> to_bytes(const TrainedModel& m) {
  validate_config(m.config);
  json manifest;
  manifest["config"] = config_to_json_obj(m.config);
  json prov;
  prov["dataset_id"] = m.provenance.dataset_id;
  prov["seed"] = m.provenance.seed;
  prov["training_iterations"] = m.provenance.training_iterations;
  prov["epochs_run"] = m.provenance.epochs_run;
  prov["best_check"] = m.provenance.best_check;
  prov["stopped_check"] = m.provenance.stopped_check;
  if (m.provenance.has_val_loss) prov["best_val_loss"] = m.provenance.best_val_loss;
  manifest["provenance"] = prov;
  if (m.stats) {
    manifest["stats"] = {{"mean", m.stats->mean}, {"stddev", m.stats->stddev}};
  }

  json tensors = json::array();
  std::vector<const std::vector<double>*> arrays;
  auto add = [&](const std::string& name, const std::vector<double>& v) {
    tensors.push_back({{"name", name}, {"count", v.size()}});
    arrays.push_back(&v);
  };
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    const std::string p = "block" + std::to_string(k) + ".";
    add(p + "weight", m.blocks[k].weight);
    add(p + "bias", m.blocks[k].bias);
    add(p + "gamma", m.blocks[k].gamma);
    add(p + "beta", m.blocks[k].beta);
    add(p + "run_mean", m.blocks[k].run_mean);
    add(p + "run_var", m.blocks[k].run_var);
  }
  add("dense.weight", m.dense.weight);
  add("dense.bias", m.dense.bias);
  manifest["tensors"] = tensors;

  const std::string mtext = manifest.dump();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(mtext.size()) >> (8 * i)));
  }
  out.insert(out.end(), mtext.begin(), mtext.end());
  for (const auto* arr : arrays) append_f64(out, *arr);
  return out;
}

TrainedModel from_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw BadModelFile("not a model file (bad magic)");
  }
  std::uint64_t mlen = 0;
  for (int i = 0; i < 8; ++i) mlen |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
  if (16 + mlen > bytes.size()) throw BadModelFile("manifest truncated");
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
  } catch (const json::exception& e) {
    throw BadModelFile(std::string("manifest is not valid JSON: ") + e.what());
  }

  TrainedModel m;
  try {
    m.config = config_from_json_obj(manifest.at("config"));
    const json& prov = manifest.at("provenance");
    m.provenance.dataset_id = prov.at("dataset_id").get<std::string>();
    m.provenance.seed = prov.at("seed").get<std::uint64_t>();
    m.provenance.training_iterations = prov.at("training_iterations").get<std::uint64_t>();
    m.provenance.epochs_run = prov.at("epochs_run").get<int>();
    m.provenance.best_check = prov.at("best_check").get<std::int64_t>();
    m.provenance.stopped_check = prov.at("stopped_check").get<std::int64_t>();
    if (prov.contains("best_val_loss")) {
      m.provenance.best_val_loss = prov.at("best_val_loss").get<double>();
      m.provenance.has_val_loss = true;
    }
    if (manifest.contains("stats")) {
      norm::ChannelStats st;
      const auto mean = manifest.at("stats").at("mean").get<std::vector<double>>();
      const auto sd = manifest.at("stats").at("stddev").get<std::vector<double>>();
      if (mean.size() != kEpochChannels || sd.size() != kEpochChannels) {
        throw BadModelFile("channel statistics have the wrong arity");
      }
      std::copy(mean.begin(), mean.end(), st.mean.begin());
      std::copy(sd.begin(), sd.end(), st.stddev.begin());
      m.stats = st;
    }
  } catch (const json::exception& e) {
    throw BadModelFile(std::string("manifest missing fields: ") + e.what());
  }
  validate_config(m.config);

  // Rebuild tensors in manifest order and verify against the config-implied
  // shapes as we go.
  std::size_t off = 16 + mlen;
  m.blocks.resize(m.config.num_blocks);
  std::size_t t = 0;
  try {
    const json& tensors = manifest.at("tensors");
    auto next = [&](const std::string& want, std::vector<double>& into, std::size_t expect) {
      if (t >= tensors.size()) throw BadModelFile("tensor list ended early at " + want);
      const std::string name = tensors[t].at("name").get<std::string>();
      const std::size_t count = tensors[t].at("count").get<std::size_t>();
      if (name != want) throw BadModelFile("expected tensor '" + want + "', found '" + name + "'");
      if (count != expect) {
        throw BadModelFile("tensor '" + name + "' holds " + std::to_string(count) +
                           " values, config implies " + std::to_string(expect));
      }
      read_f64(bytes, off, into, count);
      ++t;
    };
    int ci = 1;
    for (int k = 0; k < m.config.num_blocks; ++k) {
      const int f = filters_in_block(m.config, k);
      const std::string p = "block" + std::to_string(k) + ".";
      next(p + "weight", m.blocks[k].weight,
           static_cast<std::size_t>(f) * ci * m.config.kernel_rows * m.config.kernel_cols);
      next(p + "bias", m.blocks[k].bias, f);
      next(p + "gamma", m.blocks[k].gamma, f);
      next(p + "beta", m.blocks[k].beta, f);
      next(p + "run_mean", m.blocks[k].run_mean, f);
      next(p + "run_var", m.blocks[k].run_var, f);
      ci = f;
    }
    next("dense.weight", m.dense.weight, flattened_size(m.config) * m.config.num_classes);
    next("dense.bias", m.dense.bias, m.config.num_classes);
    if (t != tensors.size()) throw BadModelFile("unexpected extra tensors in manifest");
  } catch (const json::exception& e) {
    throw BadModelFile(std::string("malformed tensor manifest: ") + e.what());
  }
  return m;
}

void save_model(const TrainedModel& m, const std::string& path) {
  const std::vector<std::uint8_t> bytes = to_bytes(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to '" + path + "'");
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

std::uint64_t gradient_batch_count() { return g_gradient_batches.load(std::memory_order_relaxed); }

void reset_gradient_batch_count() { g_gradient_batches.store(0, std::memory_order_relaxed); }

}  // namespace somnus::cnn
