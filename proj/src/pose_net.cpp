#include "shrimpmorph/pose_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SparseCore>

#include "shrimpmorph/binary_io.hpp"
#include "shrimpmorph/errors.hpp"
#include "shrimpmorph/rng.hpp"

namespace shrimpmorph {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr std::string_view kCheckpointMagic = "SMPN";
constexpr std::uint32_t kCheckpointVersion = 1;

using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

std::string dims(int rows, int cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

void expect_shape(const Mat& m, int rows, int cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeMismatch(std::string(what) + ": expected " + dims(rows, cols) + ", got " +
                        dims(static_cast<int>(m.rows()), static_cast<int>(m.cols())));
  }
}

// GELU, tanh form: x * sigmoid(2u), u = sqrt(2/pi) * (x + 0.044715 x^3).
constexpr double kGeluK = 0.7978845608028654;
constexpr double kGeluC = 0.044715;

// Returns sigmoid(2u) per element; the activation is x times this gate.
Mat gelu_gate(const Mat& x) {
  const auto a = x.array();
  return (1.0 + (-2.0 * kGeluK * (a + kGeluC * a.cube())).exp()).inverse().matrix();
}

Mat gelu_grad(const Mat& x, const Mat& gate) {
  const auto a = x.array();
  const auto s = gate.array();
  return (s + 2.0 * kGeluK * a * s * (1.0 - s) * (1.0 + 3.0 * kGeluC * a.square())).matrix();
}

struct Axis {
  int lo = 0;
  int hi = 0;
  double t = 0.0;
};

// Half-pixel source position of output cell i, clamped to the input range.
Axis source_axis(int i, int in, int out) {
  double src = (i + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(in - 1));
  Axis a;
  a.lo = static_cast<int>(std::floor(src));
  a.hi = std::min(a.lo + 1, in - 1);
  a.t = src - a.lo;
  return a;
}

SparseMat bilinear_sparse(int in_h, int in_w, int out_h, int out_w) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(out_h) * out_w * 4);
  for (int y = 0; y < out_h; ++y) {
    const Axis ay = source_axis(y, in_h, out_h);
    for (int x = 0; x < out_w; ++x) {
      const Axis ax = source_axis(x, in_w, out_w);
      const int row = y * out_w + x;
      entries.emplace_back(row, ay.lo * in_w + ax.lo, (1 - ay.t) * (1 - ax.t));
      entries.emplace_back(row, ay.lo * in_w + ax.hi, (1 - ay.t) * ax.t);
      entries.emplace_back(row, ay.hi * in_w + ax.lo, ay.t * (1 - ax.t));
      entries.emplace_back(row, ay.hi * in_w + ax.hi, ay.t * ax.t);
    }
  }
  SparseMat m(out_h * out_w, in_h * in_w);
  m.setFromTriplets(entries.begin(), entries.end());  // duplicates are summed
  return m;
}

Mat make_tensor(int rows, int cols, Rng& rng, double stddev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev == 0.0 ? 0.0 : rng.normal(0.0, stddev);
  return m;
}

// Layer norm over each row; caches the normalised rows and inverse stddevs.
Mat layer_norm(const Mat& x, const Mat& gamma, const Mat& beta, Mat* xhat_out,
               Eigen::VectorXd* rstd_out) {
  const auto c = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / c;
    const double var = (x.row(r).array() - mean).square().sum() / c;
    rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
  }
  Mat y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (xhat_out) *xhat_out = std::move(xhat);
  if (rstd_out) *rstd_out = std::move(rstd);
  return y;
}

void softmax_rows(Mat& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct BlockCache {
  Mat xhat;
  Eigen::VectorXd rstd;
  Mat n, q, k, v, o, a1, hpre, gate, g;
  std::vector<Mat> probs;
};

Mat block_forward(const Mat& f, const LayerParams& lp, const PoseNetConfig& c, BlockCache* cache) {
  Mat xhat;
  Eigen::VectorXd rstd;
  Mat n = layer_norm(f, lp.ln_gamma, lp.ln_beta, cache ? &xhat : nullptr, cache ? &rstd : nullptr);
  Mat q = n * lp.wq;
  q.rowwise() += lp.bq.row(0);
  Mat k = n * lp.wk;
  Mat v = n * lp.wv;
  v.rowwise() += lp.bv.row(0);

  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat o(f.rows(), f.cols());
  std::vector<Mat> probs;
  for (int h = 0; h < c.num_heads; ++h) {
    Mat s = scale * (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose());
    softmax_rows(s);
    o.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    if (cache) probs.push_back(std::move(s));
  }
  Mat a1 = o * lp.wo;
  a1.rowwise() += lp.bo.row(0);
  a1 += f;

  Mat hpre = a1 * lp.w1;
  hpre.rowwise() += lp.b1.row(0);
  Mat gate = gelu_gate(hpre);
  Mat g = hpre.cwiseProduct(gate);
  Mat out = g * lp.w2;
  out.rowwise() += lp.b2.row(0);
  out += a1;

  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
    cache->n = std::move(n);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
    cache->a1 = std::move(a1);
    cache->hpre = std::move(hpre);
    cache->gate = std::move(gate);
    cache->g = std::move(g);
    cache->probs = std::move(probs);
  }
  return out;
}

// Backpropagates d_out through one block, accumulating into g; returns dF.
Mat block_backward(const Mat& d_out, const LayerParams& lp, const BlockCache& cache,
                   const PoseNetConfig& c, LayerParams& g) {
  // MLP branch.
  Mat d_a1 = d_out;
  g.w2.noalias() += cache.g.transpose() * d_out;
  g.b2 += d_out.colwise().sum();
  Mat d_h = (d_out * lp.w2.transpose()).cwiseProduct(gelu_grad(cache.hpre, cache.gate));
  g.w1.noalias() += cache.a1.transpose() * d_h;
  g.b1 += d_h.colwise().sum();
  d_a1.noalias() += d_h * lp.w1.transpose();

  // Attention branch.
  Mat d_f = d_a1;
  g.wo.noalias() += cache.o.transpose() * d_a1;
  g.bo += d_a1.colwise().sum();
  const Mat d_o = d_a1 * lp.wo.transpose();

  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat d_q(d_o.rows(), d_o.cols()), d_k(d_o.rows(), d_o.cols()), d_v(d_o.rows(), d_o.cols());
  for (int h = 0; h < c.num_heads; ++h) {
    const Mat& p = cache.probs[static_cast<std::size_t>(h)];
    const auto d_oh = d_o.middleCols(h * dh, dh);
    d_v.middleCols(h * dh, dh).noalias() = p.transpose() * d_oh;
    Mat d_p = d_oh * cache.v.middleCols(h * dh, dh).transpose();
    const Eigen::VectorXd dot = (d_p.cwiseProduct(p)).rowwise().sum();
    Mat d_s = p.cwiseProduct(d_p.colwise() - dot) * scale;
    d_q.middleCols(h * dh, dh).noalias() = d_s * cache.k.middleCols(h * dh, dh);
    d_k.middleCols(h * dh, dh).noalias() = d_s.transpose() * cache.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += cache.n.transpose() * d_q;
  g.wk.noalias() += cache.n.transpose() * d_k;
  g.wv.noalias() += cache.n.transpose() * d_v;
  g.bq += d_q.colwise().sum();
  g.bv += d_v.colwise().sum();
  Mat d_n = d_q * lp.wq.transpose();
  d_n.noalias() += d_k * lp.wk.transpose();
  d_n.noalias() += d_v * lp.wv.transpose();

  // Layer norm.
  g.ln_gamma += d_n.cwiseProduct(cache.xhat).colwise().sum();
  g.ln_beta += d_n.colwise().sum();
  const Mat d_xhat = d_n.array().rowwise() * lp.ln_gamma.row(0).array();
  const auto cols = static_cast<double>(d_xhat.cols());
  for (Eigen::Index r = 0; r < d_xhat.rows(); ++r) {
    const double mean_d = d_xhat.row(r).sum() / cols;
    const double mean_dx = d_xhat.row(r).dot(cache.xhat.row(r)) / cols;
    d_f.row(r).array() +=
        cache.rstd(r) * (d_xhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return d_f;
}

void check_params(const PoseParams& p, const PoseNetConfig& c) {
  const auto shapes = parameter_shapes(c);
  std::size_t i = 0;
  bool count_ok = true;
  p.visit([&](const std::string& name, const Mat& m) {
    if (i >= shapes.size()) {
      count_ok = false;
      return;
    }
    if (shapes[i].name != name) throw ShapeMismatch("unexpected tensor " + name);
    expect_shape(m, shapes[i].rows, shapes[i].cols, name.c_str());
    ++i;
  });
  if (!count_ok || i != shapes.size()) throw ShapeMismatch("parameter set does not match config");
}

double log_parabola_offset(double l, double c, double r) {
  if (l > 0.0 && c > 0.0 && r > 0.0) {
    const double a = std::log(l), b = std::log(c), d = std::log(r);
    const double denom = a - 2.0 * b + d;
    if (denom < 0.0) return std::clamp(0.5 * (a - d) / denom, -0.5, 0.5);
  }
  if (r > l) return 0.25;
  if (l > r) return -0.25;
  return 0.0;
}

constexpr double kRefineSigma = 1.0;  // cells
constexpr int kRefineRadius = 3;

// Gaussian-weighted sum over a (2rx+1) x (2ry+1) window; caller keeps it in bounds.
double smoothed_at(const HeatmapStack& h, int k, int cy, int cx, int rx, int ry) {
  const double inv2s2 = 1.0 / (2.0 * kRefineSigma * kRefineSigma);
  double acc = 0.0;
  for (int j = -ry; j <= ry; ++j) {
    for (int i = -rx; i <= rx; ++i) acc += std::exp(-(i * i + j * j) * inv2s2) * h.at(k, cy + j, cx + i);
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------- config

void PoseNetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ShapeMismatch("pose config: " + msg); };
  if (input_height <= 0 || input_width <= 0) fail("input size must be positive");
  if (in_channels != 4) fail("in_channels must be 4 (RGB-D)");
  if (patch_size <= 0 || patch_size % 4 != 0) fail("patch_size must be a positive multiple of 4");
  if (input_height % patch_size != 0 || input_width % patch_size != 0) {
    fail("input size must be divisible by patch_size");
  }
  if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0) {
    fail("embed_dim must be divisible by num_heads");
  }
  if (num_layers < 0) fail("num_layers must be >= 0");
  if (!(mlp_ratio > 0.0)) fail("mlp_ratio must be > 0");
  if (num_keypoints < 1 || num_keypoints > kMaxKeypoints) fail("num_keypoints out of range");
  if (decoder_upscale * 4 != patch_size) fail("decoder_upscale must equal patch_size / 4");
  if (!(heatmap_sigma > 0.0)) fail("heatmap_sigma must be > 0");
}

int PoseNetConfig::mlp_dim() const {
  return std::max(1, static_cast<int>(std::lround(embed_dim * mlp_ratio)));
}

PoseNetConfig PoseNetConfig::desk() { return PoseNetConfig{}; }

PoseNetConfig PoseNetConfig::tiny() {
  PoseNetConfig c;
  c.input_height = 16;
  c.input_width = 16;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.num_layers = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2.0;
  c.num_keypoints = 3;
  c.decoder_upscale = 1;
  c.heatmap_sigma = 1.0;
  return c;
}

PoseNetConfig PoseNetConfig::full() {
  PoseNetConfig c;
  c.input_height = 192;
  c.input_width = 256;
  c.patch_size = 16;
  c.embed_dim = 1280;
  c.num_layers = 16;
  c.num_heads = 16;
  c.mlp_ratio = 4.0;
  c.num_keypoints = 23;
  c.decoder_upscale = 4;
  return c;
}

// ---------------------------------------------------------------- parameters

void PoseParams::visit(const std::function<void(const std::string&, Mat&)>& f) {
  f("patch_w", patch_w);
  f("patch_b", patch_b);
  f("pos", pos);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    f(p + "ln_gamma", l.ln_gamma);
    f(p + "ln_beta", l.ln_beta);
    f(p + "wq", l.wq);
    f(p + "bq", l.bq);
    f(p + "wk", l.wk);
    f(p + "wv", l.wv);
    f(p + "bv", l.bv);
    f(p + "wo", l.wo);
    f(p + "bo", l.bo);
    f(p + "w1", l.w1);
    f(p + "b1", l.b1);
    f(p + "w2", l.w2);
    f(p + "b2", l.b2);
  }
  f("head_w", head_w);
  f("head_b", head_b);
}

void PoseParams::visit(const std::function<void(const std::string&, const Mat&)>& f) const {
  const_cast<PoseParams*>(this)->visit(
      [&](const std::string& name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
}

PoseParams PoseParams::zeros_like() const {
  PoseParams z = *this;
  z.visit([](const std::string&, Mat& m) { m.setZero(); });
  return z;
}

std::size_t PoseParams::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

std::vector<TensorShape> parameter_shapes(const PoseNetConfig& c) {
  c.validate();
  const int C = c.embed_dim, M = c.mlp_dim();
  std::vector<TensorShape> s{{"patch_w", c.patch_dim(), C}, {"patch_b", 1, C}, {"pos", c.tokens(), C}};
  for (int i = 0; i < c.num_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    s.push_back({p + "ln_gamma", 1, C});
    s.push_back({p + "ln_beta", 1, C});
    for (const char* w : {"q", "k", "v", "o"}) {
      s.push_back({p + "w" + w, C, C});
      if (*w != 'k') s.push_back({p + "b" + w, 1, C});
    }
    s.push_back({p + "w1", C, M});
    s.push_back({p + "b1", 1, M});
    s.push_back({p + "w2", M, C});
    s.push_back({p + "b2", 1, C});
  }
  s.push_back({"head_w", C, c.num_keypoints});
  s.push_back({"head_b", 1, c.num_keypoints});
  return s;
}

HeatmapShape output_shape(const PoseNetConfig& c) {
  c.validate();
  // Patch grid, unchanged by the encoder, then upsampled by the decoder.
  const int gh = c.input_height / c.patch_size;
  const int gw = c.input_width / c.patch_size;
  return {gh * c.decoder_upscale, gw * c.decoder_upscale, c.num_keypoints};
}

PoseModel init_pose_model(const PoseNetConfig& config, Variant variant) {
  config.validate();
  PoseModel model;
  model.config = config;
  model.variant = variant;
  const int C = config.embed_dim, M = config.mlp_dim();
  const double residual_scale = 1.0 / std::sqrt(2.0 * std::max(1, config.num_layers));
  std::uint64_t ordinal = 0;
  auto draw = [&](int rows, int cols, double stddev) {
    Rng rng(derive_seed(config.seed, ordinal++));
    return make_tensor(rows, cols, rng, stddev);
  };
  auto& p = model.params;
  p.patch_w = draw(config.patch_dim(), C, 1.0 / std::sqrt(config.patch_dim()));
  p.patch_b = draw(1, C, 0.0);
  p.pos = draw(config.tokens(), C, 0.02);
  for (int i = 0; i < config.num_layers; ++i) {
    LayerParams l;
    l.ln_gamma = Mat::Ones(1, C);
    l.ln_beta = draw(1, C, 0.0);
    l.wq = draw(C, C, 1.0 / std::sqrt(C));
    l.wk = draw(C, C, 1.0 / std::sqrt(C));
    l.wv = draw(C, C, 1.0 / std::sqrt(C));
    l.wo = draw(C, C, residual_scale / std::sqrt(C));
    l.bq = draw(1, C, 0.0);
    l.bv = draw(1, C, 0.0);
    l.bo = draw(1, C, 0.0);
    l.w1 = draw(C, M, 1.0 / std::sqrt(C));
    l.b1 = draw(1, M, 0.0);
    l.w2 = draw(M, C, residual_scale / std::sqrt(M));
    l.b2 = draw(1, C, 0.0);
    p.layers.push_back(std::move(l));
  }
  p.head_w = draw(C, config.num_keypoints, 0.01);
  p.head_b = draw(1, config.num_keypoints, 0.0);
  return model;
}

// ---------------------------------------------------------------- input

NormStats compute_norm_stats(const std::vector<const RgbdRaster*>& rasters) {
  NormStats s;
  std::array<double, 4> sum{}, sum2{};
  double n = 0.0;
  for (const RgbdRaster* r : rasters) {
    const std::size_t count = r->pixel_count();
    for (std::size_t i = 0; i < count; ++i) {
      for (int ch = 0; ch < 3; ++ch) {
        const double v = r->rgb[3 * i + static_cast<std::size_t>(ch)];
        sum[static_cast<std::size_t>(ch)] += v;
        sum2[static_cast<std::size_t>(ch)] += v * v;
      }
      const double d = r->depth[i];
      sum[3] += d;
      sum2[3] += d * d;
    }
    n += static_cast<double>(count);
  }
  if (n == 0.0) return s;
  for (std::size_t ch = 0; ch < 4; ++ch) {
    s.mean[ch] = sum[ch] / n;
    const double var = std::max(0.0, sum2[ch] / n - s.mean[ch] * s.mean[ch]);
    s.stddev[ch] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Mat patchify(const RgbdRaster& raster, const NormStats& norm, const PoseNetConfig& c) {
  if (raster.width != c.input_width || raster.height != c.input_height) {
    throw ShapeMismatch("raster is " + dims(raster.height, raster.width) + ", model expects " +
                        dims(c.input_height, c.input_width));
  }
  const int d = c.patch_size, gw = c.grid_width();
  Mat x(c.tokens(), c.patch_dim());
  for (int py = 0; py < c.grid_height(); ++py) {
    for (int px = 0; px < gw; ++px) {
      auto row = x.row(py * gw + px);
      for (int dy = 0; dy < d; ++dy) {
        for (int dx = 0; dx < d; ++dx) {
          const std::size_t o = raster.offset(px * d + dx, py * d + dy);
          const int cell = dy * d + dx;
          for (int ch = 0; ch < 3; ++ch) {
            const auto uch = static_cast<std::size_t>(ch);
            row(ch * d * d + cell) = (raster.rgb[3 * o + uch] - norm.mean[uch]) / norm.stddev[uch];
          }
          row(3 * d * d + cell) = (raster.depth[o] - norm.mean[3]) / norm.stddev[3];
        }
      }
    }
  }
  return x;
}

// ---------------------------------------------------------------- forward

FeatureMap patch_embed(const Mat& patches, const PoseParams& params, const PoseNetConfig& c) {
  expect_shape(patches, c.tokens(), c.patch_dim(), "patches");
  expect_shape(params.patch_w, c.patch_dim(), c.embed_dim, "patch_w");
  expect_shape(params.pos, c.tokens(), c.embed_dim, "pos");
  FeatureMap f{c.grid_height(), c.grid_width(), patches * params.patch_w};
  f.data.rowwise() += params.patch_b.row(0);
  f.data += params.pos;
  return f;
}

FeatureMap vit_block(const FeatureMap& f, const LayerParams& layer, const PoseNetConfig& c) {
  expect_shape(f.data, f.grid_height * f.grid_width, c.embed_dim, "feature map");
  expect_shape(layer.wq, c.embed_dim, c.embed_dim, "wq");
  expect_shape(layer.w1, c.embed_dim, c.mlp_dim(), "w1");
  return {f.grid_height, f.grid_width, block_forward(f.data, layer, c, nullptr)};
}

Mat bilinear_matrix(int in_h, int in_w, int out_h, int out_w) {
  return Mat(bilinear_sparse(in_h, in_w, out_h, out_w));
}

double bilinear_sample(const Mat& grid, double y, double x) {
  const auto h = static_cast<int>(grid.rows()), w = static_cast<int>(grid.cols());
  y = std::clamp(y, 0.0, h - 1.0);
  x = std::clamp(x, 0.0, w - 1.0);
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ty = y - y0, tx = x - x0;
  return (1 - ty) * ((1 - tx) * grid(y0, x0) + tx * grid(y0, x1)) +
         ty * ((1 - tx) * grid(y1, x0) + tx * grid(y1, x1));
}

HeatmapStack decode_heatmaps(const FeatureMap& f, const PoseParams& params,
                             const PoseNetConfig& c) {
  if (f.grid_height != c.grid_height() || f.grid_width != c.grid_width()) {
    throw ShapeMismatch("feature grid does not match config");
  }
  expect_shape(f.data, c.tokens(), c.embed_dim, "feature map");
  expect_shape(params.head_w, c.embed_dim, c.num_keypoints, "head_w");
  const SparseMat up = bilinear_sparse(c.grid_height(), c.grid_width(), c.heatmap_height(),
                                       c.heatmap_width());
  const Mat u = (up * f.data).cwiseMax(0.0);
  HeatmapStack h{c.heatmap_height(), c.heatmap_width(), c.num_keypoints, u * params.head_w};
  h.data.rowwise() += params.head_b.row(0);
  return h;
}

HeatmapStack forward(const PoseModel& model, const Mat& patches) {
  const auto& c = model.config;
  FeatureMap f = patch_embed(patches, model.params, c);
  for (const auto& layer : model.params.layers) f = vit_block(f, layer, c);
  return decode_heatmaps(f, model.params, c);
}

HeatmapStack forward(const PoseModel& model, const RgbdRaster& raster) {
  return forward(model, patchify(raster, model.norm, model.config));
}

// ---------------------------------------------------------------- decoding

VirtualSkeleton extract_keypoints(const HeatmapStack& h, Variant variant) {
  if (h.num_maps != keypoint_count(variant.rostrum)) {
    throw VariantMismatch("heatmap stack has " + std::to_string(h.num_maps) + " maps, " +
                          variant_name(variant) + " needs " +
                          std::to_string(keypoint_count(variant.rostrum)));
  }
  VirtualSkeleton skel;
  skel.view = variant.view;
  skel.rostrum = variant.rostrum;
  const int first = first_keypoint_index(variant.rostrum);
  for (int k = 0; k < h.num_maps; ++k) {
    int best = 0;
    const auto cells = h.height * h.width;
    for (int i = 1; i < cells; ++i) {
      if (h.data(i, k) > h.data(best, k)) best = i;
    }
    const int y = best / h.width, x = best % h.width;
    double dx = 0.0, dy = 0.0;
    if (x > 0 && x + 1 < h.width && y > 0 && y + 1 < h.height) {
      const int rx = std::min({kRefineRadius, x - 1, h.width - 2 - x});
      const int ry = std::min({kRefineRadius, y - 1, h.height - 2 - y});
      auto s = [&](int cy, int cx) { return smoothed_at(h, k, cy, cx, rx, ry); };
      const double c = s(y, x);
      dx = log_parabola_offset(s(y, x - 1), c, s(y, x + 1));
      dy = log_parabola_offset(s(y - 1, x), c, s(y + 1, x));
    } else {
      const double c = h.at(k, y, x);
      if (x > 0 && x + 1 < h.width) dx = log_parabola_offset(h.at(k, y, x - 1), c, h.at(k, y, x + 1));
      if (y > 0 && y + 1 < h.height) dy = log_parabola_offset(h.at(k, y - 1, x), c, h.at(k, y + 1, x));
    }
    skel.keypoints.push_back({first + k, 4.0 * (x + dx), 4.0 * (y + dy), true});
  }
  return skel;
}

HeatmapStack gaussian_target(const VirtualSkeleton& skel, const PoseNetConfig& c) {
  if (keypoint_count(skel.rostrum) != c.num_keypoints) {
    throw VariantMismatch("skeleton variant " + variant_name(variant_of(skel)) +
                          " does not match a " + std::to_string(c.num_keypoints) +
                          "-keypoint model");
  }
  HeatmapStack h{c.heatmap_height(), c.heatmap_width(), c.num_keypoints,
                 Mat::Zero(c.heatmap_height() * c.heatmap_width(), c.num_keypoints)};
  const int first = first_keypoint_index(skel.rostrum);
  const double inv2s2 = 1.0 / (2.0 * c.heatmap_sigma * c.heatmap_sigma);
  for (int k = 0; k < c.num_keypoints; ++k) {
    const Keypoint* kp = skel.find(first + k);
    if (!kp) throw MissingKeypoint("keypoint " + std::to_string(first + k) + " absent");
    if (!(kp->x >= 0.0 && kp->x < c.input_width && kp->y >= 0.0 && kp->y < c.input_height)) {
      throw OutOfBounds("keypoint " + std::to_string(kp->index) + " at (" +
                        std::to_string(kp->x) + ", " + std::to_string(kp->y) +
                        ") lies outside the input image");
    }
    if (!kp->visible) continue;
    const double cx = kp->x / 4.0, cy = kp->y / 4.0;
    for (int y = 0; y < h.height; ++y) {
      const double ey = (y - cy) * (y - cy);
      for (int x = 0; x < h.width; ++x) {
        h.at(k, y, x) = std::exp(-(ey + (x - cx) * (x - cx)) * inv2s2);
      }
    }
  }
  return h;
}

// ---------------------------------------------------------------- loss

namespace {

double sample_loss_and_grads(const PoseModel& model, const PoseExample& ex, const SparseMat& up,
                             double weight, PoseParams* grads) {
  const auto& c = model.config;
  const auto& p = model.params;
  expect_shape(ex.patches, c.tokens(), c.patch_dim(), "patches");
  expect_shape(ex.target.data, c.heatmap_height() * c.heatmap_width(), c.num_keypoints,
               "target heatmaps");

  Mat f = ex.patches * p.patch_w;
  f.rowwise() += p.patch_b.row(0);
  f += p.pos;
  std::vector<BlockCache> caches(p.layers.size());
  std::vector<Mat> inputs;
  inputs.reserve(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    inputs.push_back(f);
    f = block_forward(f, p.layers[i], c, grads ? &caches[i] : nullptr);
  }
  const Mat u = up * f;
  const Mat r = u.cwiseMax(0.0);
  Mat y = r * p.head_w;
  y.rowwise() += p.head_b.row(0);
  const Mat diff = y - ex.target.data;
  const double sse = diff.squaredNorm();
  if (!grads) return sse;

  const Mat d_y = (2.0 * weight) * diff;
  grads->head_w.noalias() += r.transpose() * d_y;
  grads->head_b += d_y.colwise().sum();
  const Mat d_u = (d_y * p.head_w.transpose()).cwiseProduct((u.array() > 0.0).cast<double>().matrix());
  Mat d_f = up.transpose() * d_u;
  for (std::size_t i = p.layers.size(); i-- > 0;) {
    d_f = block_backward(d_f, p.layers[i], caches[i], c, grads->layers[i]);
  }
  grads->patch_w.noalias() += ex.patches.transpose() * d_f;
  grads->patch_b += d_f.colwise().sum();
  grads->pos += d_f;
  return sse;
}

}  // namespace

LossAndGrads loss_and_gradients(const PoseModel& model, const std::vector<const PoseExample*>& batch) {
  if (batch.empty()) throw InvalidArgument("loss_and_gradients needs a nonempty batch");
  const auto& c = model.config;
  check_params(model.params, c);
  const SparseMat up = bilinear_sparse(c.grid_height(), c.grid_width(), c.heatmap_height(),
                                       c.heatmap_width());
  const double cells = static_cast<double>(batch.size()) * c.heatmap_height() * c.heatmap_width() *
                       c.num_keypoints;
  LossAndGrads out;
  out.grads = model.params.zeros_like();
  double sse = 0.0;
  for (const PoseExample* ex : batch) sse += sample_loss_and_grads(model, *ex, up, 1.0 / cells, &out.grads);
  out.loss = sse / cells;
  return out;
}

LossAndGrads loss_and_gradients(const PoseModel& model, const std::vector<PoseExample>& batch) {
  std::vector<const PoseExample*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& ex : batch) ptrs.push_back(&ex);
  return loss_and_gradients(model, ptrs);
}

double loss_only(const PoseModel& model, const std::vector<PoseExample>& batch) {
  if (batch.empty()) throw InvalidArgument("loss_only needs a nonempty batch");
  const auto& c = model.config;
  check_params(model.params, c);
  const SparseMat up = bilinear_sparse(c.grid_height(), c.grid_width(), c.heatmap_height(),
                                       c.heatmap_width());
  double sse = 0.0;
  for (const auto& ex : batch) sse += sample_loss_and_grads(model, ex, up, 0.0, nullptr);
  return sse / (static_cast<double>(batch.size()) * c.heatmap_height() * c.heatmap_width() *
                c.num_keypoints);
}

// ---------------------------------------------------------------- checkpoint

std::vector<std::uint8_t> encode_pose_model(const PoseModel& model) {
  const auto& c = model.config;
  c.validate();
  check_params(model.params, c);
  detail::ByteWriter w;
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  for (int v : {c.input_height, c.input_width, c.in_channels, c.patch_size, c.embed_dim,
                c.num_layers, c.num_heads}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(c.mlp_ratio);
  w.u32(static_cast<std::uint32_t>(c.num_keypoints));
  w.u32(static_cast<std::uint32_t>(c.decoder_upscale));
  w.f64(c.heatmap_sigma);
  w.i64(static_cast<std::int64_t>(c.seed));
  w.u8(model.variant.view == View::Lateral ? 0 : 1);
  w.u8(model.variant.rostrum == RostrumState::Intact ? 0 : 1);
  for (double v : model.norm.mean) w.f64(v);
  for (double v : model.norm.stddev) w.f64(v);
  std::uint32_t count = 0;
  model.params.visit([&](const std::string&, const Mat&) { ++count; });
  w.u32(count);
  model.params.visit([&](const std::string& name, const Mat& m) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    w.f64s(m.data(), static_cast<std::size_t>(m.size()));
  });
  return std::move(w.buffer());
}

PoseModel decode_pose_model(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kCheckpointMagic);
  if (r.u32() != kCheckpointVersion) throw FormatError("unsupported pose checkpoint version");
  PoseNetConfig c;
  c.input_height = static_cast<int>(r.u32());
  c.input_width = static_cast<int>(r.u32());
  c.in_channels = static_cast<int>(r.u32());
  c.patch_size = static_cast<int>(r.u32());
  c.embed_dim = static_cast<int>(r.u32());
  c.num_layers = static_cast<int>(r.u32());
  c.num_heads = static_cast<int>(r.u32());
  c.mlp_ratio = r.f64();
  c.num_keypoints = static_cast<int>(r.u32());
  c.decoder_upscale = static_cast<int>(r.u32());
  c.heatmap_sigma = r.f64();
  c.seed = static_cast<std::uint64_t>(r.i64());
  try {
    c.validate();
  } catch (const ShapeMismatch& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  PoseModel model;
  model.config = c;
  const auto view = r.u8(), rostrum = r.u8();
  if (view > 1 || rostrum > 1) throw FormatError("checkpoint variant tag invalid");
  model.variant = {view == 0 ? View::Lateral : View::Dorsal,
                   rostrum == 0 ? RostrumState::Intact : RostrumState::Broken};
  for (auto& v : model.norm.mean) v = r.f64();
  for (auto& v : model.norm.stddev) v = r.f64();

  const auto shapes = parameter_shapes(c);
  if (r.u32() != shapes.size()) throw FormatError("checkpoint tensor count does not match config");
  model.params.layers.resize(static_cast<std::size_t>(c.num_layers));
  std::size_t i = 0;
  model.params.visit([&](const std::string& name, Mat& m) {
    const auto& want = shapes[i++];
    if (r.str() != name) throw FormatError("checkpoint tensor order mismatch at " + name);
    const auto rows = static_cast<int>(r.u32()), cols = static_cast<int>(r.u32());
    if (rows != want.rows || cols != want.cols) throw FormatError("checkpoint tensor " + name + " has wrong shape");
    const auto values = r.f64s();
    if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
      throw FormatError("checkpoint tensor " + name + " has wrong size");
    }
    m = Eigen::Map<const Mat>(values.data(), rows, cols);
  });
  if (!r.at_end()) throw FormatError("trailing bytes after pose checkpoint");
  return model;
}

void save_pose_model(const PoseModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pose_model(model));
}

PoseModel load_pose_model(const std::filesystem::path& path) {
  return decode_pose_model(read_file_bytes(path));
}

// ---------------------------------------------------------------- registry

void PoseRegistry::add(PoseModel model) {
  if (model.config.num_keypoints != keypoint_count(model.variant.rostrum)) {
    throw VariantMismatch("model for " + variant_name(model.variant) + " predicts " +
                          std::to_string(model.config.num_keypoints) + " keypoints");
  }
  const Variant v = model.variant;
  models_.insert_or_assign(v, std::move(model));
}

const PoseModel& PoseRegistry::get(Variant v) const {
  const auto it = models_.find(v);
  if (it == models_.end()) throw MissingVariant("no pose model registered for " + variant_name(v));
  return it->second;
}

VirtualSkeleton route_and_predict(const PoseRegistry& registry, const RgbdRaster& raster, View view,
                                  RostrumState rostrum) {
  const PoseModel& model = registry.get({view, rostrum});
  return extract_keypoints(forward(model, raster), model.variant);
}

}  // namespace shrimpmorph
