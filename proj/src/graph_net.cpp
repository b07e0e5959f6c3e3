#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "ensemblecast/errors.hpp"
#include "ensemblecast/rng.hpp"
#include "ensemblecast/stepper.hpp"

namespace ecast {
namespace {

constexpr double kLnEps = 1e-5;
constexpr double kDegToRad = 0.017453292519943295;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double swish(double x) { return x * sigmoid(x); }
inline double swish_grad(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

// Offsets into the flat parameter vector.
struct Linear {
  int in = 0, out = 0;
  std::size_t w = 0, b = 0;
};

struct LayerNorm {
  int width = 0;
  std::size_t gamma = 0, beta = 0;
};

// Interaction block: per-edge MLP on (src, dst) latents, sum aggregation at
// the destination, residual node update, layer normalization.
struct Block {
  Linear e1, e2, n1, n2;
  LayerNorm ln;
};

enum class EdgeSet { g2m, m2g, up, down, intra };

struct BlockSpec {
  Block blk;
  EdgeSet set = EdgeSet::intra;
  int level = 0;
  int a_idx = 0;  // latent array holding edge sources: 0 = grid, 1 + l = mesh level l
  int b_idx = 0;  // latent array being updated
};

struct BlockCache {
  std::vector<double> a_in, b_in;
  std::vector<double> e1_pre;   // per edge, width
  std::vector<double> agg;      // per dst node, width
  std::vector<double> n1_pre;   // per dst node, width
  std::vector<double> xhat;     // per dst node, width
  std::vector<double> inv_std;  // per dst node
};

struct StageRec {
  const Block* blk = nullptr;
  const std::vector<Edge>* edges = nullptr;
  int a_idx = 0, b_idx = 0;
  BlockCache cache;
};

struct EncoderCache {
  std::vector<double> h1;       // per node, width (pre-swish)
  std::vector<double> xhat;     // per node, width
  std::vector<double> inv_std;  // per node
};

struct FwdCache {
  std::vector<double> channels;
  EncoderCache genc;
  std::vector<EncoderCache> menc;
  std::vector<double> grid0;
  std::vector<std::vector<double>> mesh0;
  std::vector<StageRec> stages;
  std::vector<double> grid_final;
  std::vector<double> dec_h1;  // per sea cell, width
  std::vector<double> y;       // per sea cell
};

struct LayoutEntry {
  std::string name;
  std::vector<int> dims;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class GraphStepper final : public Stepper {
 public:
  GraphStepper(GridPtr grid, std::shared_ptr<const HierMesh> mesh, int width,
               int proc_layers, std::uint64_t seed)
      : grid_(std::move(grid)), mesh_(std::move(mesh)), width_(width), proc_(proc_layers) {
    if (!grid_ || !mesh_) fail(Errc::invalid_argument, "graph stepper: null grid or mesh");
    if (width_ < 2) fail(Errc::invalid_argument, "graph stepper: width must be >= 2");
    if (proc_ < 1) fail(Errc::invalid_argument, "graph stepper: proc_layers must be >= 1");
    if (mesh_->levels.empty()) fail(Errc::bad_level_spec, "graph stepper: empty mesh");
    const int n_levels = static_cast<int>(mesh_->levels.size());

    sea_ = grid_->sea_cells();
    cell_to_sea_.assign(grid_->n_cells(), -1);
    for (std::size_t s = 0; s < sea_.size(); ++s)
      cell_to_sea_[sea_[s]] = static_cast<int>(s);
    g2m_.reserve(mesh_->g2m.size());
    for (const Edge& e : mesh_->g2m)
      g2m_.push_back({cell_to_sea_[static_cast<std::size_t>(e.src)], e.dst});
    m2g_.reserve(mesh_->m2g.size());
    for (const Edge& e : mesh_->m2g)
      m2g_.push_back({e.src, cell_to_sea_[static_cast<std::size_t>(e.dst)]});

    node_feats_.resize(static_cast<std::size_t>(n_levels));
    for (int l = 0; l < n_levels; ++l) {
      const MeshLevel& lev = mesh_->levels[static_cast<std::size_t>(l)];
      std::vector<double>& f = node_feats_[static_cast<std::size_t>(l)];
      f.resize(static_cast<std::size_t>(lev.n_nodes()) * 4);
      for (int v = 0; v < lev.n_nodes(); ++v) {
        const double la = lev.lat[static_cast<std::size_t>(v)] * kDegToRad;
        const double lo = lev.lon[static_cast<std::size_t>(v)] * kDegToRad;
        f[static_cast<std::size_t>(v) * 4 + 0] = std::sin(la);
        f[static_cast<std::size_t>(v) * 4 + 1] = std::cos(la);
        f[static_cast<std::size_t>(v) * 4 + 2] = std::sin(lo);
        f[static_cast<std::size_t>(v) * 4 + 3] = std::cos(lo);
      }
    }

    genc1_ = make_linear("enc.grid.l1", kInputChannels, width_);
    genc2_ = make_linear("enc.grid.l2", width_, width_);
    genc_ln_ = make_ln("enc.grid.ln");
    for (int l = 0; l < n_levels; ++l) {
      const std::string p = "enc.mesh" + std::to_string(l);
      menc1_.push_back(make_linear(p + ".l1", 4, width_));
      menc2_.push_back(make_linear(p + ".l2", width_, width_));
      menc_ln_.push_back(make_ln(p + ".ln"));
    }
    blocks_.push_back(make_block("blk.g2m", EdgeSet::g2m, 0, 0, 1));
    for (int l = 0; l + 1 < n_levels; ++l)
      blocks_.push_back(
          make_block("blk.up" + std::to_string(l), EdgeSet::up, l, 1 + l, 2 + l));
    for (int p = 0; p < proc_; ++p)
      for (int l = 0; l < n_levels; ++l)
        blocks_.push_back(make_block("blk.p" + std::to_string(p) + "l" + std::to_string(l),
                                     EdgeSet::intra, l, 1 + l, 1 + l));
    for (int l = n_levels - 2; l >= 0; --l)
      blocks_.push_back(
          make_block("blk.down" + std::to_string(l), EdgeSet::down, l, 2 + l, 1 + l));
    blocks_.push_back(make_block("blk.m2g", EdgeSet::m2g, 0, 1, 0));
    dec1_ = make_linear("dec.l1", width_, width_);
    dec2_ = make_linear("dec.l2", width_, 1);

    params_.assign(n_params_, 0.0);
    init_params(seed);
  }

  const char* kind() const noexcept override { return "graph"; }

  std::vector<double> increment(const StepInputD& in) const override {
    FwdCache cache;
    forward_impl(in, cache);
    const VarStats& s = in.stats->of(Var::sst);
    const double diff_std = s.diff_std();
    const double diff_mean = s.diff_mean;
    std::vector<double> inc(grid_->n_cells(), 0.0);
    for (std::size_t s_i = 0; s_i < sea_.size(); ++s_i)
      inc[sea_[s_i]] = cache.y[s_i] * diff_std + diff_mean;
    return inc;
  }

  void backward(const StepInputD& in, const std::vector<double>& d_out,
                std::vector<double>& d_params, std::vector<double>* d_prev1,
                std::vector<double>* d_prev2) const override {
    FwdCache cache;
    forward_impl(in, cache);
    const VarStats& s_sst = in.stats->of(Var::sst);
    const double diff_std = s_sst.diff_std();
    const double inv_state = 1.0 / s_sst.state_std();
    const int W = width_;
    double* dp = d_params.data();

    // Readout.
    const std::size_t n_sea = sea_.size();
    std::vector<double> d_grid(n_sea * static_cast<std::size_t>(W), 0.0);
    std::vector<double> a(static_cast<std::size_t>(W)), dh(static_cast<std::size_t>(W)),
        dpre(static_cast<std::size_t>(W));
    for (std::size_t s = 0; s < n_sea; ++s) {
      const double dy = d_out[sea_[s]] * diff_std;
      if (d_prev1) (*d_prev1)[sea_[s]] += d_out[sea_[s]];
      const double* h1 = cache.dec_h1.data() + s * static_cast<std::size_t>(W);
      for (int k = 0; k < W; ++k) a[static_cast<std::size_t>(k)] = swish(h1[k]);
      std::fill(dh.begin(), dh.end(), 0.0);
      linear_bwd(dec2_, a.data(), &dy, dp, dh.data());
      for (int k = 0; k < W; ++k)
        dpre[static_cast<std::size_t>(k)] = dh[static_cast<std::size_t>(k)] * swish_grad(h1[k]);
      linear_bwd(dec1_, cache.grid_final.data() + s * static_cast<std::size_t>(W),
                 dpre.data(), dp, d_grid.data() + s * static_cast<std::size_t>(W));
    }

    // Stages in reverse; d_arrays[0] = grid latents, d_arrays[1 + l] = level l.
    std::vector<std::vector<double>> d_arrays(1 + mesh_->levels.size());
    d_arrays[0] = std::move(d_grid);
    for (std::size_t l = 0; l < mesh_->levels.size(); ++l)
      d_arrays[1 + l].assign(
          static_cast<std::size_t>(mesh_->levels[l].n_nodes()) * static_cast<std::size_t>(W),
          0.0);
    for (auto it = cache.stages.rbegin(); it != cache.stages.rend(); ++it) {
      const StageRec& rec = *it;
      std::vector<double> d_b_out = std::move(d_arrays[static_cast<std::size_t>(rec.b_idx)]);
      std::vector<double> dA(rec.cache.a_in.size(), 0.0);
      std::vector<double> dB(rec.cache.b_in.size(), 0.0);
      block_bwd(*rec.blk, *rec.edges, rec.cache, d_b_out, dp, dA, dB);
      d_arrays[static_cast<std::size_t>(rec.b_idx)] = std::move(dB);
      std::vector<double>& acc = d_arrays[static_cast<std::size_t>(rec.a_idx)];
      for (std::size_t i = 0; i < dA.size(); ++i) acc[i] += dA[i];
    }

    // Mesh embeddings (no input gradient needed).
    for (std::size_t l = 0; l < mesh_->levels.size(); ++l)
      encoder_bwd(menc1_[l], menc2_[l], menc_ln_[l], node_feats_[l], 4, cache.menc[l],
                  d_arrays[1 + l], dp);

    // Grid encoder; channels 0 and 1 carry the state gradients.
    std::vector<double> x(static_cast<std::size_t>(kInputChannels));
    const std::size_t n = grid_->n_cells();
    std::vector<double> dxin(static_cast<std::size_t>(kInputChannels));
    for (std::size_t s = 0; s < n_sea; ++s) {
      const std::size_t cell = sea_[s];
      for (int k = 0; k < kInputChannels; ++k)
        x[static_cast<std::size_t>(k)] = cache.channels[static_cast<std::size_t>(k) * n + cell];
      std::fill(dxin.begin(), dxin.end(), 0.0);
      node_bwd(genc1_, genc2_, genc_ln_, x.data(), cache.genc, s,
               d_arrays[0].data() + s * static_cast<std::size_t>(W), dp, dxin.data());
      if (d_prev2) (*d_prev2)[cell] += dxin[0] * inv_state;
      if (d_prev1) (*d_prev1)[cell] += dxin[1] * inv_state;
    }
  }

  std::size_t n_params() const noexcept override { return params_.size(); }
  double* param_data() noexcept override { return params_.data(); }
  const double* param_data() const noexcept override { return params_.data(); }

  TensorStore to_tensors() const override {
    TensorStore ts;
    ts.add("meta.kind", {1}).v[0] = 2.0;
    ts.add("meta.width", {1}).v[0] = width_;
    ts.add("meta.proc", {1}).v[0] = proc_;
    Tensor& lv = ts.add("meta.levels", {static_cast<int>(mesh_->levels.size())});
    for (std::size_t l = 0; l < mesh_->levels.size(); ++l)
      lv.v[l] = mesh_->levels[l].res;
    for (const LayoutEntry& e : layout_) {
      Tensor& t = ts.add(e.name, e.dims);
      std::copy_n(params_.begin() + static_cast<std::ptrdiff_t>(e.offset), e.size,
                  t.v.begin());
    }
    return ts;
  }

  std::unique_ptr<Stepper> clone() const override {
    return std::make_unique<GraphStepper>(*this);
  }

  void load_tensors(const TensorStore& ts) {
    for (const LayoutEntry& e : layout_) {
      const Tensor* t = ts.find(e.name);
      if (!t || t->v.size() != e.size)
        fail(Errc::shape_mismatch, "model: missing or misshapen tensor " + e.name);
      std::copy(t->v.begin(), t->v.end(),
                params_.begin() + static_cast<std::ptrdiff_t>(e.offset));
    }
  }

 private:
  std::size_t alloc(std::string name, std::vector<int> dims) {
    std::size_t sz = 1;
    for (const int d : dims) sz *= static_cast<std::size_t>(d);
    const std::size_t off = n_params_;
    layout_.push_back({std::move(name), std::move(dims), off, sz});
    n_params_ += sz;
    return off;
  }

  Linear make_linear(const std::string& prefix, int in, int out) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = alloc(prefix + ".w", {out, in});
    l.b = alloc(prefix + ".b", {out});
    return l;
  }

  LayerNorm make_ln(const std::string& prefix) {
    LayerNorm ln;
    ln.width = width_;
    ln.gamma = alloc(prefix + ".g", {width_});
    ln.beta = alloc(prefix + ".b", {width_});
    return ln;
  }

  BlockSpec make_block(const std::string& prefix, EdgeSet set, int level, int a_idx,
                       int b_idx) {
    BlockSpec bs;
    bs.blk.e1 = make_linear(prefix + ".e1", 2 * width_, width_);
    bs.blk.e2 = make_linear(prefix + ".e2", width_, width_);
    bs.blk.n1 = make_linear(prefix + ".n1", 2 * width_, width_);
    bs.blk.n2 = make_linear(prefix + ".n2", width_, width_);
    bs.blk.ln = make_ln(prefix + ".ln");
    bs.set = set;
    bs.level = level;
    bs.a_idx = a_idx;
    bs.b_idx = b_idx;
    return bs;
  }

  // He-style init for weights, zeros for biases, identity layer norms; the
  // readout output layer starts at zero so a fresh model predicts diff_mean.
  void init_params(std::uint64_t seed) {
    Rng rng(seed);
    for (const LayoutEntry& e : layout_) {
      const bool is_w = e.name.size() > 2 && e.name.ends_with(".w");
      const bool is_ln_gamma = e.name.ends_with(".ln.g");
      if (is_w && e.name != "dec.l2.w") {
        const double sigma = std::sqrt(2.0 / e.dims.back());
        for (std::size_t i = 0; i < e.size; ++i)
          params_[e.offset + i] = rng.normal(0.0, sigma);
      } else if (is_ln_gamma) {
        for (std::size_t i = 0; i < e.size; ++i) params_[e.offset + i] = 1.0;
      }
    }
  }

  const std::vector<Edge>& edges_of(EdgeSet set, int level) const {
    switch (set) {
      case EdgeSet::g2m:
        return g2m_;
      case EdgeSet::m2g:
        return m2g_;
      case EdgeSet::up:
        return mesh_->up_edges[static_cast<std::size_t>(level)];
      case EdgeSet::down:
        return mesh_->down_edges[static_cast<std::size_t>(level)];
      case EdgeSet::intra:
        return mesh_->levels[static_cast<std::size_t>(level)].intra;
    }
    fail(Errc::invalid_argument, "graph stepper: bad edge set");
  }

  void linear_fwd(const Linear& l, const double* x, double* y) const {
    const double* w = params_.data() + l.w;
    const double* b = params_.data() + l.b;
    for (int o = 0; o < l.out; ++o) {
      double acc = b[o];
      const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
      for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  }

  void linear_bwd(const Linear& l, const double* x, const double* dy, double* dp,
                  double* dx) const {
    const double* w = params_.data() + l.w;
    double* dw = dp + l.w;
    double* db = dp + l.b;
    for (int o = 0; o < l.out; ++o) {
      const double g = dy[o];
      db[o] += g;
      const std::size_t base = static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
      for (int i = 0; i < l.in; ++i) {
        dw[base + static_cast<std::size_t>(i)] += g * x[i];
        if (dx) dx[i] += w[base + static_cast<std::size_t>(i)] * g;
      }
    }
  }

  void ln_fwd(const LayerNorm& ln, const double* x, double* y, double* xhat,
              double* inv_std) const {
    const int W = ln.width;
    const double* g = params_.data() + ln.gamma;
    const double* b = params_.data() + ln.beta;
    double mu = 0.0;
    for (int k = 0; k < W; ++k) mu += x[k];
    mu /= W;
    double var = 0.0;
    for (int k = 0; k < W; ++k) {
      const double d = x[k] - mu;
      var += d * d;
    }
    var /= W;
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    for (int k = 0; k < W; ++k) {
      const double xh = (x[k] - mu) * inv;
      xhat[k] = xh;
      y[k] = g[k] * xh + b[k];
    }
    *inv_std = inv;
  }

  void ln_bwd(const LayerNorm& ln, const double* xhat, double inv_std, const double* dy,
              double* dp, double* dx) const {
    const int W = ln.width;
    const double* g = params_.data() + ln.gamma;
    double* dg = dp + ln.gamma;
    double* db = dp + ln.beta;
    double m1 = 0.0, m2 = 0.0;
    for (int k = 0; k < W; ++k) {
      dg[k] += dy[k] * xhat[k];
      db[k] += dy[k];
      const double dxh = dy[k] * g[k];
      m1 += dxh;
      m2 += dxh * xhat[k];
    }
    m1 /= W;
    m2 /= W;
    for (int k = 0; k < W; ++k)
      dx[k] += inv_std * (dy[k] * g[k] - m1 - xhat[k] * m2);
  }

  // x -> LN(l2(swish(l1(x)))) for one node, caching into slot `s`.
  void node_fwd(const Linear& l1, const Linear& l2, const LayerNorm& ln, const double* x,
                EncoderCache& c, std::size_t s, double* out) const {
    const int W = width_;
    double* h1 = c.h1.data() + s * static_cast<std::size_t>(W);
    linear_fwd(l1, x, h1);
    std::vector<double> a(static_cast<std::size_t>(W)), z(static_cast<std::size_t>(W));
    for (int k = 0; k < W; ++k) a[static_cast<std::size_t>(k)] = swish(h1[k]);
    linear_fwd(l2, a.data(), z.data());
    ln_fwd(ln, z.data(), out, c.xhat.data() + s * static_cast<std::size_t>(W),
           &c.inv_std[s]);
  }

  void node_bwd(const Linear& l1, const Linear& l2, const LayerNorm& ln, const double* x,
                const EncoderCache& c, std::size_t s, const double* d_out, double* dp,
                double* dx) const {
    const int W = width_;
    const double* h1 = c.h1.data() + s * static_cast<std::size_t>(W);
    std::vector<double> a(static_cast<std::size_t>(W)), dz(static_cast<std::size_t>(W), 0.0),
        da(static_cast<std::size_t>(W), 0.0), dpre(static_cast<std::size_t>(W));
    for (int k = 0; k < W; ++k) a[static_cast<std::size_t>(k)] = swish(h1[k]);
    ln_bwd(ln, c.xhat.data() + s * static_cast<std::size_t>(W), c.inv_std[s], d_out, dp,
           dz.data());
    linear_bwd(l2, a.data(), dz.data(), dp, da.data());
    for (int k = 0; k < W; ++k)
      dpre[static_cast<std::size_t>(k)] = da[static_cast<std::size_t>(k)] * swish_grad(h1[k]);
    linear_bwd(l1, x, dpre.data(), dp, dx);
  }

  void encoder_bwd(const Linear& l1, const Linear& l2, const LayerNorm& ln,
                   const std::vector<double>& feats, int n_feat, const EncoderCache& c,
                   const std::vector<double>& d_out, double* dp) const {
    const int W = width_;
    const std::size_t n_nodes = c.inv_std.size();
    for (std::size_t v = 0; v < n_nodes; ++v)
      node_bwd(l1, l2, ln, feats.data() + v * static_cast<std::size_t>(n_feat), c, v,
               d_out.data() + v * static_cast<std::size_t>(W), dp, nullptr);
  }

  std::vector<double> block_fwd(const Block& blk, const std::vector<Edge>& edges,
                                const std::vector<double>& A, const std::vector<double>& B,
                                BlockCache& c) const {
    const int W = width_;
    const std::size_t n_dst = B.size() / static_cast<std::size_t>(W);
    c.a_in = A;
    c.b_in = B;
    c.e1_pre.resize(edges.size() * static_cast<std::size_t>(W));
    c.agg.assign(B.size(), 0.0);

    std::vector<double> z(2 * static_cast<std::size_t>(W)), h(static_cast<std::size_t>(W)),
        m(static_cast<std::size_t>(W));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double* src = A.data() + static_cast<std::size_t>(edges[e].src) * W;
      const double* dst = B.data() + static_cast<std::size_t>(edges[e].dst) * W;
      std::copy_n(src, W, z.begin());
      std::copy_n(dst, W, z.begin() + W);
      double* pre = c.e1_pre.data() + e * static_cast<std::size_t>(W);
      linear_fwd(blk.e1, z.data(), pre);
      for (int k = 0; k < W; ++k) h[static_cast<std::size_t>(k)] = swish(pre[k]);
      linear_fwd(blk.e2, h.data(), m.data());
      double* acc = c.agg.data() + static_cast<std::size_t>(edges[e].dst) * W;
      for (int k = 0; k < W; ++k) acc[k] += m[static_cast<std::size_t>(k)];
    }

    c.n1_pre.resize(B.size());
    c.xhat.resize(B.size());
    c.inv_std.resize(n_dst);
    std::vector<double> out(B.size());
    std::vector<double> u(2 * static_cast<std::size_t>(W)), q(static_cast<std::size_t>(W)),
        xln(static_cast<std::size_t>(W));
    for (std::size_t d = 0; d < n_dst; ++d) {
      const double* bd = B.data() + d * static_cast<std::size_t>(W);
      std::copy_n(bd, W, u.begin());
      std::copy_n(c.agg.data() + d * static_cast<std::size_t>(W), W, u.begin() + W);
      double* pre = c.n1_pre.data() + d * static_cast<std::size_t>(W);
      linear_fwd(blk.n1, u.data(), pre);
      for (int k = 0; k < W; ++k) h[static_cast<std::size_t>(k)] = swish(pre[k]);
      linear_fwd(blk.n2, h.data(), q.data());
      for (int k = 0; k < W; ++k)
        xln[static_cast<std::size_t>(k)] = bd[k] + q[static_cast<std::size_t>(k)];
      ln_fwd(blk.ln, xln.data(), out.data() + d * static_cast<std::size_t>(W),
             c.xhat.data() + d * static_cast<std::size_t>(W), &c.inv_std[d]);
    }
    return out;
  }

  void block_bwd(const Block& blk, const std::vector<Edge>& edges, const BlockCache& c,
                 const std::vector<double>& d_out, double* dp, std::vector<double>& dA,
                 std::vector<double>& dB) const {
    const int W = width_;
    const std::size_t n_dst = c.b_in.size() / static_cast<std::size_t>(W);
    std::vector<double> d_agg(c.b_in.size(), 0.0);

    std::vector<double> dx(static_cast<std::size_t>(W)), dq(static_cast<std::size_t>(W)),
        h(static_cast<std::size_t>(W)), dh(static_cast<std::size_t>(W)),
        dpre(static_cast<std::size_t>(W)), u(2 * static_cast<std::size_t>(W)),
        du(2 * static_cast<std::size_t>(W));
    for (std::size_t d = 0; d < n_dst; ++d) {
      std::fill(dx.begin(), dx.end(), 0.0);
      ln_bwd(blk.ln, c.xhat.data() + d * static_cast<std::size_t>(W), c.inv_std[d],
             d_out.data() + d * static_cast<std::size_t>(W), dp, dx.data());
      double* dbd = dB.data() + d * static_cast<std::size_t>(W);
      for (int k = 0; k < W; ++k) dbd[k] += dx[static_cast<std::size_t>(k)];

      const double* pre = c.n1_pre.data() + d * static_cast<std::size_t>(W);
      for (int k = 0; k < W; ++k) h[static_cast<std::size_t>(k)] = swish(pre[k]);
      std::fill(dh.begin(), dh.end(), 0.0);
      linear_bwd(blk.n2, h.data(), dx.data(), dp, dh.data());
      for (int k = 0; k < W; ++k)
        dpre[static_cast<std::size_t>(k)] = dh[static_cast<std::size_t>(k)] * swish_grad(pre[k]);
      std::copy_n(c.b_in.data() + d * static_cast<std::size_t>(W), W, u.begin());
      std::copy_n(c.agg.data() + d * static_cast<std::size_t>(W), W, u.begin() + W);
      std::fill(du.begin(), du.end(), 0.0);
      linear_bwd(blk.n1, u.data(), dpre.data(), dp, du.data());
      for (int k = 0; k < W; ++k) {
        dbd[k] += du[static_cast<std::size_t>(k)];
        d_agg[d * static_cast<std::size_t>(W) + static_cast<std::size_t>(k)] +=
            du[static_cast<std::size_t>(W + k)];
      }
    }

    std::vector<double> z(2 * static_cast<std::size_t>(W)),
        dz(2 * static_cast<std::size_t>(W));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double* dm =
          d_agg.data() + static_cast<std::size_t>(edges[e].dst) * static_cast<std::size_t>(W);
      const double* pre = c.e1_pre.data() + e * static_cast<std::size_t>(W);
      for (int k = 0; k < W; ++k) h[static_cast<std::size_t>(k)] = swish(pre[k]);
      std::fill(dh.begin(), dh.end(), 0.0);
      linear_bwd(blk.e2, h.data(), dm, dp, dh.data());
      for (int k = 0; k < W; ++k)
        dpre[static_cast<std::size_t>(k)] = dh[static_cast<std::size_t>(k)] * swish_grad(pre[k]);
      std::copy_n(c.a_in.data() + static_cast<std::size_t>(edges[e].src) * W, W, z.begin());
      std::copy_n(c.b_in.data() + static_cast<std::size_t>(edges[e].dst) * W, W,
                  z.begin() + W);
      std::fill(dz.begin(), dz.end(), 0.0);
      linear_bwd(blk.e1, z.data(), dpre.data(), dp, dz.data());
      double* das = dA.data() + static_cast<std::size_t>(edges[e].src) * W;
      double* dbs = dB.data() + static_cast<std::size_t>(edges[e].dst) * W;
      for (int k = 0; k < W; ++k) {
        das[k] += dz[static_cast<std::size_t>(k)];
        dbs[k] += dz[static_cast<std::size_t>(W + k)];
      }
    }
  }

  void forward_impl(const StepInputD& in, FwdCache& cache) const {
    if (!in.grid || !in.grid->same_as(*grid_))
      fail(Errc::grid_mismatch, "graph stepper: input grid differs from build grid");
    const int W = width_;
    const std::size_t n = grid_->n_cells();
    const std::size_t n_sea = sea_.size();
    cache.channels = build_input_channels(in);

    cache.genc.h1.resize(n_sea * static_cast<std::size_t>(W));
    cache.genc.xhat.resize(n_sea * static_cast<std::size_t>(W));
    cache.genc.inv_std.resize(n_sea);
    cache.grid0.resize(n_sea * static_cast<std::size_t>(W));
    std::vector<double> x(static_cast<std::size_t>(kInputChannels));
    for (std::size_t s = 0; s < n_sea; ++s) {
      const std::size_t cell = sea_[s];
      for (int k = 0; k < kInputChannels; ++k)
        x[static_cast<std::size_t>(k)] = cache.channels[static_cast<std::size_t>(k) * n + cell];
      node_fwd(genc1_, genc2_, genc_ln_, x.data(), cache.genc, s,
               cache.grid0.data() + s * static_cast<std::size_t>(W));
    }

    const std::size_t n_levels = mesh_->levels.size();
    cache.menc.resize(n_levels);
    cache.mesh0.resize(n_levels);
    for (std::size_t l = 0; l < n_levels; ++l) {
      const std::size_t nn = static_cast<std::size_t>(mesh_->levels[l].n_nodes());
      cache.menc[l].h1.resize(nn * static_cast<std::size_t>(W));
      cache.menc[l].xhat.resize(nn * static_cast<std::size_t>(W));
      cache.menc[l].inv_std.resize(nn);
      cache.mesh0[l].resize(nn * static_cast<std::size_t>(W));
      for (std::size_t v = 0; v < nn; ++v)
        node_fwd(menc1_[l], menc2_[l], menc_ln_[l], node_feats_[l].data() + v * 4,
                 cache.menc[l], v, cache.mesh0[l].data() + v * static_cast<std::size_t>(W));
    }

    std::vector<std::vector<double>> arrays(1 + n_levels);
    arrays[0] = cache.grid0;
    for (std::size_t l = 0; l < n_levels; ++l) arrays[1 + l] = cache.mesh0[l];
    cache.stages.reserve(blocks_.size());
    for (const BlockSpec& bs : blocks_) {
      StageRec rec;
      rec.blk = &bs.blk;
      rec.edges = &edges_of(bs.set, bs.level);
      rec.a_idx = bs.a_idx;
      rec.b_idx = bs.b_idx;
      std::vector<double> out =
          block_fwd(bs.blk, *rec.edges, arrays[static_cast<std::size_t>(bs.a_idx)],
                    arrays[static_cast<std::size_t>(bs.b_idx)], rec.cache);
      arrays[static_cast<std::size_t>(bs.b_idx)] = std::move(out);
      cache.stages.push_back(std::move(rec));
    }
    cache.grid_final = std::move(arrays[0]);

    cache.dec_h1.resize(n_sea * static_cast<std::size_t>(W));
    cache.y.resize(n_sea);
    std::vector<double> a(static_cast<std::size_t>(W));
    for (std::size_t s = 0; s < n_sea; ++s) {
      double* h1 = cache.dec_h1.data() + s * static_cast<std::size_t>(W);
      linear_fwd(dec1_, cache.grid_final.data() + s * static_cast<std::size_t>(W), h1);
      for (int k = 0; k < W; ++k) a[static_cast<std::size_t>(k)] = swish(h1[k]);
      double y = 0.0;
      linear_fwd(dec2_, a.data(), &y);
      cache.y[s] = y;
    }
  }

  GridPtr grid_;
  std::shared_ptr<const HierMesh> mesh_;
  int width_ = 0;
  int proc_ = 0;
  std::vector<std::size_t> sea_;
  std::vector<int> cell_to_sea_;
  std::vector<Edge> g2m_, m2g_;
  std::vector<std::vector<double>> node_feats_;  // per level, 4 per node

  std::vector<LayoutEntry> layout_;
  std::size_t n_params_ = 0;
  std::vector<double> params_;

  Linear genc1_, genc2_;
  LayerNorm genc_ln_;
  std::vector<Linear> menc1_, menc2_;
  std::vector<LayerNorm> menc_ln_;
  std::vector<BlockSpec> blocks_;
  Linear dec1_, dec2_;
};

}  // namespace

std::unique_ptr<Stepper> make_graph_stepper(GridPtr grid, std::shared_ptr<const HierMesh> mesh,
                                            int width, int proc_layers, std::uint64_t seed) {
  return std::make_unique<GraphStepper>(std::move(grid), std::move(mesh), width, proc_layers,
                                        seed);
}

namespace detail {

std::unique_ptr<Stepper> graph_from_tensors(const TensorStore& ts, GridPtr grid) {
  const Tensor& w = ts.at("meta.width");
  const Tensor& p = ts.at("meta.proc");
  const Tensor& lv = ts.at("meta.levels");
  std::vector<int> levels(lv.v.size());
  for (std::size_t i = 0; i < lv.v.size(); ++i) levels[i] = static_cast<int>(lv.v[i]);
  auto mesh = std::make_shared<HierMesh>(build_hier_mesh(*grid, levels));
  auto stepper = std::make_unique<GraphStepper>(grid, std::move(mesh),
                                                static_cast<int>(w.v.at(0)),
                                                static_cast<int>(p.v.at(0)), 0);
  stepper->load_tensors(ts);
  return stepper;
}

}  // namespace detail

}  // namespace ecast
