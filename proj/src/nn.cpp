#include "mmfusion/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmfusion/error.hpp"
#include "mmfusion/random.hpp"

namespace mmf::nn {

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::MLP: return "mlp";
    case Architecture::CNN: return "cnn";
    case Architecture::BiLSTM: return "bilstm";
    case Architecture::CNN_BiLSTM: return "cnn_bilstm";
  }
  return "mlp";
}

std::string_view to_string(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }

std::string_view to_string(HeadKind h) {
  switch (h) {
    case HeadKind::BinaryLogits: return "binary";
    case HeadKind::MulticlassLogits: return "multiclass";
    case HeadKind::Regression: return "regression";
  }
  return "binary";
}

Architecture parse_architecture(std::string_view s) {
  for (auto a : {Architecture::MLP, Architecture::CNN, Architecture::BiLSTM, Architecture::CNN_BiLSTM})
    if (s == to_string(a)) return a;
  throw ValidationError("unknown architecture '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
  for (auto a : {Activation::ReLU, Activation::Tanh})
    if (s == to_string(a)) return a;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

HeadKind parse_head_kind(std::string_view s) {
  for (auto h : {HeadKind::BinaryLogits, HeadKind::MulticlassLogits, HeadKind::Regression})
    if (s == to_string(h)) return h;
  throw ValidationError("unknown head kind '" + std::string(s) + "'");
}

std::size_t Head::outputs() const noexcept {
  switch (kind) {
    case HeadKind::BinaryLogits: return 2;
    case HeadKind::MulticlassLogits: return classes;
    case HeadKind::Regression: return 1;
  }
  return 1;
}

void validate_spec(const ModelSpec& spec) {
  if (spec.input_dim == 0) throw ValidationError("model spec: input_dim must be >= 1");
  for (auto w : spec.hidden)
    if (w == 0) throw ValidationError("model spec: hidden widths must be >= 1");
  if (spec.architecture == Architecture::CNN || spec.architecture == Architecture::CNN_BiLSTM) {
    if (spec.kernel_size == 0 || spec.n_filters == 0)
      throw ValidationError("model spec: kernel_size and n_filters must be >= 1");
  }
  if (spec.architecture == Architecture::BiLSTM || spec.architecture == Architecture::CNN_BiLSTM) {
    if (spec.lstm_hidden == 0) throw ValidationError("model spec: lstm_hidden must be >= 1");
  }
  if (spec.head.kind == HeadKind::MulticlassLogits && spec.head.classes < 2)
    throw ValidationError("model spec: multiclass head needs >= 2 classes");
}

std::size_t penultimate_dim(const ModelSpec& spec) {
  switch (spec.architecture) {
    case Architecture::MLP: return spec.hidden.empty() ? spec.input_dim : spec.hidden.back();
    case Architecture::CNN: return spec.n_filters;
    case Architecture::BiLSTM:
    case Architecture::CNN_BiLSTM: return 2 * spec.lstm_hidden;
  }
  return 0;
}

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
    throw ValidationError("train config: learning_rate must be finite and >= 0");
  if (c.batch_size == 0) throw ValidationError("train config: batch_size must be >= 1");
  if (c.optimizer == Optimizer::Adam &&
      !(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1 && c.epsilon > 0))
    throw ValidationError("train config: invalid Adam parameters");
}

std::uint64_t parameter_checksum(const ParamSet& params) {
  std::uint64_t h = fnv1a64(std::string_view("params"));
  for (const auto& [name, t] : params) {
    h = fnv1a64(name, h);
    h = fnv1a64(t.values, h);
  }
  return h;
}

int predicted_class(std::span<const double> output) {
  if (output.empty()) throw ShapeError("predicted_class: empty output");
  return static_cast<int>(std::max_element(output.begin(), output.end()) - output.begin());
}

namespace {

double activate(Activation a, double x) {
  return a == Activation::ReLU ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

double activate_grad(Activation a, double pre, double out) {
  return a == Activation::ReLU ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const Tensor& param(const ParamSet& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ShapeError("missing parameter '" + name + "'");
  return it->second;
}

Tensor& grad(ParamSet& g, const std::string& name) {
  auto it = g.find(name);
  if (it == g.end()) throw ShapeError("missing gradient slot '" + name + "'");
  return it->second;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet z;
  for (const auto& [name, t] : p) z.emplace(name, Tensor{t.shape, std::vector<double>(t.values.size(), 0.0)});
  return z;
}

// ---- dense -----------------------------------------------------------------

struct DenseCache {
  std::vector<double> in, pre, out;
};

void dense_forward(const Tensor& W, const Tensor& b, std::span<const double> x, std::vector<double>& y,
                   const std::string& layer) {
  const std::size_t n_out = W.shape[0], n_in = W.shape[1];
  if (x.size() != n_in)
    throw ShapeError("layer '" + layer + "': expected input width " + std::to_string(n_in) + ", got " +
                     std::to_string(x.size()));
  y.assign(b.values.begin(), b.values.end());
  for (std::size_t o = 0; o < n_out; ++o) {
    const double* w = W.values.data() + o * n_in;
    double s = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) s += w[i] * x[i];
    y[o] += s;
  }
}

void dense_backward(const Tensor& W, std::span<const double> x, std::span<const double> dy, Tensor& dW,
                    Tensor& db, std::vector<double>* dx) {
  const std::size_t n_out = W.shape[0], n_in = W.shape[1];
  if (dx) dx->assign(n_in, 0.0);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double g = dy[o];
    db.values[o] += g;
    double* dw = dW.values.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) dw[i] += g * x[i];
    if (dx) {
      const double* w = W.values.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) (*dx)[i] += w[i] * g;
    }
  }
}

// ---- conv1d over time ------------------------------------------------------

struct ConvCache {
  Matrix input;  // zero-padded to at least kernel_size rows
  Matrix pre;
  Matrix out;
};

void conv_forward(const Tensor& W, const Tensor& b, const Matrix& x, Activation act, ConvCache& c) {
  const std::size_t F = W.shape[0], k = W.shape[1], D = W.shape[2];
  const std::size_t T = x.rows(), Tp = std::max(T, k), L = Tp - k + 1;
  c.input = Matrix(Tp, D);
  std::copy(x.data().begin(), x.data().end(), c.input.data().begin());
  c.pre = Matrix(L, F);
  c.out = Matrix(L, F);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double s = b.values[f];
      const double* w = W.values.data() + f * k * D;
      const double* in = c.input.data().data() + t * D;
      for (std::size_t j = 0; j < k * D; ++j) s += w[j] * in[j];
      c.pre(t, f) = s;
      c.out(t, f) = activate(act, s);
    }
  }
}

void conv_backward(const Tensor& W, const ConvCache& c, const Matrix& d_out, Activation act, Tensor& dW,
                   Tensor& db) {
  const std::size_t F = W.shape[0], k = W.shape[1], D = W.shape[2];
  const std::size_t L = c.pre.rows();
  for (std::size_t t = 0; t < L; ++t) {
    const double* in = c.input.data().data() + t * D;
    for (std::size_t f = 0; f < F; ++f) {
      const double g = d_out(t, f) * activate_grad(act, c.pre(t, f), c.out(t, f));
      if (g == 0.0) continue;
      db.values[f] += g;
      double* dw = dW.values.data() + f * k * D;
      for (std::size_t j = 0; j < k * D; ++j) dw[j] += g * in[j];
    }
  }
}

// ---- LSTM (gate order i, f, g, o) ------------------------------------------

struct LstmCache {
  bool reverse = false;
  Matrix x;     // inputs in processing order
  Matrix h, c;  // T+1 rows, row 0 is the zero initial state
  Matrix gi, gf, gg, go;
};

void lstm_forward(const Tensor& Wx, const Tensor& Wh, const Tensor& b, const Matrix& x, bool reverse,
                  LstmCache& cache, const std::string& layer) {
  const std::size_t H = Wh.shape[1], D = Wx.shape[1], T = x.rows();
  if (x.cols() != D)
    throw ShapeError("layer '" + layer + "': expected input width " + std::to_string(D) + ", got " +
                     std::to_string(x.cols()));
  cache.reverse = reverse;
  cache.x = Matrix(T, D);
  cache.h = Matrix(T + 1, H);
  cache.c = Matrix(T + 1, H);
  cache.gi = Matrix(T, H);
  cache.gf = Matrix(T, H);
  cache.gg = Matrix(T, H);
  cache.go = Matrix(T, H);
  std::vector<double> z(4 * H);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    auto xs = cache.x.row(s);
    std::copy(x.row(t).begin(), x.row(t).end(), xs.begin());
    auto hp = cache.h.row(s);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double acc = b.values[r];
      const double* wx = Wx.values.data() + r * D;
      for (std::size_t d = 0; d < D; ++d) acc += wx[d] * xs[d];
      const double* wh = Wh.values.data() + r * H;
      for (std::size_t j = 0; j < H; ++j) acc += wh[j] * hp[j];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double i = sigmoid(z[j]);
      const double f = sigmoid(z[H + j]);
      const double g = std::tanh(z[2 * H + j]);
      const double o = sigmoid(z[3 * H + j]);
      cache.gi(s, j) = i;
      cache.gf(s, j) = f;
      cache.gg(s, j) = g;
      cache.go(s, j) = o;
      cache.c(s + 1, j) = f * cache.c(s, j) + i * g;
      cache.h(s + 1, j) = o * std::tanh(cache.c(s + 1, j));
    }
  }
}

// dx, when given, is accumulated in original (not processing) order.
void lstm_backward(const Tensor& Wx, const Tensor& Wh, const LstmCache& cache, std::span<const double> dh_final,
                   Tensor& dWx, Tensor& dWh, Tensor& db, Matrix* dx) {
  const std::size_t H = Wh.shape[1], D = Wx.shape[1], T = cache.x.rows();
  std::vector<double> dh(dh_final.begin(), dh_final.end()), dc(H, 0.0), dz(4 * H), dh_prev(H), dc_prev(H);
  for (std::size_t s = T; s-- > 0;) {
    for (std::size_t j = 0; j < H; ++j) {
      const double i = cache.gi(s, j), f = cache.gf(s, j), g = cache.gg(s, j), o = cache.go(s, j);
      const double tc = std::tanh(cache.c(s + 1, j));
      const double d_o = dh[j] * tc;
      const double dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
      dz[j] = dcj * g * i * (1.0 - i);
      dz[H + j] = dcj * cache.c(s, j) * f * (1.0 - f);
      dz[2 * H + j] = dcj * i * (1.0 - g * g);
      dz[3 * H + j] = d_o * o * (1.0 - o);
      dc_prev[j] = dcj * f;
    }
    auto xs = cache.x.row(s);
    auto hp = cache.h.row(s);
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    const std::size_t t = cache.reverse ? T - 1 - s : s;
    for (std::size_t r = 0; r < 4 * H; ++r) {
      const double g = dz[r];
      db.values[r] += g;
      double* dwx = dWx.values.data() + r * D;
      const double* wx = Wx.values.data() + r * D;
      for (std::size_t d = 0; d < D; ++d) dwx[d] += g * xs[d];
      double* dwh = dWh.values.data() + r * H;
      const double* wh = Wh.values.data() + r * H;
      for (std::size_t j = 0; j < H; ++j) {
        dwh[j] += g * hp[j];
        dh_prev[j] += wh[j] * g;
      }
      if (dx) {
        auto row = dx->row(t);
        for (std::size_t d = 0; d < D; ++d) row[d] += wx[d] * g;
      }
    }
    dh.swap(dh_prev);
    dc.swap(dc_prev);
  }
}

// ---- trunks ----------------------------------------------------------------

struct TrunkCache {
  std::vector<DenseCache> dense;
  ConvCache conv;
  std::vector<std::size_t> argmax;
  LstmCache fwd, bwd;
  std::vector<double> pen;
};

struct Branch {
  const ModelSpec* spec;
  std::string prefix;
};

struct Network {
  std::vector<Branch> branches;
  Head head;
};

std::vector<double> final_state(const LstmCache& c) {
  auto r = c.h.row(c.h.rows() - 1);
  return {r.begin(), r.end()};
}

void trunk_forward(const Branch& br, const ParamSet& p, const Matrix& x, TrunkCache& c) {
  const ModelSpec& s = *br.spec;
  const std::string& pre = br.prefix;
  if (x.rows() == 0) throw ShapeError("layer '" + pre + "input': empty sequence");
  if (x.cols() != s.input_dim)
    throw ShapeError("layer '" + pre + "input': expected width " + std::to_string(s.input_dim) + ", got " +
                     std::to_string(x.cols()));

  auto run_bilstm = [&](const Matrix& seq) {
    lstm_forward(param(p, pre + "lstm_fwd.Wx"), param(p, pre + "lstm_fwd.Wh"), param(p, pre + "lstm_fwd.b"), seq,
                 false, c.fwd, pre + "lstm_fwd");
    lstm_forward(param(p, pre + "lstm_bwd.Wx"), param(p, pre + "lstm_bwd.Wh"), param(p, pre + "lstm_bwd.b"), seq,
                 true, c.bwd, pre + "lstm_bwd");
    c.pen = final_state(c.fwd);
    const auto hb = final_state(c.bwd);
    c.pen.insert(c.pen.end(), hb.begin(), hb.end());
  };

  switch (s.architecture) {
    case Architecture::MLP: {
      if (x.rows() != 1)
        throw ShapeError("layer '" + pre + "input': MLP expects a single row, got " + std::to_string(x.rows()));
      std::vector<double> cur(x.row(0).begin(), x.row(0).end());
      c.dense.resize(s.hidden.size());
      for (std::size_t l = 0; l < s.hidden.size(); ++l) {
        const std::string name = pre + "dense" + std::to_string(l);
        auto& dc = c.dense[l];
        dc.in = cur;
        dense_forward(param(p, name + ".W"), param(p, name + ".b"), cur, dc.pre, name);
        dc.out.resize(dc.pre.size());
        for (std::size_t i = 0; i < dc.pre.size(); ++i) dc.out[i] = activate(s.activation, dc.pre[i]);
        cur = dc.out;
      }
      c.pen = std::move(cur);
      break;
    }
    case Architecture::CNN: {
      conv_forward(param(p, pre + "conv.W"), param(p, pre + "conv.b"), x, s.activation, c.conv);
      const std::size_t F = s.n_filters, L = c.conv.out.rows();
      c.pen.assign(F, 0.0);
      c.argmax.assign(F, 0);
      for (std::size_t f = 0; f < F; ++f) {
        double best = c.conv.out(0, f);
        for (std::size_t t = 1; t < L; ++t)
          if (c.conv.out(t, f) > best) {
            best = c.conv.out(t, f);
            c.argmax[f] = t;
          }
        c.pen[f] = best;
      }
      break;
    }
    case Architecture::BiLSTM:
      run_bilstm(x);
      break;
    case Architecture::CNN_BiLSTM:
      conv_forward(param(p, pre + "conv.W"), param(p, pre + "conv.b"), x, s.activation, c.conv);
      run_bilstm(c.conv.out);
      break;
  }
}

void trunk_backward(const Branch& br, const ParamSet& p, const TrunkCache& c, std::span<const double> dpen,
                    ParamSet& g) {
  const ModelSpec& s = *br.spec;
  const std::string& pre = br.prefix;
  const std::size_t H = s.lstm_hidden;

  auto bilstm_back = [&](Matrix* dx) {
    lstm_backward(param(p, pre + "lstm_fwd.Wx"), param(p, pre + "lstm_fwd.Wh"), c.fwd, dpen.subspan(0, H),
                  grad(g, pre + "lstm_fwd.Wx"), grad(g, pre + "lstm_fwd.Wh"), grad(g, pre + "lstm_fwd.b"), dx);
    lstm_backward(param(p, pre + "lstm_bwd.Wx"), param(p, pre + "lstm_bwd.Wh"), c.bwd, dpen.subspan(H, H),
                  grad(g, pre + "lstm_bwd.Wx"), grad(g, pre + "lstm_bwd.Wh"), grad(g, pre + "lstm_bwd.b"), dx);
  };

  switch (s.architecture) {
    case Architecture::MLP: {
      std::vector<double> d(dpen.begin(), dpen.end()), dx;
      for (std::size_t l = s.hidden.size(); l-- > 0;) {
        const std::string name = pre + "dense" + std::to_string(l);
        const auto& dc = c.dense[l];
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= activate_grad(s.activation, dc.pre[i], dc.out[i]);
        dense_backward(param(p, name + ".W"), dc.in, d, grad(g, name + ".W"), grad(g, name + ".b"),
                       l > 0 ? &dx : nullptr);
        d.swap(dx);
      }
      break;
    }
    case Architecture::CNN: {
      Matrix d_out(c.conv.out.rows(), s.n_filters);
      for (std::size_t f = 0; f < s.n_filters; ++f) d_out(c.argmax[f], f) = dpen[f];
      conv_backward(param(p, pre + "conv.W"), c.conv, d_out, s.activation, grad(g, pre + "conv.W"),
                    grad(g, pre + "conv.b"));
      break;
    }
    case Architecture::BiLSTM:
      bilstm_back(nullptr);
      break;
    case Architecture::CNN_BiLSTM: {
      Matrix d_conv(c.conv.out.rows(), s.n_filters);
      bilstm_back(&d_conv);
      conv_backward(param(p, pre + "conv.W"), c.conv, d_conv, s.activation, grad(g, pre + "conv.W"),
                    grad(g, pre + "conv.b"));
      break;
    }
  }
}

// ---- whole network ---------------------------------------------------------

Network single_network(const ModelSpec& spec) {
  return Network{{Branch{&spec, ""}}, spec.head};
}

Network joint_network(const JointSpec& spec) {
  Network n;
  for (std::size_t i = 0; i < spec.branches.size(); ++i)
    n.branches.push_back(Branch{&spec.branches[i], "branch" + std::to_string(i) + "."});
  n.head = spec.head;
  return n;
}

std::size_t total_penultimate(const Network& n) {
  std::size_t w = 0;
  for (const auto& b : n.branches) w += penultimate_dim(*b.spec);
  return w;
}

ParamSet init_params(const Network& net, std::uint64_t seed) {
  if (net.branches.empty()) throw ValidationError("network needs at least one branch");
  ParamSet params;
  std::map<std::string, double> limits;
  auto weight = [&](const std::string& name, std::vector<std::size_t> shape, double fan_in, double fan_out) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    params[name] = Tensor{std::move(shape), std::vector<double>(n, 0.0)};
    limits[name] = std::sqrt(6.0 / (fan_in + fan_out));
  };
  auto bias = [&](const std::string& name, std::size_t n) {
    params[name] = Tensor{{n}, std::vector<double>(n, 0.0)};
  };
  auto lstm = [&](const std::string& name, std::size_t D, std::size_t H) {
    weight(name + ".Wx", {4 * H, D}, double(D), double(4 * H));
    weight(name + ".Wh", {4 * H, H}, double(H), double(4 * H));
    bias(name + ".b", 4 * H);
  };

  for (const auto& br : net.branches) {
    const ModelSpec& s = *br.spec;
    validate_spec(s);
    const std::string& pre = br.prefix;
    switch (s.architecture) {
      case Architecture::MLP: {
        std::size_t in = s.input_dim;
        for (std::size_t l = 0; l < s.hidden.size(); ++l) {
          const std::string name = pre + "dense" + std::to_string(l);
          weight(name + ".W", {s.hidden[l], in}, double(in), double(s.hidden[l]));
          bias(name + ".b", s.hidden[l]);
          in = s.hidden[l];
        }
        break;
      }
      case Architecture::CNN:
      case Architecture::CNN_BiLSTM:
        weight(pre + "conv.W", {s.n_filters, s.kernel_size, s.input_dim}, double(s.kernel_size * s.input_dim),
               double(s.kernel_size * s.n_filters));
        bias(pre + "conv.b", s.n_filters);
        if (s.architecture == Architecture::CNN_BiLSTM) {
          lstm(pre + "lstm_fwd", s.n_filters, s.lstm_hidden);
          lstm(pre + "lstm_bwd", s.n_filters, s.lstm_hidden);
        }
        break;
      case Architecture::BiLSTM:
        lstm(pre + "lstm_fwd", s.input_dim, s.lstm_hidden);
        lstm(pre + "lstm_bwd", s.input_dim, s.lstm_hidden);
        break;
    }
  }
  if (net.head.kind == HeadKind::MulticlassLogits && net.head.classes < 2)
    throw ValidationError("multiclass head needs >= 2 classes");
  const std::size_t pen = total_penultimate(net), out = net.head.outputs();
  weight("head.W", {out, pen}, double(pen), double(out));
  bias("head.b", out);

  Rng rng(seed);
  for (auto& [name, t] : params) {
    auto it = limits.find(name);
    if (it == limits.end()) continue;
    for (auto& v : t.values) v = rng.uniform(-it->second, it->second);
  }
  return params;
}

struct NetPass {
  std::vector<TrunkCache> caches;
  ForwardResult result;
};

NetPass net_forward(const Network& net, const ParamSet& p, std::span<const Matrix* const> inputs) {
  if (inputs.size() != net.branches.size())
    throw ShapeError("network expects " + std::to_string(net.branches.size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  NetPass pass;
  pass.caches.resize(net.branches.size());
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    trunk_forward(net.branches[b], p, *inputs[b], pass.caches[b]);
    const auto& pen = pass.caches[b].pen;
    pass.result.penultimate.insert(pass.result.penultimate.end(), pen.begin(), pen.end());
  }
  dense_forward(param(p, "head.W"), param(p, "head.b"), pass.result.penultimate, pass.result.output, "head");
  return pass;
}

std::vector<double> loss_gradient(const Head& head, std::span<const double> output, double target) {
  std::vector<double> d(output.size());
  if (head.kind == HeadKind::Regression) {
    d[0] = 2.0 * (output[0] - target);
    return d;
  }
  const double m = *std::max_element(output.begin(), output.end());
  double z = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) z += std::exp(output[i] - m);
  for (std::size_t i = 0; i < output.size(); ++i) d[i] = std::exp(output[i] - m) / z;
  d[static_cast<std::size_t>(target)] -= 1.0;
  return d;
}

void net_backward(const Network& net, const ParamSet& p, const NetPass& pass, std::span<const double> dout,
                  ParamSet& g) {
  std::vector<double> dpen;
  dense_backward(param(p, "head.W"), pass.result.penultimate, dout, grad(g, "head.W"), grad(g, "head.b"), &dpen);
  std::size_t offset = 0;
  for (std::size_t b = 0; b < net.branches.size(); ++b) {
    const std::size_t w = pass.caches[b].pen.size();
    trunk_backward(net.branches[b], p, pass.caches[b], std::span<const double>(dpen).subspan(offset, w), g);
    offset += w;
  }
}

double sample_loss_and_grad(const Network& net, const ParamSet& p, std::span<const Matrix* const> inputs,
                            double target, ParamSet* g) {
  const NetPass pass = net_forward(net, p, inputs);
  const double l = loss(net.head, pass.result.output, target);
  if (g) net_backward(net, p, pass, loss_gradient(net.head, pass.result.output, target), *g);
  return l;
}

// ---- training --------------------------------------------------------------

struct Item {
  std::vector<const Matrix*> inputs;
  double target;
};

struct TrainOutcome {
  ParamSet params;
  std::vector<double> train_history, dev_history;
  std::size_t best_epoch = 0;
};

std::uint64_t item_digest(const Item& item) {
  std::uint64_t h = fnv1a64(std::span<const double>(&item.target, 1));
  for (const Matrix* m : item.inputs) {
    const double dims[2] = {double(m->rows()), double(m->cols())};
    h = fnv1a64(std::span<const double>(dims), h);
    h = fnv1a64(m->data(), h);
  }
  return h;
}

double mean_loss(const Network& net, const ParamSet& p, const std::vector<Item>& items) {
  double total = 0.0;
  for (const auto& it : items) total += sample_loss_and_grad(net, p, it.inputs, it.target, nullptr);
  return total / static_cast<double>(items.size());
}

TrainOutcome run_training(const Network& net, ParamSet params, std::vector<Item> items, const std::vector<Item>& dev,
                          const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (items.empty()) throw ValidationError("train: no training data");
  for (const auto& it : items) (void)loss(net.head, std::vector<double>(net.head.outputs(), 0.0), it.target);

  {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    for (std::size_t i = 0; i < items.size(); ++i) keyed.emplace_back(item_digest(items[i]), i);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Item> sorted;
    sorted.reserve(items.size());
    for (const auto& k : keyed) sorted.push_back(items[k.second]);
    items.swap(sorted);
  }

  Rng rng(splitmix64(cfg.seed ^ 0x7261696eULL));
  const std::size_t n = items.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  ParamSet grads = zeros_like(params);
  ParamSet m1 = zeros_like(params), m2 = zeros_like(params);
  std::size_t step = 0;

  TrainOutcome out;
  const bool early_stop = cfg.early_stop_patience.has_value() && !dev.empty();
  double best_dev = std::numeric_limits<double>::infinity();
  ParamSet best_params = params;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (batch < n) rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(start + batch, n);
      for (auto& [_, t] : grads) std::fill(t.values.begin(), t.values.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const Item& it = items[order[k]];
        epoch_loss += sample_loss_and_grad(net, params, it.inputs, it.target, &grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
      auto pi = params.begin();
      auto gi = grads.begin();
      auto ai = m1.begin();
      auto vi = m2.begin();
      for (; pi != params.end(); ++pi, ++gi, ++ai, ++vi) {
        auto& w = pi->second.values;
        const auto& gv = gi->second.values;
        if (cfg.optimizer == Optimizer::SGD) {
          for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.learning_rate * gv[j] * scale;
          continue;
        }
        auto& m = ai->second.values;
        auto& v = vi->second.values;
        for (std::size_t j = 0; j < w.size(); ++j) {
          const double gj = gv[j] * scale;
          m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
          v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
          w[j] -= cfg.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.epsilon);
        }
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw DivergenceError("training loss became non-finite", epoch);
    out.train_history.push_back(epoch_loss);
    out.best_epoch = epoch;

    if (!dev.empty()) {
      const double dl = mean_loss(net, params, dev);
      out.dev_history.push_back(dl);
      if (early_stop) {
        if (dl < best_dev) {
          best_dev = dl;
          best_params = params;
          since_best = 0;
        } else if (++since_best >= *cfg.early_stop_patience) {
          break;
        }
      }
    }
  }
  if (early_stop) {
    params = std::move(best_params);
    out.best_epoch = static_cast<std::size_t>(
        std::min_element(out.dev_history.begin(), out.dev_history.end()) - out.dev_history.begin() + 1);
  }
  out.params = std::move(params);
  return out;
}

std::vector<Item> single_items(std::span<const Sample> data) {
  std::vector<Item> items;
  items.reserve(data.size());
  for (const auto& s : data) items.push_back(Item{{&s.x}, s.target});
  return items;
}

std::vector<Item> joint_items(std::span<const JointSample> data) {
  std::vector<Item> items;
  items.reserve(data.size());
  for (const auto& s : data) {
    Item it{{}, s.target};
    for (const auto& m : s.inputs) it.inputs.push_back(&m);
    items.push_back(std::move(it));
  }
  return items;
}

std::vector<const Matrix*> pointers(std::span<const Matrix> inputs) {
  std::vector<const Matrix*> v;
  for (const auto& m : inputs) v.push_back(&m);
  return v;
}

}  // namespace

double loss(const Head& head, std::span<const double> output, double target) {
  if (output.size() != head.outputs())
    throw ShapeError("loss: head expects " + std::to_string(head.outputs()) + " outputs, got " +
                     std::to_string(output.size()));
  if (head.kind == HeadKind::Regression) {
    if (!std::isfinite(target)) throw ValidationError("loss: non-finite regression target");
    const double d = output[0] - target;
    return d * d;
  }
  if (target != std::floor(target) || target < 0.0 || target >= static_cast<double>(head.outputs()))
    throw ValidationError("loss: class target " + std::to_string(target) + " outside [0, " +
                          std::to_string(head.outputs()) + ")");
  const double m = *std::max_element(output.begin(), output.end());
  double z = 0.0;
  for (double o : output) z += std::exp(o - m);
  return m + std::log(z) - output[static_cast<std::size_t>(target)];
}

TrainedModel init_model(const ModelSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  TrainedModel m;
  m.spec = spec;
  m.seed = seed;
  m.parameters = init_params(single_network(m.spec), seed);
  return m;
}

ForwardResult forward(const TrainedModel& model, const Matrix& x) {
  const Matrix* in[1] = {&x};
  return net_forward(single_network(model.spec), model.parameters, in).result;
}

ParamSet backward(const TrainedModel& model, const Matrix& x, double target) {
  ParamSet g = zeros_like(model.parameters);
  const Matrix* in[1] = {&x};
  sample_loss_and_grad(single_network(model.spec), model.parameters, in, target, &g);
  return g;
}

TrainedModel train(const ModelSpec& spec, std::span<const Sample> data, const TrainConfig& config,
                   std::span<const Sample> dev) {
  TrainedModel model = init_model(spec, config.seed);
  auto outcome = run_training(single_network(model.spec), std::move(model.parameters), single_items(data),
                              single_items(dev), config);
  model.parameters = std::move(outcome.params);
  model.train_history = std::move(outcome.train_history);
  model.dev_history = std::move(outcome.dev_history);
  model.best_epoch = outcome.best_epoch;
  return model;
}

Matrix extract_features(const TrainedModel& model, std::span<const Matrix> xs) {
  Matrix out(0, penultimate_dim(model.spec));
  for (const auto& x : xs) out.append_row(forward(model, x).penultimate);
  return out;
}

JointModel init_joint(const JointSpec& spec, std::uint64_t seed) {
  JointModel m;
  m.spec = spec;
  m.seed = seed;
  m.parameters = init_params(joint_network(m.spec), seed);
  return m;
}

ForwardResult forward(const JointModel& model, std::span<const Matrix> inputs) {
  const auto in = pointers(inputs);
  return net_forward(joint_network(model.spec), model.parameters, in).result;
}

ParamSet backward(const JointModel& model, std::span<const Matrix> inputs, double target) {
  ParamSet g = zeros_like(model.parameters);
  const auto in = pointers(inputs);
  sample_loss_and_grad(joint_network(model.spec), model.parameters, in, target, &g);
  return g;
}

JointModel train_joint(const JointSpec& spec, std::span<const JointSample> data, const TrainConfig& config,
                       std::span<const JointSample> dev) {
  JointModel model = init_joint(spec, config.seed);
  auto outcome = run_training(joint_network(model.spec), std::move(model.parameters), joint_items(data),
                              joint_items(dev), config);
  model.parameters = std::move(outcome.params);
  model.train_history = std::move(outcome.train_history);
  model.dev_history = std::move(outcome.dev_history);
  model.best_epoch = outcome.best_epoch;
  return model;
}

}  // namespace mmf::nn
