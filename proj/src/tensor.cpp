#include "transmot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace transmot {

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<int>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * static_cast<std::size_t>(shape[i + 1]);
  }
  return strides;
}

// Strides of `shape` aligned to the right against a result of rank
// `out_rank`; broadcast dimensions get stride 0.
std::vector<std::size_t> broadcast_strides(const std::vector<int>& shape, int out_rank) {
  std::vector<std::size_t> natural = row_major_strides(shape);
  std::vector<std::size_t> out(out_rank, 0);
  const int offset = out_rank - static_cast<int>(shape.size());
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    out[offset + i] = (shape[i] == 1) ? 0 : natural[i];
  }
  return out;
}

// Walks a result shape in row-major order, producing the flat offsets of
// two (possibly broadcast) operands in lockstep.
struct BroadcastWalker {
  explicit BroadcastWalker(const std::vector<int>& out_shape)
      : shape(out_shape), index(out_shape.size(), 0) {}

  const std::vector<int>& shape;
  std::vector<int> index;

  bool step() {
    for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
      if (++index[i] < shape[i]) return true;
      index[i] = 0;
    }
    return false;
  }

  std::size_t offset(const std::vector<std::size_t>& strides) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < index.size(); ++i) off += strides[i] * index[i];
    return off;
  }
};

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

}  // namespace

void Tensor::Impl::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::Impl::accumulate(const std::vector<double>& g) {
  ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape must be positive, got " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

bool shapes_equal(const std::vector<int>& a, const std::vector<int>& b) { return a == b; }

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

std::vector<int> broadcast_shapes(const std::vector<int>& a, const std::vector<int>& b) {
  const int rank = std::max(a.size(), b.size());
  std::vector<int> out(rank, 1);
  for (int i = 0; i < rank; ++i) {
    const int da = (i >= rank - static_cast<int>(a.size())) ? a[i - (rank - a.size())] : 1;
    const int db = (i >= rank - static_cast<int>(b.size())) ? b[i - (rank - b.size())] : 1;
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("broadcast mismatch: " + shape_str(a) + " vs " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// ---- Tensor handle ------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  auto impl = std::make_shared<Impl>();
  const std::size_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->values.assign(n, value);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->ensure_grad();
  return Tensor(std::move(impl));
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("tensor data size " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->ensure_grad();
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n);
  for (auto& v : values) v = dist(rng);
  return from(std::move(shape), std::move(values), requires_grad);
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::dim() const { return static_cast<int>(impl_->shape.size()); }
std::size_t Tensor::numel() const { return impl_->numel(); }
int Tensor::size(int axis) const { return impl_->shape.at(axis); }

const std::vector<double>& Tensor::values() const { return impl_->values; }
std::vector<double>& Tensor::mutable_values() { return impl_->values; }
double Tensor::at(std::size_t flat_index) const { return impl_->values.at(flat_index); }

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor has no gradient buffer");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (!impl_) throw std::invalid_argument("backward: undefined tensor");
  if (numel() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(impl_->shape));
  }

  // Iterative post-order DFS; the resulting list is topologically sorted
  // (parents before children), so the reverse sweep sees each node after
  // all of its consumers.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Impl* child = node->parents[next_child++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

// Builds an op result wired into the graph. The backward closure receives
// the output impl (whose .grad is populated) and accumulates into parents.
Tensor make_op(std::vector<int> shape, std::vector<Tensor> parents,
               std::function<void(Tensor::Impl&)> backward_fn) {
  auto impl = std::make_shared<Tensor::Impl>();
  impl->shape = std::move(shape);
  impl->values.assign(shape_numel(impl->shape), 0.0);
  bool needs = false;
  impl->parents.reserve(parents.size());
  for (const auto& p : parents) {
    needs = needs || p.impl()->requires_grad;
    impl->parents.push_back(p.impl_ptr());
  }
  impl->requires_grad = needs;
  if (needs) impl->backward_fn = std::move(backward_fn);
  return Tensor(std::move(impl));
}

// ---- Elementwise binary ops ---------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
  check_defined(a, name);
  check_defined(b, name);
  std::vector<int> out_shape = broadcast_shapes(a.shape(), b.shape());
  const int rank = static_cast<int>(out_shape.size());
  const auto sa = broadcast_strides(a.shape(), rank);
  const auto sb = broadcast_strides(b.shape(), rank);

  Tensor out = make_op(out_shape, {a, b}, [sa, sb, out_shape, bwd](Tensor::Impl& self) {
    Tensor::Impl* pa = self.parents[0].get();
    Tensor::Impl* pb = self.parents[1].get();
    const bool ga = pa->requires_grad;
    const bool gb = pb->requires_grad;
    if (ga) pa->ensure_grad();
    if (gb) pb->ensure_grad();
    BroadcastWalker w(out_shape);
    std::size_t i = 0;
    do {
      const std::size_t ia = w.offset(sa);
      const std::size_t ib = w.offset(sb);
      bwd(self.grad[i], pa->values[ia], pb->values[ib], ga ? &pa->grad[ia] : nullptr,
          gb ? &pb->grad[ib] : nullptr);
      ++i;
    } while (w.step());
  });

  auto& ov = out.impl()->values;
  const auto& av = a.values();
  const auto& bv = b.values();
  BroadcastWalker w(out_shape);
  std::size_t i = 0;
  do {
    ov[i++] = fwd(av[w.offset(sa)], bv[w.offset(sb)]);
  } while (w.step());
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double* gx, double* gy) {
        if (gx) *gx += g;
        if (gy) *gy += g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double* gx, double* gy) {
        if (gx) *gx += g;
        if (gy) *gy -= g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double x, double y, double* gx, double* gy) {
        if (gx) *gx += g * y;
        if (gy) *gy += g * x;
      });
}

// ---- Elementwise unary ops ----------------------------------------------

namespace {

// fwd: value -> value. bwd: (upstream grad, input value, output value) -> input grad.
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  check_defined(a, name);
  Tensor out = make_op(a.shape(), {a}, [bwd](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p->grad[i] += bwd(self.grad[i], p->values[i], self.values[i]);
    }
  });
  auto& ov = out.impl()->values;
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
  return out;
}

}  // namespace

Tensor neg(const Tensor& a) {
  return unary_op(
      a, "neg", [](double x) { return -x; },
      [](double g, double, double) { return -g; });
}

Tensor scale(const Tensor& a, double s) {
  return unary_op(
      a, "scale", [s](double x) { return x * s; },
      [s](double g, double, double) { return g * s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      a, "add_scalar", [s](double x) { return x + s; },
      [](double g, double, double) { return g; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

Tensor log_sigmoid(const Tensor& a) {
  // log(sigmoid(x)) = -log1p(exp(-x)), stable on both tails.
  return unary_op(
      a, "log_sigmoid",
      [](double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); },
      [](double g, double x, double) { return g / (1.0 + std::exp(x)); });
}

// ---- Matmul ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.dim() < 2 || b.dim() < 2) {
    throw std::invalid_argument("matmul needs rank >= 2, got " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const auto& ash = a.shape();
  const auto& bsh = b.shape();
  const int p = ash[ash.size() - 2], q = ash[ash.size() - 1];
  const int q2 = bsh[bsh.size() - 2], r = bsh[bsh.size() - 1];
  if (q != q2) {
    throw std::invalid_argument("matmul inner dimension mismatch: " + shape_str(ash) + " x " +
                                shape_str(bsh));
  }
  std::vector<int> abatch(ash.begin(), ash.end() - 2);
  std::vector<int> bbatch(bsh.begin(), bsh.end() - 2);
  std::vector<int> batch = broadcast_shapes(abatch, bbatch);
  const int brank = static_cast<int>(batch.size());
  const auto sa = broadcast_strides(abatch, brank);
  const auto sb = broadcast_strides(bbatch, brank);
  const std::size_t mat_a = static_cast<std::size_t>(p) * q;
  const std::size_t mat_b = static_cast<std::size_t>(q) * r;
  const std::size_t mat_o = static_cast<std::size_t>(p) * r;

  std::vector<int> out_shape = batch;
  out_shape.push_back(p);
  out_shape.push_back(r);

  // Flat matrix-base offsets per broadcast batch element, reused by the
  // backward pass.
  std::vector<std::size_t> base_a, base_b;
  {
    BroadcastWalker w(batch);
    if (batch.empty()) {
      base_a.push_back(0);
      base_b.push_back(0);
    } else {
      do {
        base_a.push_back(w.offset(sa) * mat_a);
        base_b.push_back(w.offset(sb) * mat_b);
      } while (w.step());
    }
  }

  Tensor out = make_op(out_shape, {a, b}, [=](Tensor::Impl& self) {
    Tensor::Impl* pa = self.parents[0].get();
    Tensor::Impl* pb = self.parents[1].get();
    const bool ga = pa->requires_grad;
    const bool gb = pb->requires_grad;
    if (ga) pa->ensure_grad();
    if (gb) pb->ensure_grad();
    for (std::size_t n = 0; n < base_a.size(); ++n) {
      const double* A = pa->values.data() + base_a[n];
      const double* B = pb->values.data() + base_b[n];
      const double* G = self.grad.data() + n * mat_o;
      if (ga) {
        double* dA = pa->grad.data() + base_a[n];
        // dA = G * B^T
        for (int i = 0; i < p; ++i)
          for (int k = 0; k < q; ++k) {
            double acc = 0.0;
            for (int j = 0; j < r; ++j) acc += G[i * r + j] * B[k * r + j];
            dA[i * q + k] += acc;
          }
      }
      if (gb) {
        double* dB = pb->grad.data() + base_b[n];
        // dB = A^T * G
        for (int k = 0; k < q; ++k)
          for (int j = 0; j < r; ++j) {
            double acc = 0.0;
            for (int i = 0; i < p; ++i) acc += A[i * q + k] * G[i * r + j];
            dB[k * r + j] += acc;
          }
      }
    }
  });

  auto& ov = out.impl()->values;
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t n = 0; n < base_a.size(); ++n) {
    const double* A = av + base_a[n];
    const double* B = bv + base_b[n];
    double* O = ov.data() + n * mat_o;
    for (int i = 0; i < p; ++i)
      for (int k = 0; k < q; ++k) {
        const double aik = A[i * q + k];
        if (aik == 0.0) continue;
        for (int j = 0; j < r; ++j) O[i * r + j] += aik * B[k * r + j];
      }
  }
  return out;
}

// ---- Softmax family -------------------------------------------------------

namespace {

// Common core: scores [rows, n] with a 0/1 mask resolved per element.
// Masked outputs are exactly zero; each surviving row sums to one.
Tensor masked_softmax_impl(const Tensor& scores, const Tensor* mask) {
  const auto& shape = scores.shape();
  if (shape.empty()) throw std::invalid_argument("masked_softmax: scalar input");
  const int n = shape.back();
  const std::size_t rows = scores.numel() / n;

  std::vector<std::size_t> mask_strides;
  if (mask) {
    // Validate broadcast, then resolve per-element offsets lazily.
    broadcast_shapes(shape, mask->shape());
    if (broadcast_shapes(shape, mask->shape()) != shape) {
      throw std::invalid_argument("masked_softmax: mask shape " + shape_str(mask->shape()) +
                                  " does not broadcast onto " + shape_str(shape));
    }
    mask_strides = broadcast_strides(mask->shape(), static_cast<int>(shape.size()));
  }

  std::vector<Tensor> parents = {scores};
  Tensor out = make_op(shape, parents, [n, rows](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t row = 0; row < rows; ++row) {
      const double* y = self.values.data() + row * n;
      const double* g = self.grad.data() + row * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += g[j] * y[j];
      double* dx = p->grad.data() + row * n;
      for (int j = 0; j < n; ++j) dx[j] += y[j] * (g[j] - dot);
    }
  });

  // Forward with the numerically safe max-shift over the unmasked subset.
  const auto& sv = scores.values();
  auto& ov = out.impl()->values;
  const std::vector<double>* mv = mask ? &mask->values() : nullptr;
  BroadcastWalker w(shape);
  std::vector<char> keep(n);
  std::vector<std::size_t> row_buf(n);
  std::size_t flat = 0;
  bool more = true;
  while (more) {
    // Collect one row of mask offsets (the walker traverses row-major).
    for (int j = 0; j < n; ++j) {
      row_buf[j] = mv ? w.offset(mask_strides) : 0;
      more = w.step();
    }
    const std::size_t base = flat;
    double hi = -std::numeric_limits<double>::infinity();
    int live = 0;
    for (int j = 0; j < n; ++j) {
      keep[j] = mv ? ((*mv)[row_buf[j]] != 0.0) : 1;
      if (keep[j]) {
        ++live;
        hi = std::max(hi, sv[base + j]);
      }
    }
    if (live == 0) throw std::invalid_argument("masked_softmax: fully masked row");
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      if (keep[j]) denom += std::exp(sv[base + j] - hi);
    }
    for (int j = 0; j < n; ++j) {
      ov[base + j] = keep[j] ? std::exp(sv[base + j] - hi) / denom : 0.0;
    }
    flat += n;
  }
  return out;
}

}  // namespace

Tensor masked_softmax(const Tensor& scores, const Tensor& mask) {
  check_defined(scores, "masked_softmax");
  check_defined(mask, "masked_softmax");
  return masked_softmax_impl(scores, &mask);
}

Tensor softmax(const Tensor& scores) {
  check_defined(scores, "softmax");
  return masked_softmax_impl(scores, nullptr);
}

Tensor log_softmax(const Tensor& scores) {
  check_defined(scores, "log_softmax");
  const auto& shape = scores.shape();
  if (shape.empty()) throw std::invalid_argument("log_softmax: scalar input");
  const int n = shape.back();
  const std::size_t rows = scores.numel() / n;

  Tensor out = make_op(shape, {scores}, [n, rows](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t row = 0; row < rows; ++row) {
      const double* y = self.values.data() + row * n;
      const double* g = self.grad.data() + row * n;
      double gsum = 0.0;
      for (int j = 0; j < n; ++j) gsum += g[j];
      double* dx = p->grad.data() + row * n;
      for (int j = 0; j < n; ++j) dx[j] += g[j] - std::exp(y[j]) * gsum;
    }
  });

  const auto& sv = scores.values();
  auto& ov = out.impl()->values;
  for (std::size_t row = 0; row < rows; ++row) {
    const double* x = sv.data() + row * n;
    double hi = x[0];
    for (int j = 1; j < n; ++j) hi = std::max(hi, x[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) denom += std::exp(x[j] - hi);
    const double lse = hi + std::log(denom);
    for (int j = 0; j < n; ++j) ov[row * n + j] = x[j] - lse;
  }
  return out;
}

// ---- Layer norm -------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  check_defined(x, "layer_norm");
  check_defined(gain, "layer_norm");
  check_defined(bias, "layer_norm");
  constexpr double kEps = 1e-5;
  const auto& shape = x.shape();
  if (shape.empty()) throw std::invalid_argument("layer_norm: scalar input");
  const int d = shape.back();
  if (gain.numel() != static_cast<std::size_t>(d) || bias.numel() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("layer_norm: gain/bias must have " + std::to_string(d) + " elements");
  }
  const std::size_t rows = x.numel() / d;

  Tensor out = make_op(shape, {x, gain, bias}, [d, rows, kEps](Tensor::Impl& self) {
    Tensor::Impl* px = self.parents[0].get();
    Tensor::Impl* pg = self.parents[1].get();
    Tensor::Impl* pb = self.parents[2].get();
    if (px->requires_grad) px->ensure_grad();
    if (pg->requires_grad) pg->ensure_grad();
    if (pb->requires_grad) pb->ensure_grad();
    for (std::size_t row = 0; row < rows; ++row) {
      const double* xr = px->values.data() + row * d;
      const double* g = self.grad.data() + row * d;
      double mu = 0.0;
      for (int j = 0; j < d; ++j) mu += xr[j];
      mu /= d;
      double var = 0.0;
      for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
      var /= d;
      const double inv_sigma = 1.0 / std::sqrt(var + kEps);

      if (pg->requires_grad || pb->requires_grad) {
        for (int j = 0; j < d; ++j) {
          const double xhat = (xr[j] - mu) * inv_sigma;
          if (pg->requires_grad) pg->grad[j] += g[j] * xhat;
          if (pb->requires_grad) pb->grad[j] += g[j];
        }
      }
      if (px->requires_grad) {
        // d xhat_i = gamma_i * g_i; fold the mean/variance paths analytically.
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
          const double xhat = (xr[j] - mu) * inv_sigma;
          const double dxhat = g[j] * pg->values[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        double* dx = px->grad.data() + row * d;
        for (int j = 0; j < d; ++j) {
          const double xhat = (xr[j] - mu) * inv_sigma;
          const double dxhat = g[j] * pg->values[j];
          dx[j] += inv_sigma * (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d);
        }
      }
    }
  });

  const auto& xv = x.values();
  const auto& gv = gain.values();
  const auto& bv = bias.values();
  auto& ov = out.impl()->values;
  for (std::size_t row = 0; row < rows; ++row) {
    const double* xr = xv.data() + row * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double inv_sigma = 1.0 / std::sqrt(var + kEps);
    for (int j = 0; j < d; ++j) {
      ov[row * d + j] = gv[j] * (xr[j] - mu) * inv_sigma + bv[j];
    }
  }
  return out;
}

// ---- Shape ops ---------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (const auto& p : parts) check_defined(p, "concat");
  const int rank = parts[0].dim();
  if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
  std::vector<int> out_shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.dim() != rank) throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && p.shape()[i] != out_shape[i]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                    shape_str(out_shape));
      }
    }
    total += p.shape()[axis];
  }
  out_shape[axis] = total;

  // outer = product of dims before axis, inner = product after.
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= out_shape[i];
  std::vector<std::size_t> part_block(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    part_block[k] = static_cast<std::size_t>(parts[k].shape()[axis]) * inner;
  }
  const std::size_t out_block = static_cast<std::size_t>(total) * inner;

  Tensor out = make_op(out_shape, parts, [part_block, out_block, outer](Tensor::Impl& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Tensor::Impl* p = self.parents[k].get();
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          const double* g = self.grad.data() + o * out_block + off;
          double* dst = p->grad.data() + o * part_block[k];
          for (std::size_t i = 0; i < part_block[k]; ++i) dst[i] += g[i];
        }
      }
      off += part_block[k];
    }
  });

  auto& ov = out.impl()->values;
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.data() + o * part_block[k], part_block[k], ov.data() + o * out_block + off);
    }
    off += part_block[k];
  }
  return out;
}

Tensor narrow(const Tensor& a, int axis, int start, int length) {
  check_defined(a, "narrow");
  const auto& shape = a.shape();
  if (axis < 0 || axis >= a.dim()) throw std::invalid_argument("narrow: bad axis");
  if (start < 0 || length <= 0 || start + length > shape[axis]) {
    throw std::invalid_argument("narrow: range [" + std::to_string(start) + "," +
                                std::to_string(start + length) + ") exceeds axis size " +
                                std::to_string(shape[axis]));
  }
  std::vector<int> out_shape = shape;
  out_shape[axis] = length;
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < a.dim(); ++i) inner *= shape[i];
  const std::size_t in_block = static_cast<std::size_t>(shape[axis]) * inner;
  const std::size_t out_block = static_cast<std::size_t>(length) * inner;
  const std::size_t skip = static_cast<std::size_t>(start) * inner;

  Tensor out = make_op(out_shape, {a}, [outer, in_block, out_block, skip](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      const double* g = self.grad.data() + o * out_block;
      double* dst = p->grad.data() + o * in_block + skip;
      for (std::size_t i = 0; i < out_block; ++i) dst[i] += g[i];
    }
  });

  auto& ov = out.impl()->values;
  const auto& av = a.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.data() + o * in_block + skip, out_block, ov.data() + o * out_block);
  }
  return out;
}

Tensor permute(const Tensor& a, const std::vector<int>& axes) {
  check_defined(a, "permute");
  const int rank = a.dim();
  if (static_cast<int>(axes.size()) != rank) throw std::invalid_argument("permute: axes rank mismatch");
  std::vector<char> seen(rank, 0);
  for (int ax : axes) {
    if (ax < 0 || ax >= rank || seen[ax]) throw std::invalid_argument("permute: invalid axes");
    seen[ax] = 1;
  }
  std::vector<int> out_shape(rank);
  for (int i = 0; i < rank; ++i) out_shape[i] = a.shape()[axes[i]];

  // Map each output flat index to the source flat index once; reuse in
  // both directions.
  const auto in_strides = row_major_strides(a.shape());
  std::vector<std::size_t> src_index(a.numel());
  {
    BroadcastWalker w(out_shape);
    std::size_t i = 0;
    do {
      std::size_t off = 0;
      for (int k = 0; k < rank; ++k) off += in_strides[axes[k]] * w.index[k];
      src_index[i++] = off;
    } while (w.step());
  }

  Tensor out = make_op(out_shape, {a}, [src_index](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < src_index.size(); ++i) p->grad[src_index[i]] += self.grad[i];
  });

  auto& ov = out.impl()->values;
  const auto& av = a.values();
  for (std::size_t i = 0; i < src_index.size(); ++i) ov[i] = av[src_index[i]];
  return out;
}

Tensor reshape(const Tensor& a, const std::vector<int>& shape) {
  check_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(shape));
  }
  Tensor out = make_op(shape, {a}, [](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->accumulate(self.grad);
  });
  out.impl()->values = a.values();
  return out;
}

// ---- Reductions -----------------------------------------------------------

Tensor sum(const Tensor& a) {
  check_defined(a, "sum");
  Tensor out = make_op({1}, {a}, [](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    const double g = self.grad[0];
    for (auto& d : p->grad) d += g;
  });
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  out.impl()->values[0] = acc;
  return out;
}

Tensor mean(const Tensor& a) {
  check_defined(a, "mean");
  const double inv_n = 1.0 / static_cast<double>(a.numel());
  Tensor out = make_op({1}, {a}, [inv_n](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    const double g = self.grad[0] * inv_n;
    for (auto& d : p->grad) d += g;
  });
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  out.impl()->values[0] = acc * inv_n;
  return out;
}

// ---- Indexed access ---------------------------------------------------------

Tensor embedding_rows(const Tensor& table, const std::vector<int>& indices) {
  check_defined(table, "embedding_rows");
  if (table.dim() != 2) throw std::invalid_argument("embedding_rows: table must be 2-D");
  const int v = table.size(0), d = table.size(1);
  for (int idx : indices) {
    if (idx < 0 || idx >= v) {
      throw std::out_of_range("embedding_rows: index " + std::to_string(idx) + " out of [0," +
                              std::to_string(v) + ")");
    }
  }
  const int k = static_cast<int>(indices.size());
  Tensor out = make_op({k, d}, {table}, [indices, d](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const double* g = self.grad.data() + i * d;
      double* dst = p->grad.data() + static_cast<std::size_t>(indices[i]) * d;
      for (int j = 0; j < d; ++j) dst[j] += g[j];
    }
  });
  auto& ov = out.impl()->values;
  const auto& tv = table.values();
  for (int i = 0; i < k; ++i) {
    std::copy_n(tv.data() + static_cast<std::size_t>(indices[i]) * d, d, ov.data() + i * d);
  }
  return out;
}

Tensor gather_cols(const Tensor& x, const std::vector<int>& cols) {
  check_defined(x, "gather_cols");
  if (x.dim() != 2) throw std::invalid_argument("gather_cols: input must be 2-D");
  const int m = x.size(0), n = x.size(1);
  if (static_cast<int>(cols.size()) != m) {
    throw std::invalid_argument("gather_cols: need one column index per row");
  }
  for (int c : cols) {
    if (c < 0 || c >= n) {
      throw std::out_of_range("gather_cols: column " + std::to_string(c) + " out of [0," +
                              std::to_string(n) + ")");
    }
  }
  Tensor out = make_op({m}, {x}, [cols, n](Tensor::Impl& self) {
    Tensor::Impl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < cols.size(); ++i) {
      p->grad[i * n + cols[i]] += self.grad[i];
    }
  });
  auto& ov = out.impl()->values;
  const auto& xv = x.values();
  for (int i = 0; i < m; ++i) ov[i] = xv[static_cast<std::size_t>(i) * n + cols[i]];
  return out;
}

// ---- Optimizer ---------------------------------------------------------------

void sgd_step(std::vector<Tensor>& params, double lr) {
  for (auto& p : params) {
    if (!p.defined() || !p.has_grad()) {
      throw std::runtime_error("sgd_step: parameter has no gradient");
    }
  }
  for (auto& p : params) {
    auto* impl = p.impl();
    for (std::size_t i = 0; i < impl->values.size(); ++i) {
      impl->values[i] -= lr * impl->grad[i];
      impl->grad[i] = 0.0;
    }
  }
}

}  // namespace transmot
