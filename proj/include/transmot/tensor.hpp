#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace transmot {

/// Dense 64-bit tensor with reverse-mode automatic differentiation.
///
/// Tensors are handles to shared storage; ops return fresh tensors that
/// record their parents and a backward closure, forming a dynamic graph.
/// Calling backward() on a scalar loss walks that graph in reverse
/// topological order and accumulates into the .grad() buffers of every
/// reachable tensor with requires_grad set. Gradients accumulate across
/// repeated backward() calls until zero_grad() or sgd_step() resets them.
///
/// Values are immutable after construction except through the documented
/// in-place parameter update (sgd_step). A tensor graph belongs to one
/// thread of control; independent graphs may run in parallel.
class Tensor {
 public:
  struct Impl;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Gaussian init, mean 0, given stddev.
  static Tensor randn(std::vector<int> shape, std::mt19937_64& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim() const;
  std::size_t numel() const;
  int size(int axis) const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // parameter loading only; not tracked
  double at(std::size_t flat_index) const;
  double item() const;  // scalar tensors only

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;  // throws when absent
  void zero_grad();

  /// Reverse-mode sweep from a scalar. Throws on non-scalar tensors.
  void backward() const;

  Impl* impl() const { return impl_.get(); }
  std::shared_ptr<Impl> impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<Impl> impl_;

  friend Tensor make_op(std::vector<int> shape, std::vector<Tensor> parents,
                        std::function<void(Impl&)> backward_fn);
};

struct Tensor::Impl {
  std::vector<int> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty unless requires_grad or reached by backward
  std::vector<std::shared_ptr<Impl>> parents;
  std::function<void(Impl&)> backward_fn;  // accumulates self.grad into parents

  std::size_t numel() const { return values.size(); }
  void ensure_grad();
  void accumulate(const std::vector<double>& g);
};

// Shape helpers shared by the op implementations.
std::size_t shape_numel(const std::vector<int>& shape);
bool shapes_equal(const std::vector<int>& a, const std::vector<int>& b);
std::string shape_str(const std::vector<int>& shape);
/// NumPy-style right-aligned broadcast; throws on incompatible shapes.
std::vector<int> broadcast_shapes(const std::vector<int>& a, const std::vector<int>& b);

// ---- Differentiable operations ----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);  // broadcasting
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // broadcasting, elementwise
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// Batched matrix product: [..,p,q] x [..,q,r] -> [..,p,r], leading
/// dimensions broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);

/// Softmax over the last axis restricted to mask!=0 entries; masked slots
/// are exactly zero in the output. The mask is a non-differentiable
/// constant, broadcastable against `scores`. Rows with no unmasked entry
/// throw.
Tensor masked_softmax(const Tensor& scores, const Tensor& mask);
Tensor softmax(const Tensor& scores);      // last axis, no mask
Tensor log_softmax(const Tensor& scores);  // last axis

/// Per-last-axis standardization (epsilon 1e-5) followed by gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor narrow(const Tensor& a, int axis, int start, int length);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor reshape(const Tensor& a, const std::vector<int>& shape);

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar

/// Rows of a parameter matrix selected by index: [v,d] + k indices -> [k,d].
Tensor embedding_rows(const Tensor& table, const std::vector<int>& indices);

/// One element per row of a 2-D tensor: x[m,n] + cols[m] -> [m].
Tensor gather_cols(const Tensor& x, const std::vector<int>& cols);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// Vanilla SGD: p <- p - lr * grad(p); grads are zeroed afterwards.
/// Throws when a tensor has no gradient buffer.
void sgd_step(std::vector<Tensor>& params, double lr);

}  // namespace transmot
