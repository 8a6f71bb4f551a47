#ifndef SPCKD_TAPE_HPP
#define SPCKD_TAPE_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "spckd/tensor.hpp"

namespace spckd {

// Learnable value. The gradient buffer always matches the value shape and is
// written by Tape::backward; the owning optimizer zeroes it between steps.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = true;
  bool saw_backward = false;

  Parameter() = default;
  explicit Parameter(Tensor<T> v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() {
    grad.fill(T(0));
    saw_backward = false;
  }
};

// Handle to a node on a Tape. Only meaningful for the tape that produced it.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

// Reverse-mode tape over the operator set the recovery network needs.
//
// A forward pass records one node per primitive result plus a backward step
// closure. backward(loss) seeds d(loss)/d(loss)=1, replays the steps in exact
// reverse order, and accumulates leaf gradients into the hooked Parameters.
// A tape is single-consumer: a second backward throws UsageError.
//
// Every operation validates that its output is finite; NaN/Inf anywhere
// raises NumericError instead of propagating silently.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves -------------------------------------------------------------
  Var leaf(Tensor<T> v);         // constant input, gradient dies here
  Var param(Parameter<T>& p);    // leaf whose gradient accumulates into p.grad

  // ---- elementwise --------------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_n(const std::vector<Var>& xs);   // left-fold sum, fixed order
  Var scale(Var a, Var s);                 // s is a 1-element node
  Var scale_const(Var a, T c);
  Var relu(Var a);                         // subgradient 0 at the kink
  // sign(v) * max(|v| - |beta|, 0); beta is a 1-element node. Subgradient 0
  // at |v| == |beta|; d|beta|/dbeta uses sign(beta) with sign(0) = 0.
  Var soft_threshold(Var v, Var beta);
  // sign with sign(0) = +1 in the forward pass; the backward pass is the
  // identity (straight-through estimator).
  Var binarize_ste(Var a);
  // Elementwise sqrt; derivative at 0 is defined as 0 so norms of identical
  // operands stay differentiable.
  Var sqrt(Var a);

  // ---- structure ----------------------------------------------------------
  Var reshape(Var a, Shape shape);              // element count must match
  Var slice_front(Var a, std::size_t index);    // pick one index of dim 0
  Var slice_range(Var a, std::size_t start, std::size_t count);

  // ---- reductions ---------------------------------------------------------
  Var sum(Var a);         // -> scalar
  Var dot(Var a, Var b);  // -> scalar; dot(x, x) is the squared norm

  // ---- linear algebra -----------------------------------------------------
  Var matmul_nn(Var a, Var b);  // [m,k] x [k,n] -> [m,n]
  Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T -> [m,n]

  // Zero-padded "same" 3x3 convolution, channels-last.
  // input [B,H,W,Cin] (or [H,W,Cin]), kernel [3,3,Cin,Cout], bias [Cout].
  Var conv2d_same(Var input, Var kernel, Var bias);

  // Gaussian-RBF correlation matrix of L equal-length feature vectors:
  // out[i,j] = exp(-inv_two_sigma_sq * ||f_i - f_j||^2), unit diagonal.
  Var rbf_correlation(const std::vector<Var>& features, T inv_two_sigma_sq);

  // ---- backward -----------------------------------------------------------
  void backward(Var loss);

  const Tensor<T>& value(Var v) const;
  const Tensor<T>& grad(Var v) const;   // valid after backward
  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;   // allocated at backward time
    Parameter<T>* hook = nullptr;
  };

  Var push(Tensor<T> value, const char* op, Parameter<T>* hook = nullptr);
  Tensor<T>& val(Var v) { return nodes_[v.id].value; }
  Tensor<T>& grd(Var v) { return nodes_[v.id].grad; }
  void check_same_shape(Var a, Var b, const char* op) const;
  void check_scalar(Var a, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace spckd

#endif  // SPCKD_TAPE_HPP
