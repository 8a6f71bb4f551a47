#include "spckd/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>

#include "conv_kernels.hpp"
#include "spckd/threads.hpp"

namespace spckd {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

template <typename T>
void accum(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  const std::size_t n = dst.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

template <typename T>
T sign0(T x) {
  return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}

void ensure_eigen_threads() {
  static thread_local int last = -1;
  const int n = thread_count();
  if (n != last) {
    Eigen::setNbThreads(n);
    last = n;
  }
}

}  // namespace

// ---------------------------------------------------------------- plumbing

template <typename T>
Var Tape<T>::push(Tensor<T> value, const char* op, Parameter<T>* hook) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by '") + op +
                       "'");
  Node n;
  n.value = std::move(value);
  n.hook = hook;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
void Tape<T>::check_same_shape(Var a, Var b, const char* op) const {
  if (!nodes_[a.id].value.same_shape(nodes_[b.id].value))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_to_string(nodes_[a.id].value.shape()) + " vs " +
                     shape_to_string(nodes_[b.id].value.shape()));
}

template <typename T>
void Tape<T>::check_scalar(Var a, const char* op) const {
  if (nodes_[a.id].value.size() != 1)
    throw ShapeError(std::string(op) + ": expected a 1-element tensor, got " +
                     shape_to_string(nodes_[a.id].value.shape()));
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return nodes_.at(v.id).value;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
  return nodes_.at(v.id).grad;
}

// ------------------------------------------------------------------ leaves

template <typename T>
Var Tape<T>::leaf(Tensor<T> v) {
  return push(std::move(v), "leaf");
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
  return push(p.value, "param", &p);
}

// ------------------------------------------------------------- elementwise

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = val(a);
  accum(out, val(b));
  Var o = push(std::move(out), "add");
  steps_.push_back([this, ia = a.id, ib = b.id, io = o.id] {
    accum(nodes_[ia].grad, nodes_[io].grad);
    accum(nodes_[ib].grad, nodes_[io].grad);
  });
  return o;
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = val(a);
  {
    T* d = out.data();
    const T* s = val(b).data();
    for (std::size_t i = 0; i < out.size(); ++i) d[i] -= s[i];
  }
  Var o = push(std::move(out), "sub");
  steps_.push_back([this, ia = a.id, ib = b.id, io = o.id] {
    accum(nodes_[ia].grad, nodes_[io].grad);
    const Tensor<T>& g = nodes_[io].grad;
    Tensor<T>& gb = nodes_[ib].grad;
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
  return o;
}

template <typename T>
Var Tape<T>::add_n(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("add_n: empty operand list");
  for (std::size_t i = 1; i < xs.size(); ++i)
    check_same_shape(xs[0], xs[i], "add_n");
  Tensor<T> out = val(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) accum(out, val(xs[i]));
  Var o = push(std::move(out), "add_n");
  std::vector<std::uint32_t> ids(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ids[i] = xs[i].id;
  steps_.push_back([this, ids = std::move(ids), io = o.id] {
    for (std::uint32_t id : ids) accum(nodes_[id].grad, nodes_[io].grad);
  });
  return o;
}

template <typename T>
Var Tape<T>::scale(Var a, Var s) {
  check_scalar(s, "scale");
  const T sv = val(s)[0];
  Tensor<T> out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= sv;
  Var o = push(std::move(out), "scale");
  steps_.push_back([this, ia = a.id, is = s.id, io = o.id] {
    const Tensor<T>& g = nodes_[io].grad;
    const Tensor<T>& av = nodes_[ia].value;
    const T svb = nodes_[is].value[0];
    Tensor<T>& ga = nodes_[ia].grad;
    T gs = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += svb * g[i];
      gs += g[i] * av[i];
    }
    nodes_[is].grad[0] += gs;
  });
  return o;
}

template <typename T>
Var Tape<T>::scale_const(Var a, T c) {
  Tensor<T> out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  Var o = push(std::move(out), "scale_const");
  steps_.push_back([this, ia = a.id, io = o.id, c] {
    const Tensor<T>& g = nodes_[io].grad;
    Tensor<T>& ga = nodes_[ia].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
  return o;
}

template <typename T>
Var Tape<T>::relu(Var a) {
  Tensor<T> out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < T(0)) out[i] = T(0);
  Var o = push(std::move(out), "relu");
  steps_.push_back([this, ia = a.id, io = o.id] {
    const Tensor<T>& g = nodes_[io].grad;
    const Tensor<T>& av = nodes_[ia].value;
    Tensor<T>& ga = nodes_[ia].grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > T(0)) ga[i] += g[i];
  });
  return o;
}

template <typename T>
Var Tape<T>::soft_threshold(Var v, Var beta) {
  check_scalar(beta, "soft_threshold");
  const T tau = std::abs(val(beta)[0]);
  const Tensor<T>& in = val(v);
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const T x = in[i];
    if (x > tau)
      out[i] = x - tau;
    else if (x < -tau)
      out[i] = x + tau;
    else
      out[i] = T(0);
  }
  Var o = push(std::move(out), "soft_threshold");
  steps_.push_back([this, iv = v.id, ib = beta.id, io = o.id, tau] {
    const Tensor<T>& g = nodes_[io].grad;
    const Tensor<T>& in = nodes_[iv].value;
    Tensor<T>& gv = nodes_[iv].grad;
    const T sb = sign0(nodes_[ib].value[0]);
    T gbeta = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T x = in[i];
      if (x > tau) {
        gv[i] += g[i];
        gbeta -= g[i] * sb;
      } else if (x < -tau) {
        gv[i] += g[i];
        gbeta += g[i] * sb;
      }
    }
    nodes_[ib].grad[0] += gbeta;
  });
  return o;
}

template <typename T>
Var Tape<T>::binarize_ste(Var a) {
  const Tensor<T>& in = val(a);
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = in[i] >= T(0) ? T(1) : T(-1);  // sign(0) := +1
  Var o = push(std::move(out), "binarize_ste");
  steps_.push_back([this, ia = a.id, io = o.id] {
    accum(nodes_[ia].grad, nodes_[io].grad);
  });
  return o;
}

template <typename T>
Var Tape<T>::sqrt(Var a) {
  const Tensor<T>& in = val(a);
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::sqrt(in[i]);
  Var o = push(std::move(out), "sqrt");
  steps_.push_back([this, ia = a.id, io = o.id] {
    const Tensor<T>& g = nodes_[io].grad;
    const Tensor<T>& ov = nodes_[io].value;
    Tensor<T>& ga = nodes_[ia].grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (ov[i] > T(0)) ga[i] += g[i] / (T(2) * ov[i]);
  });
  return o;
}

// --------------------------------------------------------------- structure

template <typename T>
Var Tape<T>::reshape(Var a, Shape shape) {
  if (shape_numel(shape) != val(a).size())
    throw ShapeError("reshape: " + shape_to_string(val(a).shape()) +
                     " has a different element count than " +
                     shape_to_string(shape));
  Tensor<T> out(std::move(shape),
                std::vector<T>(val(a).data(), val(a).data() + val(a).size()));
  Var o = push(std::move(out), "reshape");
  steps_.push_back([this, ia = a.id, io = o.id] {
    accum(nodes_[ia].grad, nodes_[io].grad);
  });
  return o;
}

template <typename T>
Var Tape<T>::slice_front(Var a, std::size_t index) {
  const Shape& s = val(a).shape();
  if (s.empty() || index >= s[0])
    throw ShapeError("slice_front: index " + std::to_string(index) +
                     " out of range for " + shape_to_string(s));
  Shape rest(s.begin() + 1, s.end());
  if (rest.empty()) rest = {1};
  const std::size_t rowlen = shape_numel(rest);
  Tensor<T> out(rest, std::vector<T>(val(a).data() + index * rowlen,
                                     val(a).data() + (index + 1) * rowlen));
  Var o = push(std::move(out), "slice_front");
  steps_.push_back([this, ia = a.id, io = o.id, index, rowlen] {
    const Tensor<T>& g = nodes_[io].grad;
    T* ga = nodes_[ia].grad.data() + index * rowlen;
    for (std::size_t i = 0; i < rowlen; ++i) ga[i] += g[i];
  });
  return o;
}

template <typename T>
Var Tape<T>::slice_range(Var a, std::size_t start, std::size_t count) {
  const Shape& s = val(a).shape();
  if (s.empty() || start + count > s[0])
    throw ShapeError("slice_range: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " +
                     shape_to_string(s));
  Shape rest = s;
  rest[0] = count;
  const std::size_t rowlen = shape_numel(Shape(s.begin() + 1, s.end()));
  Tensor<T> out(rest,
                std::vector<T>(val(a).data() + start * rowlen,
                               val(a).data() + (start + count) * rowlen));
  Var o = push(std::move(out), "slice_range");
  steps_.push_back([this, ia = a.id, io = o.id, start, rowlen, count] {
    const Tensor<T>& g = nodes_[io].grad;
    T* ga = nodes_[ia].grad.data() + start * rowlen;
    for (std::size_t i = 0; i < rowlen * count; ++i) ga[i] += g[i];
  });
  return o;
}

// --------------------------------------------------------------- reductions

template <typename T>
Var Tape<T>::sum(Var a) {
  T acc = 0;
  const Tensor<T>& in = val(a);
  for (std::size_t i = 0; i < in.size(); ++i) acc += in[i];
  Var o = push(Tensor<T>::scalar(acc), "sum");
  steps_.push_back([this, ia = a.id, io = o.id] {
    const T g = nodes_[io].grad[0];
    Tensor<T>& ga = nodes_[ia].grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return o;
}

template <typename T>
Var Tape<T>::dot(Var a, Var b) {
  if (val(a).size() != val(b).size())
    throw ShapeError("dot: length mismatch " + std::to_string(val(a).size()) +
                     " vs " + std::to_string(val(b).size()));
  const Tensor<T>& av = val(a);
  const Tensor<T>& bv = val(b);
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Var o = push(Tensor<T>::scalar(acc), "dot");
  steps_.push_back([this, ia = a.id, ib = b.id, io = o.id] {
    const T g = nodes_[io].grad[0];
    const Tensor<T>& av = nodes_[ia].value;
    const Tensor<T>& bv = nodes_[ib].value;
    Tensor<T>& ga = nodes_[ia].grad;
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g * bv[i];
    Tensor<T>& gb = nodes_[ib].grad;
    for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g * av[i];
  });
  return o;
}

// ----------------------------------------------------------- linear algebra

template <typename T>
Var Tape<T>::matmul_nn(Var a, Var b) {
  const Shape& sa = val(a).shape();
  const Shape& sb = val(b).shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
    throw ShapeError("matmul_nn: incompatible shapes " + shape_to_string(sa) +
                     " x " + shape_to_string(sb));
  ensure_eigen_threads();
  const auto m = static_cast<Eigen::Index>(sa[0]);
  const auto k = static_cast<Eigen::Index>(sa[1]);
  const auto n = static_cast<Eigen::Index>(sb[1]);
  Tensor<T> out({sa[0], sb[1]});
  MapM<T>(out.data(), m, n).noalias() =
      CMapM<T>(val(a).data(), m, k) * CMapM<T>(val(b).data(), k, n);
  Var o = push(std::move(out), "matmul_nn");
  steps_.push_back([this, ia = a.id, ib = b.id, io = o.id, m, k, n] {
    ensure_eigen_threads();
    CMapM<T> g(nodes_[io].grad.data(), m, n);
    CMapM<T> av(nodes_[ia].value.data(), m, k);
    CMapM<T> bv(nodes_[ib].value.data(), k, n);
    MapM<T>(nodes_[ia].grad.data(), m, k).noalias() += g * bv.transpose();
    MapM<T>(nodes_[ib].grad.data(), k, n).noalias() += av.transpose() * g;
  });
  return o;
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  const Shape& sa = val(a).shape();
  const Shape& sb = val(b).shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1])
    throw ShapeError("matmul_nt: incompatible shapes " + shape_to_string(sa) +
                     " x " + shape_to_string(sb) + "^T");
  ensure_eigen_threads();
  const auto m = static_cast<Eigen::Index>(sa[0]);
  const auto k = static_cast<Eigen::Index>(sa[1]);
  const auto n = static_cast<Eigen::Index>(sb[0]);
  Tensor<T> out({sa[0], sb[0]});
  MapM<T>(out.data(), m, n).noalias() =
      CMapM<T>(val(a).data(), m, k) *
      CMapM<T>(val(b).data(), n, k).transpose();
  Var o = push(std::move(out), "matmul_nt");
  steps_.push_back([this, ia = a.id, ib = b.id, io = o.id, m, k, n] {
    ensure_eigen_threads();
    CMapM<T> g(nodes_[io].grad.data(), m, n);
    CMapM<T> av(nodes_[ia].value.data(), m, k);
    CMapM<T> bv(nodes_[ib].value.data(), n, k);
    MapM<T>(nodes_[ia].grad.data(), m, k).noalias() += g * bv;
    MapM<T>(nodes_[ib].grad.data(), n, k).noalias() += g.transpose() * av;
  });
  return o;
}

// ------------------------------------------------------------- convolution

template <typename T>
Var Tape<T>::conv2d_same(Var input, Var kernel, Var bias) {
  const Shape& si = val(input).shape();
  const Shape& sk = val(kernel).shape();
  const Shape& sbias = val(bias).shape();
  if (si.size() != 3 && si.size() != 4)
    throw ShapeError("conv2d_same: input must be [H,W,C] or [B,H,W,C], got " +
                     shape_to_string(si));
  const bool batched = si.size() == 4;
  const std::size_t B = batched ? si[0] : 1;
  const std::size_t H = si[batched ? 1 : 0];
  const std::size_t W = si[batched ? 2 : 1];
  const std::size_t Ci = si[batched ? 3 : 2];
  if (sk.size() != 4 || sk[0] != 3 || sk[1] != 3)
    throw ShapeError("conv2d_same: kernel must be [3,3,Cin,Cout], got " +
                     shape_to_string(sk));
  if (sk[2] != Ci)
    throw ShapeError("conv2d_same: input channels " + std::to_string(Ci) +
                     " do not match kernel channels " + std::to_string(sk[2]));
  const std::size_t Co = sk[3];
  if (sbias.size() != 1 || sbias[0] != Co)
    throw ShapeError("conv2d_same: bias must be [Cout], got " +
                     shape_to_string(sbias));

  Shape so = si;
  so[batched ? 3 : 2] = Co;
  Tensor<T> out(so);
  detail::conv2d_forward(val(input).data(), val(kernel).data(),
                         val(bias).data(), out.data(), B, H, W, Ci, Co);
  Var o = push(std::move(out), "conv2d_same");
  steps_.push_back(
      [this, ii = input.id, ik = kernel.id, ib = bias.id, io = o.id, B, H, W,
       Ci, Co] {
        const T* g = nodes_[io].grad.data();
        detail::conv2d_grad_input(g, nodes_[ik].value.data(),
                                  nodes_[ii].grad.data(), B, H, W, Ci, Co);
        detail::conv2d_grad_kernel_bias(nodes_[ii].value.data(), g,
                                        nodes_[ik].grad.data(),
                                        nodes_[ib].grad.data(), B, H, W, Ci,
                                        Co);
      });
  return o;
}

// -------------------------------------------------------- RBF correlation

template <typename T>
Var Tape<T>::rbf_correlation(const std::vector<Var>& features,
                             T inv_two_sigma_sq) {
  if (features.empty())
    throw ShapeError("rbf_correlation: no feature vectors");
  if (inv_two_sigma_sq <= T(0))
    throw ConfigError("rbf_correlation: inv_two_sigma_sq must be positive");
  const std::size_t L = features.size();
  const std::size_t len = val(features[0]).size();
  for (const Var& f : features)
    if (val(f).size() != len)
      throw ShapeError("rbf_correlation: feature length mismatch");

  Tensor<T> out({L, L});
  for (std::size_t i = 0; i < L; ++i) out[i * L + i] = T(1);
  for (std::size_t i = 0; i < L; ++i) {
    const T* fi = val(features[i]).data();
    for (std::size_t j = i + 1; j < L; ++j) {
      const T* fj = val(features[j]).data();
      T d2 = 0;
      for (std::size_t t = 0; t < len; ++t) {
        const T d = fi[t] - fj[t];
        d2 += d * d;
      }
      const T m = std::exp(-inv_two_sigma_sq * d2);
      out[i * L + j] = m;
      out[j * L + i] = m;
    }
  }
  Var o = push(std::move(out), "rbf_correlation");
  std::vector<std::uint32_t> ids(L);
  for (std::size_t i = 0; i < L; ++i) ids[i] = features[i].id;
  steps_.push_back([this, ids = std::move(ids), io = o.id, inv_two_sigma_sq,
                    L, len] {
    const Tensor<T>& G = nodes_[io].grad;
    const Tensor<T>& M = nodes_[io].value;
    for (std::size_t i = 0; i < L; ++i) {
      const T* fi = nodes_[ids[i]].value.data();
      T* gi = nodes_[ids[i]].grad.data();
      for (std::size_t j = i + 1; j < L; ++j) {
        const T* fj = nodes_[ids[j]].value.data();
        T* gj = nodes_[ids[j]].grad.data();
        const T coeff = (G[i * L + j] + G[j * L + i]) *
                        (T(-2) * inv_two_sigma_sq) * M[i * L + j];
        if (coeff == T(0)) continue;
        for (std::size_t t = 0; t < len; ++t) {
          const T d = fi[t] - fj[t];
          gi[t] += coeff * d;
          gj[t] -= coeff * d;
        }
      }
    }
  });
  return o;
}

// ---------------------------------------------------------------- backward

template <typename T>
void Tape<T>::backward(Var loss) {
  if (consumed_)
    throw UsageError("backward called twice on the same tape");
  if (!loss.valid() || loss.id >= nodes_.size())
    throw UsageError("backward: invalid loss handle");
  check_scalar(loss, "backward");
  consumed_ = true;

  for (Node& n : nodes_) n.grad = Tensor<T>(n.value.shape());
  nodes_[loss.id].grad[0] = T(1);

  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();

  for (Node& n : nodes_) {
    if (n.hook == nullptr) continue;
    n.hook->saw_backward = true;
    if (!n.hook->requires_grad) continue;
    accum(n.hook->grad, n.grad);
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace spckd
