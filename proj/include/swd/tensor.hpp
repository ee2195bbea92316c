#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace swd {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) n *= static_cast<size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

// NaN/Inf produced by a forward op, or a broken numeric contract.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file containers (magic/version/dims).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense array with no differentiation graph attached. Used for generated data,
// masks, images and anything else that never needs a gradient.
template <typename T>
struct Array {
  Shape shape;
  std::vector<T> data;

  Array() = default;
  explicit Array(Shape s, T fill = T(0))
      : shape(std::move(s)), data(shape_numel(shape), fill) {}
  Array(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape))
      throw std::invalid_argument("Array: data size " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
  }

  size_t numel() const { return data.size(); }

  // (c,y,x) indexing over the trailing three dims; leading dims collapse to
  // index 0, so a (1,C,H,W) array indexes like a (C,H,W) one.
  T& at(int c, int y, int x) {
    const size_t r = shape.size();
    return data[(static_cast<size_t>(c) * shape[r - 2] + y) * shape[r - 1] + x];
  }
  T at(int c, int y, int x) const {
    const size_t r = shape.size();
    return data[(static_cast<size_t>(c) * shape[r - 2] + y) * shape[r - 1] + x];
  }

  template <typename U>
  Array<U> cast() const {
    Array<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
struct Node;
template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// One record in the differentiation graph. `vjp` pulls this node's gradient
// into its parents' gradients (accumulating).
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> val;
  std::vector<T> grad;  // sized lazily during backward()
  std::vector<NodePtr<T>> parents;
  std::function<void(Node<T>&)> vjp;
  std::string name;  // set for parameters and named leaves
  const char* op = "leaf";
  bool requires_grad = false;

  size_t numel() const { return val.size(); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), T(0));
  }
  std::string debug_name() const {
    return name.empty() ? std::string(op) : name + " [" + op + "]";
  }
};

template <typename T>
void check_finite(const Node<T>& n) {
  for (T v : n.val)
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError("non-finite value in output of '" + n.debug_name() + "'");
}

// Handle to a graph node. Copies share the node.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr<T> n) : n_(std::move(n)) {}

  static Tensor leaf(Array<T> a, bool requires_grad = false, std::string name = {}) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(a.shape);
    n->val = std::move(a.data);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return Tensor(n);
  }
  static Tensor leaf(Shape s, std::vector<T> data, bool requires_grad = false,
                     std::string name = {}) {
    return leaf(Array<T>(std::move(s), std::move(data)), requires_grad, std::move(name));
  }
  static Tensor zeros(Shape s, bool requires_grad = false, std::string name = {}) {
    return leaf(Array<T>(std::move(s), T(0)), requires_grad, std::move(name));
  }
  static Tensor full(Shape s, T v, bool requires_grad = false, std::string name = {}) {
    return leaf(Array<T>(std::move(s), v), requires_grad, std::move(name));
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(n_->shape.size()); }
  size_t numel() const { return n_->numel(); }
  const std::vector<T>& val() const { return n_->val; }
  const std::vector<T>& grad() const { return n_->grad; }
  bool requires_grad() const { return n_->requires_grad; }
  const std::string& name() const { return n_->name; }
  NodePtr<T> node() const { return n_; }

  // Leaf mutation, for the optimizer and finite differencing. Graph nodes are
  // immutable once created.
  std::vector<T>& mutable_val() {
    if (n_->vjp) throw std::logic_error("mutable_val: only leaf tensors may be mutated");
    return n_->val;
  }
  std::vector<T>& mutable_grad() {
    n_->ensure_grad();
    return n_->grad;
  }

  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("item: tensor " + shape_str(shape()) + " is not scalar");
    return n_->val[0];
  }

  Array<T> to_array() const { return Array<T>(n_->shape, n_->val); }

 private:
  NodePtr<T> n_;
};

namespace detail {

template <typename T>
Tensor<T> make_op(const char* op, Shape shape, std::vector<T> val,
                  std::vector<NodePtr<T>> parents, std::function<void(Node<T>&)> vjp) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  n->parents = std::move(parents);
  n->vjp = std::move(vjp);
  n->op = op;
  check_finite(*n);
  return Tensor<T>(n);
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  const auto& bv = b.val();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return detail::make_op<T>("add", a.shape(), std::move(out), {a.node(), b.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              pa.ensure_grad();
                              pb.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i) {
                                pa.grad[i] += self.grad[i];
                                pb.grad[i] += self.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  const auto& bv = b.val();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return detail::make_op<T>("sub", a.shape(), std::move(out), {a.node(), b.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              pa.ensure_grad();
                              pb.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i) {
                                pa.grad[i] += self.grad[i];
                                pb.grad[i] -= self.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  const auto& bv = b.val();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return detail::make_op<T>("mul", a.shape(), std::move(out), {a.node(), b.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              pa.ensure_grad();
                              pb.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i) {
                                pa.grad[i] += self.grad[i] * pb.val[i];
                                pb.grad[i] += self.grad[i] * pa.val[i];
                              }
                            });
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return detail::make_op<T>("scalar_mul", a.shape(), std::move(out), {a.node()},
                            [s](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              pa.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                pa.grad[i] += self.grad[i] * s;
                            });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  return detail::make_op<T>("relu", a.shape(), std::move(out), {a.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              pa.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                if (pa.val[i] > T(0)) pa.grad[i] += self.grad[i];
                            });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] < T(0) ? -av[i] : av[i];
  // Subgradient 0 at the kink.
  return detail::make_op<T>("abs", a.shape(), std::move(out), {a.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              pa.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i) {
                                if (pa.val[i] > T(0))
                                  pa.grad[i] += self.grad[i];
                                else if (pa.val[i] < T(0))
                                  pa.grad[i] -= self.grad[i];
                              }
                            });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (T v : a.val()) acc += v;
  return detail::make_op<T>("sum", Shape{1}, std::vector<T>{acc}, {a.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              pa.ensure_grad();
                              const T g = self.grad[0];
                              for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g;
                            });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scalar_mul(sum(a), T(1) / static_cast<T>(a.numel()));
}

// ---------------------------------------------------------------------------
// softmax along an axis; rows along that axis sum to one.

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, int axis) {
  const Shape& s = a.shape();
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(s));
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const size_t n = s[axis];

  std::vector<T> out(a.numel());
  const auto& av = a.val();
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * n * inner + in;
      T mx = av[base];
      for (size_t k = 1; k < n; ++k) mx = std::max(mx, av[base + k * inner]);
      T z = T(0);
      for (size_t k = 0; k < n; ++k) {
        const T e = std::exp(av[base + k * inner] - mx);
        out[base + k * inner] = e;
        z += e;
      }
      const T zi = T(1) / z;
      for (size_t k = 0; k < n; ++k) out[base + k * inner] *= zi;
    }
  }
  return detail::make_op<T>(
      "softmax", s, std::move(out), {a.node()}, [outer, inner, n](Node<T>& self) {
        auto& pa = *self.parents[0];
        pa.ensure_grad();
        for (size_t o = 0; o < outer; ++o) {
          for (size_t in = 0; in < inner; ++in) {
            const size_t base = o * n * inner + in;
            T dot = T(0);
            for (size_t k = 0; k < n; ++k)
              dot += self.grad[base + k * inner] * self.val[base + k * inner];
            for (size_t k = 0; k < n; ++k) {
              const size_t i = base + k * inner;
              pa.grad[i] += self.val[i] * (self.grad[i] - dot);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// matmul: (M,K)x(K,P) or batched (B,M,K)x(B,K,P).

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || (sa.size() != 2 && sa.size() != 3))
    throw std::invalid_argument("matmul: expected rank-2 or rank-3 pairs, got " +
                                shape_str(sa) + " and " + shape_str(sb));
  const bool batched = sa.size() == 3;
  const size_t B = batched ? sa[0] : 1;
  const size_t M = sa[batched ? 1 : 0], K = sa[batched ? 2 : 1];
  const size_t Kb = sb[batched ? 1 : 0], P = sb[batched ? 2 : 1];
  if (K != Kb || (batched && sb[0] != sa[0]))
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(sa) + " and " +
                                shape_str(sb));

  Shape so = batched ? Shape{static_cast<int>(B), static_cast<int>(M), static_cast<int>(P)}
                     : Shape{static_cast<int>(M), static_cast<int>(P)};
  std::vector<T> out(B * M * P, T(0));
  const T* av = a.val().data();
  const T* bv = b.val().data();
  for (size_t nb = 0; nb < B; ++nb) {
    const T* am = av + nb * M * K;
    const T* bm = bv + nb * K * P;
    T* om = out.data() + nb * M * P;
    for (size_t i = 0; i < M; ++i) {
      for (size_t k = 0; k < K; ++k) {
        const T aik = am[i * K + k];
        const T* brow = bm + k * P;
        T* orow = om + i * P;
        for (size_t j = 0; j < P; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  return detail::make_op<T>(
      "matmul", std::move(so), std::move(out), {a.node(), b.node()},
      [B, M, K, P](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        pa.ensure_grad();
        pb.ensure_grad();
        for (size_t nb = 0; nb < B; ++nb) {
          const T* g = self.grad.data() + nb * M * P;
          const T* av = pa.val.data() + nb * M * K;
          const T* bv = pb.val.data() + nb * K * P;
          T* ga = pa.grad.data() + nb * M * K;
          T* gb = pb.grad.data() + nb * K * P;
          // dA = dC B^T
          for (size_t i = 0; i < M; ++i)
            for (size_t j = 0; j < P; ++j) {
              const T gij = g[i * P + j];
              const T* brow = bv + j;
              T* garow = ga + i * K;
              for (size_t k = 0; k < K; ++k) garow[k] += gij * brow[k * P];
            }
          // dB = A^T dC
          for (size_t k = 0; k < K; ++k)
            for (size_t i = 0; i < M; ++i) {
              const T aik = av[i * K + k];
              const T* grow = g + i * P;
              T* gbrow = gb + k * P;
              for (size_t j = 0; j < P; ++j) gbrow[j] += aik * grow[j];
            }
        }
      });
}

// Transposes the trailing matrix dims: (M,K)->(K,M) or (B,M,K)->(B,K,M).
template <typename T>
Tensor<T> transpose_mat(const Tensor<T>& a) {
  const Shape& s = a.shape();
  if (s.size() != 2 && s.size() != 3)
    throw std::invalid_argument("transpose_mat: expected rank-2/3, got " + shape_str(s));
  const bool batched = s.size() == 3;
  const size_t B = batched ? s[0] : 1;
  const size_t M = s[batched ? 1 : 0], K = s[batched ? 2 : 1];
  Shape so = batched ? Shape{static_cast<int>(B), static_cast<int>(K), static_cast<int>(M)}
                     : Shape{static_cast<int>(K), static_cast<int>(M)};
  std::vector<T> out(a.numel());
  const auto& av = a.val();
  for (size_t nb = 0; nb < B; ++nb)
    for (size_t i = 0; i < M; ++i)
      for (size_t k = 0; k < K; ++k)
        out[nb * M * K + k * M + i] = av[nb * M * K + i * K + k];
  return detail::make_op<T>("transpose_mat", std::move(so), std::move(out), {a.node()},
                            [B, M, K](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              pa.ensure_grad();
                              for (size_t nb = 0; nb < B; ++nb)
                                for (size_t i = 0; i < M; ++i)
                                  for (size_t k = 0; k < K; ++k)
                                    pa.grad[nb * M * K + i * K + k] +=
                                        self.grad[nb * M * K + k * M + i];
                            });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape s) {
  if (shape_numel(s) != a.numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(s));
  return detail::make_op<T>("reshape", std::move(s), a.val(), {a.node()},
                            [](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              pa.ensure_grad();
                              for (size_t i = 0; i < self.grad.size(); ++i)
                                pa.grad[i] += self.grad[i];
                            });
}

// ---------------------------------------------------------------------------
// concat along an axis.

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(s0.size()))
    throw std::invalid_argument("concat: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(s0));
  Shape so = s0;
  so[axis] = 0;
  for (const auto& p : parts) {
    const Shape& sp = p.shape();
    if (sp.size() != s0.size())
      throw std::invalid_argument("concat: rank mismatch " + shape_str(sp) + " vs " +
                                  shape_str(s0));
    for (size_t i = 0; i < sp.size(); ++i)
      if (static_cast<int>(i) != axis && sp[i] != s0[i])
        throw std::invalid_argument("concat: shape mismatch " + shape_str(sp) + " vs " +
                                    shape_str(s0) + " outside axis " + std::to_string(axis));
    so[axis] += sp[axis];
  }

  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

  std::vector<T> out(shape_numel(so));
  std::vector<NodePtr<T>> parents;
  std::vector<size_t> spans;  // per-part axis extent * inner
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    parents.push_back(p.node());
    spans.push_back(static_cast<size_t>(p.shape()[axis]) * inner);
  }
  const size_t total_span = static_cast<size_t>(so[axis]) * inner;
  size_t off = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& pv = parts[pi].val();
    for (size_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * spans[pi], pv.begin() + (o + 1) * spans[pi],
                out.begin() + o * total_span + off);
    off += spans[pi];
  }
  return detail::make_op<T>(
      "concat", std::move(so), std::move(out), std::move(parents),
      [outer, spans, total_span](Node<T>& self) {
        size_t off = 0;
        for (size_t pi = 0; pi < self.parents.size(); ++pi) {
          auto& p = *self.parents[pi];
          p.ensure_grad();
          for (size_t o = 0; o < outer; ++o) {
            const T* g = self.grad.data() + o * total_span + off;
            T* pg = p.grad.data() + o * spans[pi];
            for (size_t i = 0; i < spans[pi]; ++i) pg[i] += g[i];
          }
          off += spans[pi];
        }
      });
}

// ---------------------------------------------------------------------------
// Row-band ops on NCHW maps (used by the windowed attention).

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int start, int rows) {
  const Shape& s = a.shape();
  if (s.size() != 4)
    throw std::invalid_argument("slice_rows: expected NCHW, got " + shape_str(s));
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  if (start < 0 || rows < 1 || start + rows > H)
    throw std::invalid_argument("slice_rows: band [" + std::to_string(start) + "," +
                                std::to_string(start + rows) + ") outside height " +
                                std::to_string(H));
  std::vector<T> out(static_cast<size_t>(N) * C * rows * W);
  const auto& av = a.val();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const size_t src = ((static_cast<size_t>(n) * C + c) * H + start) * W;
      const size_t dst = (static_cast<size_t>(n) * C + c) * rows * W;
      std::copy(av.begin() + src, av.begin() + src + static_cast<size_t>(rows) * W,
                out.begin() + dst);
    }
  return detail::make_op<T>(
      "slice_rows", Shape{N, C, rows, W}, std::move(out), {a.node()},
      [N, C, H, W, start, rows](Node<T>& self) {
        auto& pa = *self.parents[0];
        pa.ensure_grad();
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            const size_t src = (static_cast<size_t>(n) * C + c) * rows * W;
            const size_t dst = ((static_cast<size_t>(n) * C + c) * H + start) * W;
            for (size_t i = 0; i < static_cast<size_t>(rows) * W; ++i)
              pa.grad[dst + i] += self.grad[src + i];
          }
      });
}

// Reassembles overlapping row bands into a full-height map, averaging rows
// covered by more than one band.
template <typename T>
Tensor<T> scatter_rows_mean(const std::vector<Tensor<T>>& bands,
                            const std::vector<int>& starts, int H) {
  if (bands.empty() || bands.size() != starts.size())
    throw std::invalid_argument("scatter_rows_mean: bands/starts mismatch");
  const Shape& s0 = bands[0].shape();
  if (s0.size() != 4)
    throw std::invalid_argument("scatter_rows_mean: expected NCHW bands, got " + shape_str(s0));
  const int N = s0[0], C = s0[1], W = s0[3];
  std::vector<int> coverage(H, 0);
  std::vector<int> rows_of(bands.size());
  for (size_t bi = 0; bi < bands.size(); ++bi) {
    const Shape& sb = bands[bi].shape();
    if (sb[0] != N || sb[1] != C || sb[3] != W)
      throw std::invalid_argument("scatter_rows_mean: band shape mismatch " + shape_str(sb) +
                                  " vs " + shape_str(s0));
    rows_of[bi] = sb[2];
    if (starts[bi] < 0 || starts[bi] + sb[2] > H)
      throw std::invalid_argument("scatter_rows_mean: band outside height");
    for (int r = 0; r < sb[2]; ++r) coverage[starts[bi] + r]++;
  }
  for (int y = 0; y < H; ++y)
    if (coverage[y] == 0)
      throw std::invalid_argument("scatter_rows_mean: row " + std::to_string(y) +
                                  " not covered by any band");

  std::vector<T> out(static_cast<size_t>(N) * C * H * W, T(0));
  std::vector<NodePtr<T>> parents;
  for (size_t bi = 0; bi < bands.size(); ++bi) {
    parents.push_back(bands[bi].node());
    const auto& bv = bands[bi].val();
    const int rows = rows_of[bi];
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int r = 0; r < rows; ++r) {
          const size_t src = ((static_cast<size_t>(n) * C + c) * rows + r) * W;
          const size_t dst = ((static_cast<size_t>(n) * C + c) * H + starts[bi] + r) * W;
          for (int x = 0; x < W; ++x) out[dst + x] += bv[src + x];
        }
  }
  std::vector<T> inv_cov(H);
  for (int y = 0; y < H; ++y) inv_cov[y] = T(1) / static_cast<T>(coverage[y]);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y) {
        const size_t o = ((static_cast<size_t>(n) * C + c) * H + y) * W;
        for (int x = 0; x < W; ++x) out[o + x] *= inv_cov[y];
      }
  auto starts_c = starts;
  return detail::make_op<T>(
      "scatter_rows_mean", Shape{N, C, H, W}, std::move(out), std::move(parents),
      [N, C, H, W, starts_c, rows_of, inv_cov](Node<T>& self) {
        for (size_t bi = 0; bi < self.parents.size(); ++bi) {
          auto& p = *self.parents[bi];
          p.ensure_grad();
          const int rows = rows_of[bi];
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
              for (int r = 0; r < rows; ++r) {
                const int y = starts_c[bi] + r;
                const size_t src = ((static_cast<size_t>(n) * C + c) * H + y) * W;
                const size_t dst = ((static_cast<size_t>(n) * C + c) * rows + r) * W;
                for (int x = 0; x < W; ++x)
                  p.grad[dst + x] += self.grad[src + x] * inv_cov[y];
              }
        }
      });
}

// ---------------------------------------------------------------------------
// l1_mean: mean absolute difference, optionally over mask-true entries only.
// The mask is data, not a graph input; an all-false mask yields 0 and sets
// *empty_mask (a warning, not an error).

template <typename T>
Tensor<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& mask,
                  bool* empty_mask = nullptr) {
  detail::require_same_shape("l1_mean", a, b);
  std::shared_ptr<std::vector<T>> m;
  if (mask.defined()) {
    detail::require_same_shape("l1_mean(mask)", a, mask);
    m = std::make_shared<std::vector<T>>(mask.val());
  }
  const auto& av = a.val();
  const auto& bv = b.val();
  T total = T(0);
  size_t count = 0;
  for (size_t i = 0; i < av.size(); ++i) {
    if (m && (*m)[i] == T(0)) continue;
    total += std::abs(av[i] - bv[i]);
    ++count;
  }
  if (empty_mask) *empty_mask = (count == 0);
  const T inv = count == 0 ? T(0) : T(1) / static_cast<T>(count);
  return detail::make_op<T>("l1_mean", Shape{1}, std::vector<T>{total * inv},
                            {a.node(), b.node()}, [m, inv](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              pa.ensure_grad();
                              pb.ensure_grad();
                              const T g = self.grad[0] * inv;
                              for (size_t i = 0; i < pa.val.size(); ++i) {
                                if (m && (*m)[i] == T(0)) continue;
                                const T d = pa.val[i] - pb.val[i];
                                const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
                                pa.grad[i] += s;
                                pb.grad[i] -= s;
                              }
                            });
}

template <typename T>
Tensor<T> l1_mean(const Tensor<T>& a, const Tensor<T>& b) {
  return l1_mean(a, b, Tensor<T>{});
}

// ---------------------------------------------------------------------------
// Reverse-mode pass. Seeds d(loss)/d(loss)=1 and propagates through the graph
// in reverse topological order; each reachable node is visited exactly once.
// Gradients of leaves with requires_grad accumulate across calls; everything
// else is reset at the start of each pass.

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a defined scalar tensor");
  if (!std::isfinite(static_cast<double>(loss.val()[0])))
    throw NumericError("backward: loss is not finite");

  // Iterative post-order DFS (graphs can be deep).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<T>* p = n->parents[i++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) {
    const bool is_param_leaf = !n->vjp && n->requires_grad;
    if (is_param_leaf)
      n->ensure_grad();  // keep accumulated gradient
    else
      n->grad.assign(n->numel(), T(0));
  }
  order.back()->grad[0] = T(1);  // loss node is last in post-order

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->vjp) (*it)->vjp(**it);
}

}  // namespace swd
