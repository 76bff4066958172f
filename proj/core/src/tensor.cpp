#include "derain/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "derain/constants.hpp"
#include "derain/parallel.hpp"

namespace derain {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '(';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out << 'x';
    out << s[i];
  }
  out << ')';
  return out.str();
}

int shape_numel(const Shape& s) {
  long long n = 1;
  for (int e : s) {
    if (e <= 0) throw std::invalid_argument("tensor: nonpositive extent in shape " + shape_str(s));
    n *= e;
  }
  if (n > (1LL << 31) - 1) throw std::invalid_argument("tensor: shape too large " + shape_str(s));
  return static_cast<int>(n);
}

namespace {

using detail::TensorNode;

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::domain_error(std::string(op) + ": produced a non-finite value");
    }
  }
}

std::shared_ptr<TensorNode> make_leaf(const Shape& shape, std::vector<double> data,
                                      bool requires_grad) {
  const int n = shape_numel(shape);
  if (n != static_cast<int>(data.size())) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " expects " +
                                std::to_string(n) + " values, got " +
                                std::to_string(data.size()));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

// How two operand shapes line up for an elementwise op.
enum class Broadcast {
  ElementWise,   // identical shapes
  ScalarLeft,    // a has one element
  ScalarRight,   // b has one element
  ChannelLeft,   // a is (1,H,W), b is (C,H,W)
  ChannelRight,  // b is (1,H,W), a is (C,H,W)
};

Broadcast classify_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::ElementWise;
  if (shape_numel(a) == 1) return Broadcast::ScalarLeft;
  if (shape_numel(b) == 1) return Broadcast::ScalarRight;
  if (a.size() == 3 && b.size() == 3 && a[1] == b[1] && a[2] == b[2]) {
    if (a[0] == 1) return Broadcast::ChannelLeft;
    if (b[0] == 1) return Broadcast::ChannelRight;
  }
  throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) + " and " +
                              shape_str(b) + " are not broadcast-compatible");
}

// Shared machinery for add/sub/mul: fwd(a,b) -> value, dfda/dfdb -> partials.
template <class F, class Da, class Db>
Tensor binary_ew(const char* op, const Tensor& a, const Tensor& b, F fwd, Da dfda, Db dfdb) {
  const Broadcast kind = classify_broadcast(op, a.shape(), b.shape());
  const bool a_big = kind == Broadcast::ElementWise || kind == Broadcast::ScalarRight ||
                     kind == Broadcast::ChannelRight;
  const Shape& out_shape = a_big ? a.shape() : b.shape();
  const int n = shape_numel(out_shape);

  // Per-output-element index into each operand.
  int plane = 1;
  if (kind == Broadcast::ChannelLeft || kind == Broadcast::ChannelRight) {
    plane = out_shape[1] * out_shape[2];
  }
  auto a_index = [kind, plane](int i) -> int {
    switch (kind) {
      case Broadcast::ScalarLeft: return 0;
      case Broadcast::ChannelLeft: return i % plane;
      default: return i;
    }
  };
  auto b_index = [kind, plane](int i) -> int {
    switch (kind) {
      case Broadcast::ScalarRight: return 0;
      case Broadcast::ChannelRight: return i % plane;
      default: return i;
    }
  };

  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(av[a_index(i)], bv[b_index(i)]);
  check_finite(out, op);

  auto backward = [a, b, a_index, b_index, dfda, dfdb, n](TensorNode& self) {
    const auto& g = self.grad;
    const auto& av2 = a.data();
    const auto& bv2 = b.data();
    if (a.requires_grad()) {
      auto& ga = a.node()->grad;
      for (int i = 0; i < n; ++i) {
        const int ia = a_index(i), ib = b_index(i);
        ga[static_cast<size_t>(ia)] += g[static_cast<size_t>(i)] * dfda(av2[ia], bv2[ib]);
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.node()->grad;
      for (int i = 0; i < n; ++i) {
        const int ia = a_index(i), ib = b_index(i);
        gb[static_cast<size_t>(ib)] += g[static_cast<size_t>(i)] * dfdb(av2[ia], bv2[ib]);
      }
    }
  };
  return Tensor::from_op(op, out_shape, std::move(out), {a, b}, backward);
}

}  // namespace

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), 0.0),
                          requires_grad));
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(make_leaf(shape, std::vector<double>(static_cast<size_t>(shape_numel(shape)), value),
                          requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  return Tensor(make_leaf(shape, std::move(data), requires_grad));
}

Tensor Tensor::from_op(const char* op, const Shape& shape, std::vector<double> data,
                       std::vector<Tensor> parents,
                       std::function<void(detail::TensorNode&)> backward) {
  auto node = make_leaf(shape, std::move(data), false);
  node->op = op;
  bool needs_graph = false;
  for (const auto& p : parents) needs_graph = needs_graph || p.requires_grad();
  if (needs_graph) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

double Tensor::value() const {
  if (numel() != 1) {
    throw std::invalid_argument("tensor: value() needs a one-element tensor, shape is " +
                                shape_str(shape()));
  }
  return node_->data[0];
}

double Tensor::at(int c, int y, int x) const {
  if (rank() != 3) {
    throw std::invalid_argument("tensor: at(c,y,x) needs rank 3, shape is " + shape_str(shape()));
  }
  const int H = dim(1), W = dim(2);
  return node_->data[static_cast<size_t>((c * H + y) * W + x)];
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor: no gradient recorded");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(make_leaf(node_->shape, node_->data, false));
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor sub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }

Tensor reciprocal(const Tensor& a) {
  const auto& av = a.data();
  const int n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (std::abs(av[static_cast<size_t>(i)]) < kEpsRecip) {
      throw std::domain_error("reciprocal: |input| below " + std::to_string(kEpsRecip) +
                              " at element " + std::to_string(i));
    }
    out[static_cast<size_t>(i)] = 1.0 / av[static_cast<size_t>(i)];
  }
  auto backward = [a, n](TensorNode& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.node()->grad;
    const auto& g = self.grad;
    const auto& y = self.data;  // y = 1/a, d(1/a)/da = -y^2
    for (int i = 0; i < n; ++i) {
      ga[static_cast<size_t>(i)] -= g[static_cast<size_t>(i)] * y[static_cast<size_t>(i)] *
                                    y[static_cast<size_t>(i)];
    }
  };
  return Tensor::from_op("reciprocal", a.shape(), std::move(out), {a}, backward);
}

Tensor relu(const Tensor& a) {
  const auto& av = a.data();
  const int n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = std::max(av[static_cast<size_t>(i)], 0.0);
  auto backward = [a, n](TensorNode& self) {
    if (!a.requires_grad()) return;
    auto& ga = a.node()->grad;
    const auto& g = self.grad;
    const auto& av2 = a.data();
    for (int i = 0; i < n; ++i) {
      if (av2[static_cast<size_t>(i)] > 0.0) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    }
  };
  return Tensor::from_op("relu", a.shape(), std::move(out), {a}, backward);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d: input must be rank 3 (C,H,W), got " +
                                shape_str(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv2d: kernel must be rank 4 (Cout,Cin,k,k), got " +
                                shape_str(kernel.shape()));
  }
  const int cin = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int cout = kernel.dim(0), kin = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kh != kw) {
    throw std::invalid_argument("conv2d: kernel window must be square, got " +
                                shape_str(kernel.shape()));
  }
  if (kin != cin) {
    throw std::invalid_argument("conv2d: kernel input-channel extent " + std::to_string(kin) +
                                " does not match input channel extent " + std::to_string(cin));
  }
  if (bias.rank() != 1 || bias.dim(0) != cout) {
    throw std::invalid_argument("conv2d: bias must be rank 1 with extent " + std::to_string(cout) +
                                ", got " + shape_str(bias.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  if (kh > H + 2 * padding || kw > W + 2 * padding) {
    throw std::invalid_argument("conv2d: kernel extent " + std::to_string(kh) +
                                " exceeds padded input " + std::to_string(H + 2 * padding) + "x" +
                                std::to_string(W + 2 * padding));
  }
  const int oh = (H + 2 * padding - kh) / stride + 1;
  const int ow = (W + 2 * padding - kw) / stride + 1;

  const auto& in = input.data();
  const auto& ker = kernel.data();
  const auto& bv = bias.data();
  std::vector<double> out(static_cast<size_t>(cout) * oh * ow);

  const long long work = 1LL * cout * oh * ow * cin * kh * kw;
  const bool wide = work >= 100000;

  auto forward_channel = [&](int co) {
    const double b = bv[static_cast<size_t>(co)];
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b;
        const int iy0 = oy * stride - padding;
        const int ix0 = ox * stride - padding;
        for (int ci = 0; ci < cin; ++ci) {
          const double* in_c = in.data() + static_cast<size_t>(ci) * H * W;
          const double* ker_c = ker.data() + (static_cast<size_t>(co) * cin + ci) * kh * kw;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= H) continue;
            const double* in_row = in_c + static_cast<size_t>(iy) * W;
            const double* ker_row = ker_c + static_cast<size_t>(ky) * kw;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= W) continue;
              acc += in_row[ix] * ker_row[kx];
            }
          }
        }
        out[(static_cast<size_t>(co) * oh + oy) * ow + ox] = acc;
      }
    }
  };
  if (wide) {
    parallel_for(0, cout, forward_channel);
  } else {
    for (int co = 0; co < cout; ++co) forward_channel(co);
  }
  check_finite(out, "conv2d");

  auto backward = [input, kernel, bias, stride, padding, cin, H, W, cout, kh, kw, oh, ow,
                   wide](TensorNode& self) {
    const auto& g = self.grad;
    const auto& in = input.data();
    const auto& ker = kernel.data();

    if (input.requires_grad()) {
      auto& gin = input.node()->grad;
      auto input_channel = [&](int ci) {
        double* gin_c = gin.data() + static_cast<size_t>(ci) * H * W;
        for (int co = 0; co < cout; ++co) {
          const double* g_c = g.data() + static_cast<size_t>(co) * oh * ow;
          const double* ker_c = ker.data() + (static_cast<size_t>(co) * cin + ci) * kh * kw;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy0 = oy * stride - padding;
            for (int ox = 0; ox < ow; ++ox) {
              const double gv = g_c[static_cast<size_t>(oy) * ow + ox];
              if (gv == 0.0) continue;
              const int ix0 = ox * stride - padding;
              for (int ky = 0; ky < kh; ++ky) {
                const int iy = iy0 + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx;
                  if (ix < 0 || ix >= W) continue;
                  gin_c[static_cast<size_t>(iy) * W + ix] +=
                      gv * ker_c[static_cast<size_t>(ky) * kw + kx];
                }
              }
            }
          }
        }
      };
      if (wide) {
        parallel_for(0, cin, input_channel);
      } else {
        for (int ci = 0; ci < cin; ++ci) input_channel(ci);
      }
    }

    if (kernel.requires_grad()) {
      auto& gker = kernel.node()->grad;
      auto kernel_channel = [&](int co) {
        const double* g_c = g.data() + static_cast<size_t>(co) * oh * ow;
        for (int ci = 0; ci < cin; ++ci) {
          const double* in_c = in.data() + static_cast<size_t>(ci) * H * W;
          double* gker_c = gker.data() + (static_cast<size_t>(co) * cin + ci) * kh * kw;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              double acc = 0.0;
              for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * stride - padding + ky;
                if (iy < 0 || iy >= H) continue;
                for (int ox = 0; ox < ow; ++ox) {
                  const int ix = ox * stride - padding + kx;
                  if (ix < 0 || ix >= W) continue;
                  acc += g_c[static_cast<size_t>(oy) * ow + ox] *
                         in_c[static_cast<size_t>(iy) * W + ix];
                }
              }
              gker_c[static_cast<size_t>(ky) * kw + kx] += acc;
            }
          }
        }
      };
      if (wide) {
        parallel_for(0, cout, kernel_channel);
      } else {
        for (int co = 0; co < cout; ++co) kernel_channel(co);
      }
    }

    if (bias.requires_grad()) {
      auto& gb = bias.node()->grad;
      for (int co = 0; co < cout; ++co) {
        const double* g_c = g.data() + static_cast<size_t>(co) * oh * ow;
        double acc = 0.0;
        for (int i = 0; i < oh * ow; ++i) acc += g_c[i];
        gb[static_cast<size_t>(co)] += acc;
      }
    }
  };

  return Tensor::from_op("conv2d", {cout, oh, ow}, std::move(out), {input, kernel, bias}, backward);
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no parts");
  const int H = parts[0].dim(1), W = parts[0].dim(2);
  int channels = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].rank() != 3) {
      throw std::invalid_argument("concat_channels: part " + std::to_string(p) +
                                  " must be rank 3, got " + shape_str(parts[p].shape()));
    }
    if (parts[p].dim(1) != H || parts[p].dim(2) != W) {
      throw std::invalid_argument("concat_channels: part " + std::to_string(p) + " extent " +
                                  shape_str(parts[p].shape()) + " does not match leading part " +
                                  shape_str(parts[0].shape()) + " spatially");
    }
    channels += parts[p].dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(channels) * H * W);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());

  auto backward = [parts](TensorNode& self) {
    const auto& g = self.grad;
    size_t offset = 0;
    for (const auto& p : parts) {
      const size_t n = p.data().size();
      if (p.requires_grad()) {
        auto& gp = p.node()->grad;
        for (size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      }
      offset += n;
    }
  };
  return Tensor::from_op("concat_channels", {channels, H, W}, std::move(out), parts, backward);
}

Tensor reduce_mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("reduce_mse: shapes " + shape_str(pred.shape()) + " and " +
                                shape_str(target.shape()) + " differ");
  }
  const int n = pred.numel();
  const auto& pv = pred.data();
  const auto& tv = target.data();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = pv[static_cast<size_t>(i)] - tv[static_cast<size_t>(i)];
    acc += d * d;
  }
  const double mse = acc / n;
  if (!std::isfinite(mse)) throw std::domain_error("reduce_mse: produced a non-finite value");

  auto backward = [pred, target, n](TensorNode& self) {
    const double g = self.grad[0];
    const auto& pv2 = pred.data();
    const auto& tv2 = target.data();
    const double scale = 2.0 * g / n;
    if (pred.requires_grad()) {
      auto& gp = pred.node()->grad;
      for (int i = 0; i < n; ++i) {
        gp[static_cast<size_t>(i)] += scale * (pv2[static_cast<size_t>(i)] - tv2[static_cast<size_t>(i)]);
      }
    }
    if (target.requires_grad()) {
      auto& gt = target.node()->grad;
      for (int i = 0; i < n; ++i) {
        gt[static_cast<size_t>(i)] -= scale * (pv2[static_cast<size_t>(i)] - tv2[static_cast<size_t>(i)]);
      }
    }
  };
  return Tensor::from_op("reduce_mse", {1}, {mse}, {pred, target}, backward);
}

Tensor reduce_sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  if (!std::isfinite(acc)) throw std::domain_error("reduce_sum: produced a non-finite value");
  auto backward = [a](TensorNode& self) {
    if (!a.requires_grad()) return;
    const double g = self.grad[0];
    for (auto& gv : a.node()->grad) gv += g;
  };
  return Tensor::from_op("reduce_sum", {1}, {acc}, {a}, backward);
}

void backward(const Tensor& loss) {
  if (!loss.valid() || loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a one-element tensor");
  }
  if (!loss.requires_grad()) return;  // nothing reachable wants gradients

  // Iterative post-order DFS: topological order with inputs first.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      TensorNode* parent = top.node->parents[top.next_parent++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (!node->backward_fn) continue;
    node->ensure_grad();
    for (auto& parent : node->parents) {
      if (parent->requires_grad) parent->ensure_grad();
    }
    node->backward_fn(*node);
  }
}

}  // namespace derain
