#include "hrmesh/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

#include "hrmesh/error.hpp"

namespace hrmesh::ad {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

thread_local bool g_grad_enabled = true;

std::string shape(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

void require_segments(const char* op, const Tensor& v, std::span<const int> segment, int n) {
  if (static_cast<int>(segment.size()) != v.rows()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": segment ids do not match row count");
  }
  for (int s : segment) {
    if (s < 0 || s >= n) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": segment id out of range");
  }
}

Tensor make(int rows, int cols, std::vector<double> value, std::initializer_list<const Tensor*> parents,
            std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Tensor* p : parents) any = any || p->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Tensor* p : parents) node->parents.push_back(p->node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

// Parent gradient buffer, or nullptr when the parent does not need one.
double* pgrad(Node& self, std::size_t k) {
  Node& p = *self.parents[k];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D df) {
  std::vector<double> out(a.size());
  const auto& x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make(a.rows(), a.cols(), std::move(out), {&a}, [df](Node& self) {
    double* g = pgrad(self, 0);
    if (!g) return;
    const auto& x = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * df(x[i], self.value[i]);
  });
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) { return full(rows, cols, 0.0, requires_grad); }

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
  return from(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, value), requires_grad);
}

Tensor Tensor::from(int rows, int cols, std::vector<double> data, bool requires_grad) {
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows) * cols) {
    throw Error(ErrorCode::ShapeMismatch, "tensor data length does not match shape");
  }
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from(1, 1, {value}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on a " + shape(*this) + " tensor");
  return node_->value[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return from(rows(), cols(), data(), false); }

void Tensor::backward() const {
  if (size() != 1) throw Error(ErrorCode::ShapeMismatch, "backward() needs a scalar, got " + shape(*this));
  if (!std::isfinite(node_->value[0])) throw Error(ErrorCode::NonFinite, "backward() from a non-finite loss");
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  // Release the tape; leaves keep their accumulated gradients.
  for (Node* n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return make(m, n, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    const ConstMap dc(self.grad.data(), m, n);
    if (double* ga = pgrad(self, 0)) {
      MutMap(ga, m, k).noalias() += dc * ConstMap(self.parents[1]->value.data(), k, n).transpose();
    }
    if (double* gb = pgrad(self, 1)) {
      MutMap(gb, k, n).noalias() += ConstMap(self.parents[0]->value.data(), m, k).transpose() * dc;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make(a.rows(), a.cols(), std::move(out), {&a, &b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (double* g = pgrad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make(a.rows(), a.cols(), std::move(out), {&a, &b}, [](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make(a.rows(), a.cols(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x[i];
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) mismatch("add_row", a, row);
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(a.data());
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * c + j] += row.data()[j];
  }
  return make(r, c, std::move(out), {&a, &row}, [r, c](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = pgrad(self, 1)) {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) g[j] += self.grad[static_cast<std::size_t>(i) * c + j];
      }
    }
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) mismatch("mul_col", a, col);
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * c + j;
      out[k] = a.data()[k] * col.data()[i];
    }
  }
  return make(r, c, std::move(out), {&a, &col}, [r, c](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& s = self.parents[1]->value;
    double* ga = pgrad(self, 0);
    double* gs = pgrad(self, 1);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * c + j;
        if (ga) ga[k] += self.grad[k] * s[i];
        if (gs) gs[i] += self.grad[k] * x[k];
      }
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same("minimum", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a.data()[i], b.data()[i]);
  return make(a.rows(), a.cols(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    double* ga = pgrad(self, 0);
    double* gb = pgrad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x[i] <= y[i]) {
        if (ga) ga[i] += self.grad[i];
      } else if (gb) {
        gb[i] += self.grad[i];
      }
    }
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same("maximum", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], b.data()[i]);
  return make(a.rows(), a.cols(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& y = self.parents[1]->value;
    double* ga = pgrad(self, 0);
    double* gb = pgrad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x[i] >= y[i]) {
        if (ga) ga[i] += self.grad[i];
      } else if (gb) {
        gb[i] += self.grad[i];
      }
    }
  });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) mismatch("concat_cols", a, b);
  const int r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(static_cast<std::size_t>(r) * c);
  for (int i = 0; i < r; ++i) {
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(i) * ca, ca, out.begin() + static_cast<std::ptrdiff_t>(i) * c);
    std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(i) * cb, cb,
                out.begin() + static_cast<std::ptrdiff_t>(i) * c + ca);
  }
  return make(r, c, std::move(out), {&a, &b}, [r, ca, cb, c](Node& self) {
    double* ga = pgrad(self, 0);
    double* gb = pgrad(self, 1);
    for (int i = 0; i < r; ++i) {
      const double* g = self.grad.data() + static_cast<std::size_t>(i) * c;
      if (ga) {
        for (int j = 0; j < ca; ++j) ga[static_cast<std::size_t>(i) * ca + j] += g[j];
      }
      if (gb) {
        for (int j = 0; j < cb; ++j) gb[static_cast<std::size_t>(i) * cb + j] += g[ca + j];
      }
    }
  });
}

Tensor slice_cols(const Tensor& a, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "slice_cols out of range for " + shape(a));
  }
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<std::size_t>(r) * count);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < count; ++j) out[static_cast<std::size_t>(i) * count + j] = a.data()[static_cast<std::size_t>(i) * c + begin + j];
  }
  return make(r, count, std::move(out), {&a}, [r, c, begin, count](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < count; ++j) g[static_cast<std::size_t>(i) * c + begin + j] += self.grad[static_cast<std::size_t>(i) * count + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const int> index) {
  const int c = a.cols();
  const int n = static_cast<int>(index.size());
  std::vector<double> out(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n; ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw Error(ErrorCode::ShapeMismatch, "gather_rows index out of range");
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(index[i]) * c, c,
                out.begin() + static_cast<std::ptrdiff_t>(i) * c);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(n, c, std::move(out), {&a}, [idx = std::move(idx), c](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (int j = 0; j < c; ++j) g[static_cast<std::size_t>(idx[i]) * c + j] += self.grad[i * c + j];
      }
    }
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary(a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor softmax_rows(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  for (int i = 0; i < r; ++i) {
    const double* x = a.data().data() + static_cast<std::size_t>(i) * c;
    double* y = out.data() + static_cast<std::size_t>(i) * c;
    const double m = c ? *std::max_element(x, x + c) : 0.0;
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += (y[j] = std::exp(x[j] - m));
    for (int j = 0; j < c; ++j) y[j] /= s;
  }
  return make(r, c, std::move(out), {&a}, [r, c](Node& self) {
    double* g = pgrad(self, 0);
    if (!g) return;
    for (int i = 0; i < r; ++i) {
      const std::size_t o = static_cast<std::size_t>(i) * c;
      double dot_gy = 0.0;
      for (int j = 0; j < c; ++j) dot_gy += self.grad[o + j] * self.value[o + j];
      for (int j = 0; j < c; ++j) g[o + j] += self.value[o + j] * (self.grad[o + j] - dot_gy);
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make(1, 1, {s}, {&a}, [](Node& self) {
    if (double* g = pgrad(self, 0)) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw Error(ErrorCode::ShapeMismatch, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_cols(const Tensor& a) {
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(r, 0.0);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out[i] += a.data()[static_cast<std::size_t>(i) * c + j];
  }
  return make(r, 1, std::move(out), {&a}, [r, c](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) g[static_cast<std::size_t>(i) * c + j] += self.grad[i];
      }
    }
  });
}

Tensor rowdot(const Tensor& a, const Tensor& b) { return sum_cols(mul(a, b)); }

Tensor segment_sum(const Tensor& values, std::span<const int> segment, int n) {
  require_segments("segment_sum", values, segment, n);
  const int c = values.cols();
  std::vector<double> out(static_cast<std::size_t>(n) * c, 0.0);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(segment[i]) * c + j] += values.data()[i * c + j];
  }
  std::vector<int> seg(segment.begin(), segment.end());
  return make(n, c, std::move(out), {&values}, [seg = std::move(seg), c](Node& self) {
    if (double* g = pgrad(self, 0)) {
      for (std::size_t i = 0; i < seg.size(); ++i) {
        for (int j = 0; j < c; ++j) g[i * c + j] += self.grad[static_cast<std::size_t>(seg[i]) * c + j];
      }
    }
  });
}

Tensor segment_mean(const Tensor& values, std::span<const int> segment, int n) {
  require_segments("segment_mean", values, segment, n);
  std::vector<double> count(n, 0.0);
  for (int s : segment) count[s] += 1.0;
  std::vector<double> inv(segment.size());
  for (std::size_t i = 0; i < segment.size(); ++i) inv[i] = 1.0 / count[segment[i]];
  const int rows = static_cast<int>(inv.size());
  return segment_sum(mul_col(values, Tensor::from(rows, 1, std::move(inv))), segment, n);
}

Tensor segment_softmax(const Tensor& scores, std::span<const int> segment, int n) {
  if (scores.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "segment_softmax expects a column vector");
  require_segments("segment_softmax", scores, segment, n);
  const auto& x = scores.data();
  std::vector<double> mx(n, -INFINITY), total(n, 0.0), out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mx[segment[i]] = std::max(mx[segment[i]], x[i]);
  for (std::size_t i = 0; i < x.size(); ++i) total[segment[i]] += (out[i] = std::exp(x[i] - mx[segment[i]]));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total[segment[i]];
  std::vector<int> seg(segment.begin(), segment.end());
  return make(scores.rows(), 1, std::move(out), {&scores}, [seg = std::move(seg), n](Node& self) {
    double* g = pgrad(self, 0);
    if (!g) return;
    std::vector<double> dot_gy(n, 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) dot_gy[seg[i]] += self.grad[i] * self.value[i];
    for (std::size_t i = 0; i < seg.size(); ++i) g[i] += self.value[i] * (self.grad[i] - dot_gy[seg[i]]);
  });
}

Tensor gaussian_logprob(const Tensor& x, const Tensor& mean, const Tensor& log_std) {
  require_same("gaussian_logprob", x, mean);
  require_same("gaussian_logprob", x, log_std);
  for (double s : log_std.data()) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "non-finite log standard deviation");
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = (x.data()[i] - mean.data()[i]) * std::exp(-log_std.data()[i]);
    out[i] = -0.5 * z * z - log_std.data()[i] - half_log_2pi;
  }
  return make(x.rows(), x.cols(), std::move(out), {&x, &mean, &log_std}, [](Node& self) {
    const auto& xv = self.parents[0]->value;
    const auto& mv = self.parents[1]->value;
    const auto& sv = self.parents[2]->value;
    double* gx = pgrad(self, 0);
    double* gm = pgrad(self, 1);
    double* gs = pgrad(self, 2);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double inv = std::exp(-sv[i]);
      const double z = (xv[i] - mv[i]) * inv;
      if (gx) gx[i] -= self.grad[i] * z * inv;
      if (gm) gm[i] += self.grad[i] * z * inv;
      if (gs) gs[i] += self.grad[i] * (z * z - 1.0);
    }
  });
}

Tensor gaussian_entropy(const Tensor& log_std) {
  const double c = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  return add_scalar(log_std, c);
}

Tensor bernoulli_logprob(const Tensor& action, const Tensor& logit) {
  require_same("bernoulli_logprob", action, logit);
  std::vector<double> out(logit.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = action.data()[i] * logit.data()[i] - softplus_value(logit.data()[i]);
  }
  return make(logit.rows(), logit.cols(), std::move(out), {&action, &logit}, [](Node& self) {
    const auto& a = self.parents[0]->value;
    const auto& l = self.parents[1]->value;
    double* ga = pgrad(self, 0);
    double* gl = pgrad(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (ga) ga[i] += self.grad[i] * l[i];
      if (gl) gl[i] += self.grad[i] * (a[i] - sigmoid_value(l[i]));
    }
  });
}

Tensor bernoulli_entropy(const Tensor& logit) {
  return unary(
      logit, [](double l) { return softplus_value(l) - l * sigmoid_value(l); },
      [](double l, double) {
        const double p = sigmoid_value(l);
        return -l * p * (1.0 - p);
      });
}

}  // namespace hrmesh::ad
