#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hrmesh::ad {

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pushes this->grad into parents

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// 2D row-major tensor sharing a node of the reverse-mode graph. Copies alias.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor full(int rows, int cols, double value, bool requires_grad = false);
  static Tensor from(int rows, int cols, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& data() const { return node_->value; }
  // Mutation is only safe on leaves that are not part of a live graph.
  std::vector<double>& mutable_data() { return node_->value; }
  double at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
  double item() const;

  // Empty until a backward pass reached this tensor.
  const std::vector<double>& grad() const { return node_->grad; }
  std::vector<double>& mutable_grad() { return node_->grad; }
  void zero_grad();

  // Accumulates d(this)/d(leaf) into every reachable leaf; this must be 1x1.
  void backward() const;

  // Leaf copy of the value without history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Linear algebra and elementwise arithmetic.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);  // row is 1 x cols, broadcast down
Tensor mul_col(const Tensor& a, const Tensor& col);  // col is rows x 1, broadcast across
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor square(const Tensor& a);

// Structure.
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int begin, int count);
Tensor gather_rows(const Tensor& a, std::span<const int> index);

// Activations.
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);  // zero gradient outside [lo, hi]
Tensor softmax_rows(const Tensor& a);

// Reductions.
Tensor sum(const Tensor& a);       // 1 x 1
Tensor mean(const Tensor& a);      // 1 x 1
Tensor sum_cols(const Tensor& a);  // rows x 1
Tensor rowdot(const Tensor& a, const Tensor& b);

// Segment reductions over rows: segment[i] in [0, n) names the output row of input row i.
Tensor segment_sum(const Tensor& values, std::span<const int> segment, int n);
Tensor segment_mean(const Tensor& values, std::span<const int> segment, int n);
// Softmax of a column vector within each segment.
Tensor segment_softmax(const Tensor& scores, std::span<const int> segment, int n);

// Distributions, evaluated elementwise.
Tensor gaussian_logprob(const Tensor& x, const Tensor& mean, const Tensor& log_std);
Tensor gaussian_entropy(const Tensor& log_std);
Tensor bernoulli_logprob(const Tensor& action, const Tensor& logit);
Tensor bernoulli_entropy(const Tensor& logit);

}  // namespace hrmesh::ad
