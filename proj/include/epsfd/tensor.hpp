#pragma once

// Reverse-mode automatic differentiation over dense double tensors. A
// dynamic tape (Graph) records one node per operation while active; nodes
// are replayed once, in reverse order, by backward(). Tensors are
// shared-ownership values: copying a Tensor aliases the same storage.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace epsfd::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until touched by backward
  bool requires_grad = false;

  void ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::int64_t size() const { return static_cast<std::int64_t>(impl_->values.size()); }
  std::int64_t rows() const;
  std::int64_t cols() const;

  std::vector<double>& values() { return impl_->values; }
  const std::vector<double>& values() const { return impl_->values; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Tape of recorded operations. One Graph is active per thread at a time;
// ops record nodes only when a graph is active and some input requires
// grad. Construction and backward are single-threaded per graph.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // RAII activation on the current thread.
  class Scope {
   public:
    explicit Scope(Graph& g);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph* previous_;
  };

  static Graph* active();

  // Public so callers can add custom differentiable operations; the
  // backward closure reads output->grad and accumulates into input grads.
  void record(std::string op, std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::shared_ptr<TensorImpl> output,
              std::function<void()> backward_fn);

  // Seeds root (a scalar) with gradient 1 and replays the tape in reverse,
  // accumulating additively into every requires-grad tensor it reaches.
  void backward(const Tensor& root);

  void clear() { nodes_.clear(); }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    std::function<void()> backward_fn;
  };
  std::vector<Node> nodes_;
};

// ---- operations -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Row broadcast: v (width n) applied to every row of x [r, n].
Tensor add_rowvec(const Tensor& x, const Tensor& v);
Tensor mul_rowvec(const Tensor& x, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& x);       // -> scalar
Tensor mean(const Tensor& x);      // -> scalar
Tensor row_sum(const Tensor& x);   // [r, n] -> [r]

Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

// Clamp-hinge helpers: relu of a shifted input.
Tensor hinge_above(const Tensor& x, double limit);  // relu(x - limit)
Tensor hinge_below(const Tensor& x, double limit);  // relu(limit - x)

Tensor concat_cols(const Tensor& a, const Tensor& b);

// Columns start, start+stride, ... (count of them) of a 2-D tensor.
Tensor slice_cols(const Tensor& x, std::int64_t start, std::int64_t stride,
                  std::int64_t count);

// String-dispatch entry point over the op set; used by the generic
// gradient-check suite. Scalar-parameter ops take their constant in c.
Tensor apply(const std::string& op_kind, const std::vector<Tensor>& inputs,
             double c = 0.0);
std::vector<std::string> op_kinds();

// ---- gradient verification harness ----------------------------------------

struct FdEntry {
  std::string param;
  double max_rel_err = 0.0;
  std::int64_t worst_index = -1;
  bool ok = true;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_err = 0.0;
  bool all_ok = true;
};

// Compares backward() gradients of the scalar produced by f against central
// finite differences, parameter by parameter. f is re-evaluated with
// perturbed parameter values and must be deterministic. Relative error uses
// |ad - fd| / max(|ad|, |fd|, 1e-8).
FdReport finite_difference_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double step = 1e-6, double tolerance = 1e-5);

}  // namespace epsfd::ad
