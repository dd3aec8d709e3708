#include "epsfd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "epsfd/kernels.hpp"

namespace epsfd::ad {

std::int64_t shape_size(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace {

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument("op '" + op + "': shape mismatch " + shape_str(a) +
                              " vs " + shape_str(b));
}

void check_positive_shape(const Shape& s) {
  for (auto d : s)
    if (d <= 0) throw std::invalid_argument("shape dimensions must be positive, got " + shape_str(s));
}

}  // namespace

void TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_positive_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  std::int64_t n = shape_size(shape);
  impl->shape = std::move(shape);
  impl->values.assign(static_cast<std::size_t>(n), value);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  check_positive_shape(shape);
  if (shape_size(shape) != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(impl);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

std::int64_t Tensor::rows() const {
  if (impl_->shape.size() != 2) throw std::logic_error("rows() on non-2D tensor");
  return impl_->shape[0];
}

std::int64_t Tensor::cols() const {
  if (impl_->shape.size() != 2) throw std::logic_error("cols() on non-2D tensor");
  return impl_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on tensor of size " + std::to_string(size()));
  return impl_->values[0];
}

std::vector<double>& Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->values.size(), 0.0); }

// ---- graph -----------------------------------------------------------------

namespace {
thread_local Graph* g_active_graph = nullptr;
}

Graph::Scope::Scope(Graph& g) : previous_(g_active_graph) { g_active_graph = &g; }
Graph::Scope::~Scope() { g_active_graph = previous_; }

Graph* Graph::active() { return g_active_graph; }

void Graph::record(std::string op, std::vector<std::shared_ptr<TensorImpl>> inputs,
                   std::shared_ptr<TensorImpl> output, std::function<void()> backward_fn) {
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output),
                        std::move(backward_fn)});
}

void Graph::backward(const Tensor& root) {
  if (root.size() != 1)
    throw std::invalid_argument("backward() requires a scalar root, got shape " +
                                shape_str(root.shape()));
  root.impl()->ensure_grad();
  root.impl()->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->output->ensure_grad();
    bool any = false;
    for (const auto& in : it->inputs) {
      if (in->requires_grad) {
        in->ensure_grad();
        any = true;
      }
    }
    if (any) it->backward_fn();
  }
}

// ---- op helpers -------------------------------------------------------------

namespace {

bool tracing(const std::vector<Tensor>& inputs) {
  if (!Graph::active()) return false;
  for (const auto& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

Tensor make_output(const Shape& shape, bool requires_grad) {
  Tensor out = Tensor::zeros(shape, requires_grad);
  return out;
}

void record_if(const std::string& op, const std::vector<Tensor>& inputs,
               const Tensor& out, std::function<void()> fn) {
  if (!tracing(inputs)) return;
  out.impl()->requires_grad = true;
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(inputs.size());
  for (const auto& t : inputs) impls.push_back(t.impl());
  Graph::active()->record(op, std::move(impls), out.impl(), std::move(fn));
}

// Elementwise unary op with pointwise derivative df(x, y).
template <class F, class DF>
Tensor unary_op(const char* name, const Tensor& x, F f, DF df) {
  Tensor out = make_output(x.shape(), false);
  std::int64_t n = x.size();
  kernels::map(x.values().data(), out.values().data(), n, f);
  auto xi = x.impl();
  auto oi = out.impl();
  record_if(name, {x}, out, [xi, oi, df, n]() {
    if (!xi->requires_grad) return;
    const double* xv = xi->values.data();
    const double* ov = oi->values.data();
    const double* og = oi->grad.data();
    double* xg = xi->grad.data();
    if (kernels::detail::use_openmp(n)) {
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) xg[i] += og[i] * df(xv[i], ov[i]);
    } else {
      for (std::int64_t i = 0; i < n; ++i) xg[i] += og[i] * df(xv[i], ov[i]);
    }
  });
  return out;
}

// Elementwise binary op; da/db give the partials wrt each operand.
template <class F, class DA, class DB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  if (a.shape() != b.shape()) shape_error(name, a.shape(), b.shape());
  Tensor out = make_output(a.shape(), false);
  std::int64_t n = a.size();
  kernels::zip(a.values().data(), b.values().data(), out.values().data(), n, f);
  auto ai = a.impl();
  auto bi = b.impl();
  auto oi = out.impl();
  record_if(name, {a, b}, out, [ai, bi, oi, da, db, n]() {
    const double* av = ai->values.data();
    const double* bv = bi->values.data();
    const double* og = oi->grad.data();
    if (ai->requires_grad) {
      double* ag = ai->grad.data();
      for (std::int64_t i = 0; i < n; ++i) ag[i] += og[i] * da(av[i], bv[i]);
    }
    if (bi->requires_grad) {
      double* bg = bi->grad.data();
      for (std::int64_t i = 0; i < n; ++i) bg[i] += og[i] * db(av[i], bv[i]);
    }
  });
  return out;
}

void require_2d(const char* op, const Tensor& x) {
  if (x.shape().size() != 2)
    throw std::invalid_argument(std::string("op '") + op + "' requires a 2-D tensor, got " +
                                shape_str(x.shape()));
}

}  // namespace

// ---- arithmetic -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op("add", a, b, [](double x, double y) { return x + y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op("sub", a, b, [](double x, double y) { return x - y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op("mul", a, b, [](double x, double y) { return x * y; },
                   [](double, double y) { return y; },
                   [](double x, double) { return x; });
}

namespace {

template <class F>
Tensor rowvec_op(const char* name, const Tensor& x, const Tensor& v, F f, bool is_add) {
  require_2d(name, x);
  if (v.shape().size() != 1 || v.shape()[0] != x.cols()) shape_error(name, x.shape(), v.shape());
  std::int64_t r = x.rows(), n = x.cols();
  Tensor out = make_output(x.shape(), false);
  const double* xv = x.values().data();
  const double* vv = v.values().data();
  double* ov = out.values().data();
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < n; ++j) ov[i * n + j] = f(xv[i * n + j], vv[j]);
  auto xi = x.impl();
  auto vi = v.impl();
  auto oi = out.impl();
  record_if(name, {x, v}, out, [xi, vi, oi, r, n, is_add]() {
    const double* og = oi->grad.data();
    if (xi->requires_grad) {
      double* xg = xi->grad.data();
      const double* vv2 = vi->values.data();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < n; ++j)
          xg[i * n + j] += is_add ? og[i * n + j] : og[i * n + j] * vv2[j];
    }
    if (vi->requires_grad) {
      double* vg = vi->grad.data();
      const double* xv2 = xi->values.data();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < n; ++j)
          vg[j] += is_add ? og[i * n + j] : og[i * n + j] * xv2[i * n + j];
    }
  });
  return out;
}

}  // namespace

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  return rowvec_op("add_rowvec", x, v, [](double a, double b) { return a + b; }, true);
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
  return rowvec_op("mul_rowvec", x, v, [](double a, double b) { return a * b; }, false);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_output({m, n}, false);
  kernels::matmul(a.values().data(), b.values().data(), out.values().data(), m, k, n);
  auto ai = a.impl();
  auto bi = b.impl();
  auto oi = out.impl();
  record_if("matmul", {a, b}, out, [ai, bi, oi, m, k, n]() {
    const double* og = oi->grad.data();
    if (ai->requires_grad)
      kernels::matmul_nt_acc(og, bi->values.data(), ai->grad.data(), m, n, k);
    if (bi->requires_grad)
      kernels::matmul_tn_acc(ai->values.data(), og, bi->grad.data(), m, k, n);
  });
  return out;
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(kernels::block_sum(x.values().data(), x.size()));
  auto xi = x.impl();
  auto oi = out.impl();
  std::int64_t n = x.size();
  record_if("sum", {x}, out, [xi, oi, n]() {
    double g = oi->grad[0];
    double* xg = xi->grad.data();
    for (std::int64_t i = 0; i < n; ++i) xg[i] += g;
  });
  return out;
}

Tensor mean(const Tensor& x) {
  std::int64_t n = x.size();
  Tensor out = Tensor::scalar(kernels::block_sum(x.values().data(), n) / static_cast<double>(n));
  auto xi = x.impl();
  auto oi = out.impl();
  record_if("mean", {x}, out, [xi, oi, n]() {
    double g = oi->grad[0] / static_cast<double>(n);
    double* xg = xi->grad.data();
    for (std::int64_t i = 0; i < n; ++i) xg[i] += g;
  });
  return out;
}

Tensor row_sum(const Tensor& x) {
  require_2d("row_sum", x);
  std::int64_t r = x.rows(), n = x.cols();
  Tensor out = make_output({r}, false);
  const double* xv = x.values().data();
  for (std::int64_t i = 0; i < r; ++i)
    out.values()[static_cast<std::size_t>(i)] = kernels::block_sum(xv + i * n, n);
  auto xi = x.impl();
  auto oi = out.impl();
  record_if("row_sum", {x}, out, [xi, oi, r, n]() {
    double* xg = xi->grad.data();
    const double* og = oi->grad.data();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < n; ++j) xg[i * n + j] += og[i];
  });
  return out;
}

// ---- elementwise ------------------------------------------------------------

// Kink convention: derivative contribution is 0 exactly at |x| kinks and
// hinge boundaries (one-sided subgradient).

Tensor abs(const Tensor& x) {
  return unary_op("abs", x, [](double v) { return std::fabs(v); },
                  [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& x) {
  return unary_op("square", x, [](double v) { return v * v; },
                  [](double v, double) { return 2.0 * v; });
}

Tensor exp(const Tensor& x) {
  return unary_op("exp", x, [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op("log", x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary_op("tanh", x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op("sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor neg(const Tensor& x) {
  return unary_op("neg", x, [](double v) { return -v; },
                  [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double c) {
  return unary_op("scale", x, [c](double v) { return c * v; },
                  [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary_op("add_scalar", x, [c](double v) { return v + c; },
                  [](double, double) { return 1.0; });
}

Tensor hinge_above(const Tensor& x, double limit) {
  return unary_op("hinge_above", x, [limit](double v) { return v > limit ? v - limit : 0.0; },
                  [limit](double v, double) { return v > limit ? 1.0 : 0.0; });
}

Tensor hinge_below(const Tensor& x, double limit) {
  return unary_op("hinge_below", x, [limit](double v) { return v < limit ? limit - v : 0.0; },
                  [limit](double v, double) { return v < limit ? -1.0 : 0.0; });
}

// ---- restructuring ----------------------------------------------------------

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_2d("concat", a);
  require_2d("concat", b);
  if (a.rows() != b.rows()) shape_error("concat", a.shape(), b.shape());
  std::int64_t r = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out = make_output({r, ca + cb}, false);
  double* ov = out.values().data();
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::int64_t i = 0; i < r; ++i) {
    for (std::int64_t j = 0; j < ca; ++j) ov[i * (ca + cb) + j] = av[i * ca + j];
    for (std::int64_t j = 0; j < cb; ++j) ov[i * (ca + cb) + ca + j] = bv[i * cb + j];
  }
  auto ai = a.impl();
  auto bi = b.impl();
  auto oi = out.impl();
  record_if("concat", {a, b}, out, [ai, bi, oi, r, ca, cb]() {
    const double* og = oi->grad.data();
    if (ai->requires_grad) {
      double* ag = ai->grad.data();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < ca; ++j) ag[i * ca + j] += og[i * (ca + cb) + j];
    }
    if (bi->requires_grad) {
      double* bg = bi->grad.data();
      for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < cb; ++j) bg[i * cb + j] += og[i * (ca + cb) + ca + j];
    }
  });
  return out;
}

Tensor slice_cols(const Tensor& x, std::int64_t start, std::int64_t stride, std::int64_t count) {
  require_2d("slice", x);
  std::int64_t r = x.rows(), n = x.cols();
  if (start < 0 || stride < 1 || count < 1 || start + (count - 1) * stride >= n)
    throw std::invalid_argument("op 'slice': selection (start " + std::to_string(start) +
                                ", stride " + std::to_string(stride) + ", count " +
                                std::to_string(count) + ") out of range for " +
                                shape_str(x.shape()));
  Tensor out = make_output({r, count}, false);
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < count; ++j)
      ov[i * count + j] = xv[i * n + start + j * stride];
  auto xi = x.impl();
  auto oi = out.impl();
  record_if("slice", {x}, out, [xi, oi, r, n, start, stride, count]() {
    double* xg = xi->grad.data();
    const double* og = oi->grad.data();
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < count; ++j)
        xg[i * n + start + j * stride] += og[i * count + j];
  });
  return out;
}

// ---- dispatch ---------------------------------------------------------------

Tensor apply(const std::string& op_kind, const std::vector<Tensor>& inputs, double c) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n)
      throw std::invalid_argument("op '" + op_kind + "' expects " + std::to_string(n) +
                                  " inputs, got " + std::to_string(inputs.size()));
  };
  if (op_kind == "add") { need(2); return add(inputs[0], inputs[1]); }
  if (op_kind == "sub") { need(2); return sub(inputs[0], inputs[1]); }
  if (op_kind == "mul") { need(2); return mul(inputs[0], inputs[1]); }
  if (op_kind == "add_rowvec") { need(2); return add_rowvec(inputs[0], inputs[1]); }
  if (op_kind == "mul_rowvec") { need(2); return mul_rowvec(inputs[0], inputs[1]); }
  if (op_kind == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
  if (op_kind == "sum") { need(1); return sum(inputs[0]); }
  if (op_kind == "mean") { need(1); return mean(inputs[0]); }
  if (op_kind == "row_sum") { need(1); return row_sum(inputs[0]); }
  if (op_kind == "abs") { need(1); return abs(inputs[0]); }
  if (op_kind == "square") { need(1); return square(inputs[0]); }
  if (op_kind == "exp") { need(1); return exp(inputs[0]); }
  if (op_kind == "log") { need(1); return log(inputs[0]); }
  if (op_kind == "tanh") { need(1); return tanh(inputs[0]); }
  if (op_kind == "sigmoid") { need(1); return sigmoid(inputs[0]); }
  if (op_kind == "relu") { need(1); return relu(inputs[0]); }
  if (op_kind == "neg") { need(1); return neg(inputs[0]); }
  if (op_kind == "scale") { need(1); return scale(inputs[0], c); }
  if (op_kind == "add_scalar") { need(1); return add_scalar(inputs[0], c); }
  if (op_kind == "hinge_above") { need(1); return hinge_above(inputs[0], c); }
  if (op_kind == "hinge_below") { need(1); return hinge_below(inputs[0], c); }
  if (op_kind == "concat") { need(2); return concat_cols(inputs[0], inputs[1]); }
  if (op_kind == "slice") {
    need(1);
    // c encodes the start column; stride 1, half the columns.
    std::int64_t start = static_cast<std::int64_t>(c);
    std::int64_t count = std::max<std::int64_t>(1, inputs[0].cols() - start);
    return slice_cols(inputs[0], start, 1, count);
  }
  throw std::invalid_argument("unknown op kind '" + op_kind + "'");
}

std::vector<std::string> op_kinds() {
  return {"add",  "sub",    "mul",     "add_rowvec", "mul_rowvec", "matmul",
          "sum",  "mean",   "row_sum", "abs",        "square",     "exp",
          "log",  "tanh",   "sigmoid", "relu",       "neg",        "scale",
          "add_scalar", "hinge_above", "hinge_below", "concat",    "slice"};
}

// ---- finite differences ------------------------------------------------------

FdReport finite_difference_check(
    const std::function<Tensor()>& f,
    const std::vector<std::pair<std::string, Tensor>>& params,
    double step, double tolerance) {
  if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be > 0");

  for (const auto& [name, p] : params) {
    (void)name;
    p.impl()->grad.assign(p.impl()->values.size(), 0.0);
  }

  {
    Graph graph;
    Graph::Scope scope(graph);
    Tensor loss = f();
    graph.backward(loss);
  }

  FdReport report;
  for (const auto& [name, p] : params) {
    FdEntry entry;
    entry.param = name;
    auto impl = p.impl();
    std::vector<double> ad_grad = impl->grad;
    for (std::size_t i = 0; i < impl->values.size(); ++i) {
      double saved = impl->values[i];
      impl->values[i] = saved + step;
      double up = f().item();
      impl->values[i] = saved - step;
      double down = f().item();
      impl->values[i] = saved;
      double fd = (up - down) / (2.0 * step);
      double ad = ad_grad[i];
      double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-8});
      double rel = std::fabs(ad - fd) / denom;
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = static_cast<std::int64_t>(i);
      }
    }
    entry.ok = entry.max_rel_err < tolerance;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.all_ok = report.all_ok && entry.ok;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace epsfd::ad
