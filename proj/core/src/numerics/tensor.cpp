#include "cpmamba/numerics/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "cpmamba/errors.hpp"

namespace cpmamba::num {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<detail::TensorImpl>()) {
  impl_->data.assign(numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<detail::TensorImpl>()) {
  if (numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + to_string(shape) + " holds " + std::to_string(numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.impl_->requires_grad = true;
  return t;
}

detail::TensorImpl& Tensor::checked() const {
  if (!impl_) throw Error("tensor: use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(int axis) const {
  const auto& s = shape();
  const int r = static_cast<int>(s.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " + to_string(s));
  return s[static_cast<std::size_t>(a)];
}

std::size_t Tensor::size() const { return checked().data.size(); }

std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() { return checked().data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("tensor: item() on tensor of shape " + to_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool on) { checked().requires_grad = on; }

bool Tensor::is_leaf() const { return checked().is_leaf; }

bool Tensor::has_grad() const { return checked().grad.size() == impl_->data.size(); }

std::span<const double> Tensor::grad() const { return checked().grad; }

std::span<double> Tensor::mutable_grad() { return checked().ensure_grad(); }

void Tensor::zero_grad() { checked().grad.clear(); }

std::size_t Tensor::node_id() const { return checked().node_id; }

Tensor Tensor::clone() const {
  Tensor t(shape(), std::vector<double>(impl_->data));
  t.impl_->requires_grad = impl_->requires_grad && impl_->is_leaf;
  return t;
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = checked().shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = nullptr;
}

void Tape::record(const std::vector<Tensor>& inputs, const Tensor& output, BackwardFn fn) {
  if (spent_) throw GraphError("tape: recording onto a spent tape; call clear() first");
  Record rec;
  rec.input_nodes.reserve(inputs.size());
  for (const auto& in : inputs) {
    const auto& impl = *in.impl();
    rec.input_nodes.push_back(impl.tape_id == id_ ? impl.node_id : kNoNode);
  }
  auto& out = *output.impl();
  out.tape_id = id_;
  out.node_id = records_.size();
  out.requires_grad = true;
  out.is_leaf = false;
  rec.output = output.impl();
  rec.backward = std::move(fn);
  records_.push_back(std::move(rec));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward: undefined loss");
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
  const auto& impl = *loss.impl();
  if (impl.tape_id != id_ || impl.node_id >= records_.size() || records_[impl.node_id].output != loss.impl()) {
    throw GraphError("backward: loss is not recorded on this tape (detached graph)");
  }
  if (spent_) throw GraphError("backward: tape already consumed");
  spent_ = true;
  loss.impl()->ensure_grad()[0] = 1.0;
  for (std::size_t i = impl.node_id + 1; i-- > 0;) {
    auto& rec = records_[i];
    if (rec.output->grad.size() != rec.output->data.size()) continue;
    rec.backward(rec.output->grad);
  }
}

void Tape::clear() {
  records_.clear();
  spent_ = false;
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradGuard::NoGradGuard() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = previous_; }

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

namespace detail {

bool needs_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void attach(const std::vector<Tensor>& inputs, Tensor& out, Tape::BackwardFn fn) {
  if (g_active_tape == nullptr) return;
  bool any = false;
  for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
  if (!any) return;
  g_active_tape->record(inputs, out, std::move(fn));
}

}  // namespace detail

}  // namespace cpmamba::num
