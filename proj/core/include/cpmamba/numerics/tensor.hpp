#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cpmamba::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t tape_id = 0;
  std::size_t node_id = kNoNode;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major real tensor. Copies of a Tensor share the same underlying
// value; primitives never mutate their inputs, they produce new tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  // A leaf that accumulates gradients during backward().
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  // Negative axes count from the back.
  std::size_t dim(int axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  // Writable view. Intended for leaves (initialization, optimizer updates);
  // mutating a tensor that is already recorded on a tape invalidates it.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  std::size_t node_id() const;

  // Deep copy of the value, detached from any tape.
  Tensor clone() const;
  // Same value, treated as a constant from here on.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  detail::TensorImpl& checked() const;
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Ordered record of primitive applications on one thread. Reverse recording
// order is a valid reverse topological order because every primitive's inputs
// exist before it runs.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  struct Record {
    std::vector<std::size_t> input_nodes;  // kNoNode for leaves and constants
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };

  // Registers `output` as produced from `inputs`. Called by primitives; custom
  // operations in other modules use this to hook into reverse mode.
  void record(const std::vector<Tensor>& inputs, const Tensor& output, BackwardFn fn);

  // Reverse sweep from a scalar loss. Leaf gradients accumulate; the tape is
  // spent afterwards and must be cleared before reuse.
  void backward(const Tensor& loss);

  // Drops every record, releasing intermediate tensors.
  void clear();

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }
  std::uint64_t id() const { return id_; }

  // Tape currently receiving records on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<Record> records_;
  std::uint64_t id_;
  bool spent_ = false;
};

// Makes `tape` the active tape on this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* previous_;
};

void backward(const Tensor& loss, Tape& tape);

namespace detail {

// True when an op over `inputs` must be recorded on the active tape.
bool needs_record(std::initializer_list<const Tensor*> inputs);

// Records `out` with `fn` if any input requires grad and a tape is active.
void attach(const std::vector<Tensor>& inputs, Tensor& out, Tape::BackwardFn fn);

}  // namespace detail

}  // namespace cpmamba::num
