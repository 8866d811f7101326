#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gazemotion/error.hpp"

namespace gazemotion {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

template <typename S>
struct TensorImpl {
  Shape shape;
  std::vector<S> data;
  std::vector<S> grad;
  bool requires_grad = false;
  bool leaf = true;
};

}  // namespace detail

/// Dense row-major array with shared handle semantics.
///
/// Copies of a Tensor alias the same storage. Ops never write into their
/// inputs; parameters are mutated in place only by optimizers.
template <typename S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  explicit Tensor(Shape shape, S fill = S(0)) : impl_(std::make_shared<detail::TensorImpl<S>>()) {
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<S> data) : impl_(std::make_shared<detail::TensorImpl<S>>()) {
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("shape " + shape_str(shape) + " needs " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(data.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), S(0)); }
  static Tensor scalar(S value) { return Tensor(Shape{1}, value); }

  /// Identity matrix of size n x n.
  static Tensor eye(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.impl_->data[i * n + i] = S(1);
    return t;
  }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<S> data() { return impl_->data; }
  std::span<const S> data() const { return impl_->data; }
  const std::vector<S>& values() const& { return impl_->data; }
  // Copy for temporaries, so `for (v : f().values())` does not dangle.
  std::vector<S> values() && { return impl_->data; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<S> grad() { return impl_->grad; }
  std::span<const S> grad() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), S(0));
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return impl_->leaf; }

  S item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  /// Element access by multi-index; convenience for tests and small loops.
  template <typename... I>
  S at(I... idx) const {
    const std::size_t ix[] = {static_cast<std::size_t>(idx)...};
    if (sizeof...(I) != rank()) throw DimensionError("at(): wrong index count for " + shape_str(shape()));
    std::size_t off = 0;
    for (std::size_t a = 0; a < sizeof...(I); ++a) {
      if (ix[a] >= impl_->shape[a]) throw DimensionError("at(): index out of range");
      off = off * impl_->shape[a] + ix[a];
    }
    return impl_->data[off];
  }

  /// Deep copy with no tape history.
  Tensor clone() const {
    Tensor t(impl_->shape, impl_->data);
    t.impl_->requires_grad = impl_->requires_grad;
    return t;
  }

  const std::shared_ptr<detail::TensorImpl<S>>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<S>> impl_;
};

template <typename S>
class Tape;

/// Gradients produced by one reverse pass, keyed by tensor storage.
template <typename S>
class Gradients {
 public:
  /// Gradient of the loss with respect to `t`; empty when `t` did not contribute.
  std::span<const S> of(const Tensor<S>& t) const {
    auto it = buffers_.find(t.impl().get());
    if (it == buffers_.end()) return {};
    return it->second;
  }

  /// Adds `scale * grad` into the `.grad` buffer of every leaf that requires grad.
  void accumulate_into_leaves(S scale = S(1)) const {
    for (const auto& leaf : leaves_) {
      auto& dst = leaf->grad;
      const auto& src = buffers_.at(leaf.get());
      if (dst.empty()) dst.assign(src.size(), S(0));
      if (scale == S(1)) {
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
      } else {
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += scale * src[i];
      }
    }
  }

 private:
  friend class Tape<S>;
  std::unordered_map<const detail::TensorImpl<S>*, std::vector<S>> buffers_;
  std::vector<std::shared_ptr<detail::TensorImpl<S>>> leaves_;
};

namespace debug {

/// Ops whose backward rule is deliberately scaled by 1.5 (negative controls for gradient checks).
inline std::set<std::string>& corrupted_ops() {
  static std::set<std::string> ops;
  return ops;
}
inline void corrupt_backward(std::string op) { corrupted_ops().insert(std::move(op)); }
inline void clear_corruptions() { corrupted_ops().clear(); }

}  // namespace debug

/// Ordered record of differentiable operations.
///
/// Ops append to the tape that is active on the calling thread (see
/// `record()`). With no active tape nothing is recorded, which is how
/// inference runs.
template <typename S>
class Tape {
 public:
  using ImplPtr = std::shared_ptr<detail::TensorImpl<S>>;
  /// Receives d(loss)/d(output) and adds into the per-input gradient spans.
  /// A span is empty when that input does not require grad.
  using BackwardFn = std::function<void(std::span<const S>, const std::vector<std::span<S>>&)>;

  class Recording {
   public:
    explicit Recording(Tape& tape) : previous_(active_ref()) { active_ref() = &tape; }
    ~Recording() { active_ref() = previous_; }
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] Recording record() { return Recording(*this); }

  static Tape* active() { return active_ref(); }

  void push(std::string op, std::vector<ImplPtr> inputs, ImplPtr output, BackwardFn fn) {
    if (debug::corrupted_ops().count(op) != 0) {
      fn = [inner = std::move(fn)](std::span<const S> gout, const std::vector<std::span<S>>& gin) {
        std::vector<S> scaled(gout.begin(), gout.end());
        for (auto& g : scaled) g *= S(1.5);
        inner(scaled, gin);
      };
    }
    entries_.push_back({std::move(op), std::move(inputs), std::move(output), std::move(fn)});
  }

  std::size_t size() const { return entries_.size(); }
  std::string_view op_name(std::size_t i) const { return entries_.at(i).op; }
  void mark_stochastic() { stochastic_ = true; }
  bool stochastic() const { return stochastic_; }
  void clear() {
    entries_.clear();
    stochastic_ = false;
  }

  /// Reverse pass from a scalar loss. Does not touch any `.grad` buffer.
  Gradients<S> compute_gradients(const Tensor<S>& loss) const {
    if (!loss.defined() || loss.numel() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    Gradients<S> out;
    auto& buf = out.buffers_;
    buf[loss.impl().get()] = std::vector<S>{S(1)};

    std::set<const detail::TensorImpl<S>*> seen_leaves;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      auto found = buf.find(it->output.get());
      if (found == buf.end()) continue;
      std::vector<std::span<S>> gin;
      gin.reserve(it->inputs.size());
      for (const auto& in : it->inputs) {
        if (!in->requires_grad) {
          gin.emplace_back();
          continue;
        }
        auto& g = buf[in.get()];
        if (g.empty()) g.assign(in->data.size(), S(0));
        gin.emplace_back(g);
        if (in->leaf && seen_leaves.insert(in.get()).second) out.leaves_.push_back(in);
      }
      // `found` may be invalidated by insertions above; look it up again.
      const auto& gout = buf.at(it->output.get());
      it->fn(gout, gin);
    }
    if (loss.impl()->leaf && loss.requires_grad()) out.leaves_.push_back(loss.impl());
    return out;
  }

 private:
  struct Entry {
    std::string op;
    std::vector<ImplPtr> inputs;
    ImplPtr output;
    BackwardFn fn;
  };

  static Tape*& active_ref() {
    static thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<Entry> entries_;
  bool stochastic_ = false;
};

/// Reverse pass that accumulates d(loss)/d(leaf) into every leaf's `.grad`.
template <typename S>
void backward(const Tape<S>& tape, const Tensor<S>& loss) {
  tape.compute_gradients(loss).accumulate_into_leaves();
}

}  // namespace gazemotion
