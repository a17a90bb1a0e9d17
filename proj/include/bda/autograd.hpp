#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bda/tensor.hpp"

namespace bda {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer();
};

}  // namespace detail

// Handle to a value in a dynamically recorded computation graph. Copies share
// the same node; gradients accumulate into the node during backward().
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool requires_grad = true);

  // Records a new graph node. backward_fn receives the node whose grad buffer
  // holds dL/d(value) and must push contributions into its inputs. The
  // callback is dropped when no input requires a gradient.
  static Var make(Tensor value, std::vector<Var> inputs,
                  std::function<void(detail::Node&)> backward_fn);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor(); }

  // Reverse-mode sweep from a single-element value. Throws NumericError when
  // the seed value or any propagated gradient is non-finite.
  void backward();

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// Trainable tensor plus AdamW moment buffers.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  Var& var() { return var_; }
  const Var& var() const { return var_; }
  const Tensor& value() const { return var_.value(); }
  Tensor& mutable_value() { return var_.mutable_value(); }
  const Shape& shape() const { return var_.shape(); }
  std::size_t numel() const { return var_.value().numel(); }

  Tensor& m() { return m_; }
  Tensor& v() { return v_; }
  const Tensor& m() const { return m_; }
  const Tensor& v() const { return v_; }
  long step() const { return step_; }
  void set_step(long t) { step_ = t; }

  void zero_grad() { var_.zero_grad(); }

 private:
  std::string name_;
  Var var_;
  Tensor m_, v_;
  long step_ = 0;
};

}  // namespace bda
