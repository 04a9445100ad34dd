#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "volgan/common.hpp"
#include "volgan/tensor.hpp"

namespace volgan {

// Reverse-mode tape. Ops append one node per recorded primitive, in
// execution order, so inputs always precede their consumers. backward()
// walks the nodes once in reverse and accumulates into the grad buffer of
// every tensor that requires one. A tape can be consumed exactly once;
// a second backward() is a caller bug and throws.
template <typename S>
class TapeT {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void run_backward(TensorT<S>& loss) {
    if (consumed_) {
      throw ContractError("backward: tape already consumed; record a fresh "
                          "tape per step");
    }
    if (loss.rank() != 0) {
      throw ContractError("backward: loss must be a rank-0 tensor, got " +
                          shape_str(loss.shape()));
    }
    consumed_ = true;
    loss.ensure_grad();
    loss.grad()[0] += S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<BackwardFn> nodes_;
  bool consumed_ = false;
};

using Tape = TapeT<float>;

template <typename S>
void backward(TensorT<S>& loss, TapeT<S>& tape) {
  tape.run_backward(loss);
}

}  // namespace volgan
