#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "volgan/common.hpp"

namespace volgan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("invalid shape: zero-sized dimension");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Dense row-major n-d array with an optional gradient buffer. Handle
// semantics: copies share storage, which is what lets a tape node accumulate
// into the gradient of the same tensor the caller holds. Values are treated
// as immutable once an op has consumed the tensor; only optimizer updates
// and batch-norm running statistics mutate storage in place.
template <typename S>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(const Shape& shape) {
    return TensorT(shape, std::vector<S>(shape_numel(shape), S(0)));
  }

  static TensorT full(const Shape& shape, S value) {
    return TensorT(shape, std::vector<S>(shape_numel(shape), value));
  }

  static TensorT from(const Shape& shape, std::vector<S> values) {
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    }
    return TensorT(shape, std::move(values));
  }

  static TensorT scalar(S value) { return TensorT({}, {value}); }

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t size() const { return s_->values.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape.at(i); }

  std::span<S> data() { return {s_->values.data(), s_->values.size()}; }
  std::span<const S> data() const {
    return {s_->values.data(), s_->values.size()};
  }
  S* raw() { return s_->values.data(); }
  const S* raw() const { return s_->values.data(); }
  S item() const {
    if (size() != 1) throw ContractError("item() on non-scalar tensor");
    return s_->values[0];
  }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool v) {
    s_->requires_grad = v;
    if (v) ensure_grad();
  }
  bool has_grad() const { return !s_->grad.empty(); }
  void ensure_grad() {
    if (s_->grad.empty()) s_->grad.assign(s_->values.size(), S(0));
  }
  std::span<S> grad() {
    ensure_grad();
    return {s_->grad.data(), s_->grad.size()};
  }
  std::span<const S> grad() const {
    if (s_->grad.empty()) throw ContractError("tensor has no gradient");
    return {s_->grad.data(), s_->grad.size()};
  }
  void zero_grad() {
    if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), S(0));
  }

  // Identity of the underlying storage; used by tests to reason about
  // sharing, never for hashing.
  const void* storage_id() const { return s_.get(); }

  TensorT reshaped_view(const Shape& shape) const {
    if (shape_numel(shape) != size()) {
      throw ShapeError("reshape from " + shape_str(this->shape()) + " to " +
                       shape_str(shape) + " changes element count");
    }
    TensorT t = *this;
    t.s_ = std::make_shared<Storage>(*s_);
    t.s_->shape = shape;
    return t;
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<S> values;
    std::vector<S> grad;
    bool requires_grad = false;
  };

  TensorT(const Shape& shape, std::vector<S> values)
      : s_(std::make_shared<Storage>()) {
    s_->shape = shape;
    s_->values = std::move(values);
  }

  std::shared_ptr<Storage> s_;
};

using Tensor = TensorT<float>;

// Standard-normal samples; the same seed and shape always produce the same
// bits. The shape must be non-empty with positive dims.
template <typename S = float>
TensorT<S> randn_seeded(const Shape& shape, std::uint64_t seed) {
  if (shape.empty()) throw ShapeError("randn: shape must be non-empty");
  const std::size_t n = shape_numel(shape);
  std::vector<S> values(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = static_cast<S>(rng.next_normal());
  }
  return TensorT<S>::from(shape, std::move(values));
}

// ---------------------------------------------------------------------------
// Tensor dump format: little-endian u32 rank, u32 per dim, then raw f32
// payload. Used for test fixtures, slice-stack files, and checkpoints.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("tensor dump: truncated header");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32_le(std::ostream& os, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32_le(os, u);
}

inline float get_f32_le(std::istream& is) {
  std::uint32_t u = get_u32_le(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace detail

inline void write_tensor_dump(std::ostream& os, const Tensor& t) {
  detail::put_u32_le(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    detail::put_u32_le(os, static_cast<std::uint32_t>(d));
  }
  for (float v : t.data()) detail::put_f32_le(os, v);
}

inline Tensor read_tensor_dump(std::istream& is) {
  const std::uint32_t rank = detail::get_u32_le(is);
  if (rank > 8) throw IoError("tensor dump: implausible rank");
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = detail::get_u32_le(is);
  const std::size_t n = shape_numel(shape);
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = detail::get_f32_le(is);
    if (!is) throw IoError("tensor dump: truncated payload");
  }
  return Tensor::from(shape, std::move(values));
}

}  // namespace volgan
