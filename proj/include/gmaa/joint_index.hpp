#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "gmaa/errors.hpp"

namespace gmaa {

/// Mixed-radix bijection between per-agent index tuples and one joint index.
/// Agent 0 is the most significant digit, so joint indices enumerate tuples
/// in lexicographic order.
class JointIndex {
 public:
  JointIndex() = default;

  explicit JointIndex(std::vector<int> sizes) : sizes_(std::move(sizes)), strides_(sizes_.size()) {
    std::size_t stride = 1;
    for (std::size_t i = sizes_.size(); i-- > 0;) {
      if (sizes_[i] < 1) throw ModelError("JointIndex: component size must be >= 1");
      strides_[i] = static_cast<int>(stride);
      stride *= static_cast<std::size_t>(sizes_[i]);
    }
    count_ = static_cast<int>(stride);
  }

  int count() const noexcept { return count_; }
  int arity() const noexcept { return static_cast<int>(sizes_.size()); }
  int size(int component) const { return sizes_[component]; }
  const std::vector<int>& sizes() const noexcept { return sizes_; }

  int encode(std::span<const int> parts) const {
    int joint = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) joint += parts[i] * strides_[i];
    return joint;
  }

  std::vector<int> decode(int joint) const {
    std::vector<int> parts(sizes_.size());
    for (std::size_t i = 0; i < sizes_.size(); ++i) parts[i] = (joint / strides_[i]) % sizes_[i];
    return parts;
  }

  int component(int joint, int i) const { return (joint / strides_[i]) % sizes_[i]; }

  bool operator==(const JointIndex& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> strides_;
  int count_ = 1;
};

}  // namespace gmaa
