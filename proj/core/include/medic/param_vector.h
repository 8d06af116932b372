#ifndef MEDIC_PARAM_VECTOR_H_
#define MEDIC_PARAM_VECTOR_H_

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medic/errors.h"
#include "medic/matrix.h"

namespace medic {

struct Segment {
  std::string name;
  Matrix values;

  friend bool operator==(const Segment&, const Segment&) = default;
};

// An ordered list of named matrices viewed as one flat vector. Two
// instantiations exist: ParamVector (model state) and GradVector (its
// derivative). They share storage layout but are distinct types so a gradient
// is never silently used as parameters.
template <class Tag>
class SegmentedVector {
 public:
  SegmentedVector() = default;

  // Zero-valued vector with the layout of `other`.
  template <class OtherTag>
  static SegmentedVector zeros_like(const SegmentedVector<OtherTag>& other) {
    SegmentedVector out;
    for (const auto& s : other.segments()) {
      out.add_segment(s.name, Matrix(s.values.rows(), s.values.cols()));
    }
    return out;
  }

  void add_segment(std::string name, Matrix values) {
    if (find(name) != nullptr) {
      throw DimensionError("duplicate segment name: " + name);
    }
    scalar_count_ += values.size();
    segments_.push_back({std::move(name), std::move(values)});
  }

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t scalar_count() const { return scalar_count_; }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  Matrix& at(std::string_view name) { return lookup(name)->values; }
  const Matrix& at(std::string_view name) const {
    return const_cast<SegmentedVector*>(this)->lookup(name)->values;
  }

  // Scalar addressed by its position in the flattened vector.
  double& scalar(std::size_t flat_index) {
    for (auto& s : segments_) {
      if (flat_index < s.values.size()) return s.values.data()[flat_index];
      flat_index -= s.values.size();
    }
    throw DimensionError("flat index out of range");
  }
  double scalar(std::size_t flat_index) const {
    return const_cast<SegmentedVector*>(this)->scalar(flat_index);
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(scalar_count_);
    for (const auto& s : segments_) {
      out.insert(out.end(), s.values.data().begin(), s.values.data().end());
    }
    return out;
  }

  template <class OtherTag>
  bool same_layout(const SegmentedVector<OtherTag>& other) const {
    const auto& o = other.segments();
    if (o.size() != segments_.size()) return false;
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (o[i].name != segments_[i].name ||
          o[i].values.rows() != segments_[i].values.rows() ||
          o[i].values.cols() != segments_[i].values.cols()) {
        return false;
      }
    }
    return true;
  }

  template <class OtherTag>
  void require_same_layout(const SegmentedVector<OtherTag>& other,
                           std::string_view context) const {
    if (!same_layout(other)) {
      throw DimensionError(std::string(context) + ": layout mismatch");
    }
  }

  // this += alpha * other, element-wise.
  template <class OtherTag>
  void add_scaled(double alpha, const SegmentedVector<OtherTag>& other) {
    require_same_layout(other, "add_scaled");
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      auto dst = segments_[i].values.data();
      auto src = other.segments()[i].values.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += alpha * src[k];
    }
  }

  void scale(double alpha) {
    for (auto& s : segments_) {
      for (double& v : s.values.data()) v *= alpha;
    }
  }

  friend bool operator==(const SegmentedVector&, const SegmentedVector&) = default;

 private:
  Segment* find(std::string_view name) {
    auto it = std::find_if(segments_.begin(), segments_.end(),
                           [&](const Segment& s) { return s.name == name; });
    return it == segments_.end() ? nullptr : &*it;
  }
  const Segment* find(std::string_view name) const {
    return const_cast<SegmentedVector*>(this)->find(name);
  }
  Segment* lookup(std::string_view name) {
    Segment* s = find(name);
    if (s == nullptr) throw DimensionError("no segment named " + std::string(name));
    return s;
  }

  std::vector<Segment> segments_;
  std::size_t scalar_count_ = 0;
};

using ParamVector = SegmentedVector<struct ParamTag>;
using GradVector = SegmentedVector<struct GradTag>;

// theta + alpha * g as a fresh vector; theta is left untouched.
ParamVector param_axpy(double alpha, const GradVector& g, const ParamVector& theta);

double grad_dot(const GradVector& a, const GradVector& b);

double grad_norm(const GradVector& g);

}  // namespace medic

#endif  // MEDIC_PARAM_VECTOR_H_
