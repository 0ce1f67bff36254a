#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace advtopk {

// Dimensions of a dense tensor. Rank 1 vectors cover most of the pipeline;
// rank 2 matrices carry affine weights, rank 3/4 appear only around conv layers.
using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Dense float32 tensor. Reductions and dot products accumulate in double
// before truncating back to float.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> values);

    static Tensor scalar(float v);
    static Tensor filled(Shape shape, float v);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    float* data() { return values_.data(); }
    const float* data() const { return values_.data(); }
    float& operator[](std::size_t i) { return values_[i]; }
    float operator[](std::size_t i) const { return values_[i]; }

    std::span<const float> values() const { return values_; }
    std::span<float> values() { return values_; }
    std::vector<float> to_vector() const { return values_; }

    void fill(float v);
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<float> values_;
};

}  // namespace advtopk
