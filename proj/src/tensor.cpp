#include "advtopk/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace advtopk {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("shape dimensions must be positive, got " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), values_(shape_size(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) {
        throw std::invalid_argument("value count " + std::to_string(values_.size()) +
                                    " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::filled(Shape shape, float v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

void Tensor::fill(float v) {
    for (float& x : values_) x = v;
}

bool Tensor::all_finite() const {
    for (float x : values_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace advtopk
