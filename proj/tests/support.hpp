#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "advtopk/graph.hpp"

namespace testsupport {

// Central finite differences of a scalar graph output w.r.t. one leaf,
// computed purely through forward() reruns -- independent of the reverse-mode
// path it is used to check.
inline std::vector<float> fd_gradient(advtopk::Graph& g, advtopk::NodeId leaf, advtopk::NodeId root,
                                      float h = 1e-3f) {
    using advtopk::Tensor;
    const Tensor base = g.value(leaf);
    std::vector<float> grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        Tensor hi = base;
        hi[i] = base[i] + h;
        g.set_value(leaf, hi);
        g.forward();
        const double fplus = g.value(root)[0];
        Tensor lo = base;
        lo[i] = base[i] - h;
        g.set_value(leaf, lo);
        g.forward();
        const double fminus = g.value(root)[0];
        grad[i] = static_cast<float>((fplus - fminus) / (2.0 * h));
    }
    g.set_value(leaf, base);
    g.forward();
    return grad;
}

// Relative error against the gradient's own magnitude:
// |a_i - n_i| <= tol * max(floor, max_j |n_j|). Scaling by the vector rather
// than per coordinate keeps the float32 forward-pass noise in the probe from
// drowning coordinates whose true gradient is tiny.
inline bool grads_match(std::span<const float> analytic, std::span<const float> numeric, float tol,
                        float floor = 1.0f, float* worst = nullptr) {
    bool ok = analytic.size() == numeric.size();
    float scale = floor;
    for (float v : numeric) scale = std::max(scale, std::abs(v));
    float w = 0.0f;
    for (std::size_t i = 0; ok && i < analytic.size(); ++i) {
        const float err = std::abs(analytic[i] - numeric[i]) / scale;
        w = std::max(w, err);
        if (!(err <= tol)) ok = false;
    }
    if (worst) *worst = w;
    return ok;
}

inline std::vector<float> random_values(std::size_t n, std::mt19937& rng, float lo = -2.0f,
                                        float hi = 2.0f) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(n);
    for (float& x : v) x = dist(rng);
    return v;
}

// Nudges values away from a non-differentiable point so the finite-difference
// probe stays on one side of it.
inline void avoid_kink(std::vector<float>& v, float kink, float margin) {
    for (float& x : v) {
        if (std::abs(x - kink) < margin) x = kink + (x >= kink ? margin : -margin);
    }
}

}  // namespace testsupport
