#include "advtopk/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>

namespace advtopk::kernels {

namespace {
std::atomic<int> g_threads{0};  // 0 = not set yet, fall back to hardware

bool use_parallel(std::size_t work) {
    return threads() > 1 && work >= kParallelCutoff && !omp_in_parallel();
}
}  // namespace

void set_threads(int n) { g_threads.store(std::max(1, n)); }

int threads() {
    int t = g_threads.load();
    return t > 0 ? t : hardware_threads();
}

int hardware_threads() { return std::max(1, omp_get_max_threads()); }

void matvec_serial(const float* a, const float* x, float* y, int m, int k) {
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        const float* row = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) acc += static_cast<double>(row[j]) * x[j];
        y[i] = static_cast<float>(acc);
    }
}

void matvec(const float* a, const float* x, float* y, int m, int k) {
    if (!use_parallel(static_cast<std::size_t>(m) * k)) {
        matvec_serial(a, x, y, m, k);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        const float* row = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) acc += static_cast<double>(row[j]) * x[j];
        y[i] = static_cast<float>(acc);
    }
}

void matvec_t_serial(const float* a, const float* x, float* y, int m, int k) {
    for (int j = 0; j < k; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += static_cast<double>(a[static_cast<std::size_t>(i) * k + j]) * x[i];
        y[j] = static_cast<float>(acc);
    }
}

void matvec_t(const float* a, const float* x, float* y, int m, int k) {
    if (!use_parallel(static_cast<std::size_t>(m) * k)) {
        matvec_t_serial(a, x, y, m, k);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int j = 0; j < k; ++j) {
        double acc = 0.0;
        for (int i = 0; i < m; ++i) acc += static_cast<double>(a[static_cast<std::size_t>(i) * k + j]) * x[i];
        y[j] = static_cast<float>(acc);
    }
}

void ger_serial(const float* x, const float* y, float* a, int m, int k) {
    for (int i = 0; i < m; ++i) {
        float* row = a + static_cast<std::size_t>(i) * k;
        const float xi = x[i];
        for (int j = 0; j < k; ++j) row[j] += xi * y[j];
    }
}

void ger(const float* x, const float* y, float* a, int m, int k) {
    if (!use_parallel(static_cast<std::size_t>(m) * k)) {
        ger_serial(x, y, a, m, k);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int i = 0; i < m; ++i) {
        float* row = a + static_cast<std::size_t>(i) * k;
        const float xi = x[i];
        for (int j = 0; j < k; ++j) row[j] += xi * y[j];
    }
}

namespace {
inline void matmul_row(const float* a, const float* b, float* c, int k, int n, int i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * b[static_cast<std::size_t>(p) * n + j];
        crow[j] = static_cast<float>(acc);
    }
}

inline void matmul_nt_row(const float* a, const float* b, float* c, int k, int n, int i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const float* brow = b + static_cast<std::size_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * brow[p];
        crow[j] = static_cast<float>(acc);
    }
}

inline void matmul_tn_row(const float* a, const float* b, float* c, int k, int m, int n, int i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p)
            acc += static_cast<double>(a[static_cast<std::size_t>(p) * m + i]) * b[static_cast<std::size_t>(p) * n + j];
        crow[j] = static_cast<float>(acc);
    }
}
}  // namespace

void matmul_serial(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, k, n, i);
}

void matmul(const float* a, const float* b, float* c, int m, int k, int n) {
    if (!use_parallel(static_cast<std::size_t>(m) * k * n)) {
        matmul_serial(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int i = 0; i < m; ++i) matmul_row(a, b, c, k, n, i);
}

void matmul_nt_serial(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, k, n, i);
}

void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n) {
    if (!use_parallel(static_cast<std::size_t>(m) * k * n)) {
        matmul_nt_serial(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, c, k, n, i);
}

void matmul_tn_serial(const float* a, const float* b, float* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, c, k, m, n, i);
}

void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n) {
    if (!use_parallel(static_cast<std::size_t>(m) * k * n)) {
        matmul_tn_serial(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, c, k, m, n, i);
}

namespace {
inline void conv3x3_channel(const float* x, const float* w, const float* bias, float* y,
                            int cin, int h, int wd, int oc) {
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    float* yplane = y + oc * plane;
    const float* wbase = w + static_cast<std::size_t>(oc) * cin * 9;
    const float b = bias ? bias[oc] : 0.0f;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < wd; ++c) {
            double acc = b;
            for (int ic = 0; ic < cin; ++ic) {
                const float* xplane = x + ic * plane;
                const float* ker = wbase + ic * 9;
                for (int dr = -1; dr <= 1; ++dr) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= h) continue;
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int cc = c + dc;
                        if (cc < 0 || cc >= wd) continue;
                        acc += static_cast<double>(ker[(dr + 1) * 3 + (dc + 1)]) *
                               xplane[static_cast<std::size_t>(rr) * wd + cc];
                    }
                }
            }
            yplane[static_cast<std::size_t>(r) * wd + c] = static_cast<float>(acc);
        }
    }
}
}  // namespace

void conv3x3_serial(const float* x, const float* w, const float* bias, float* y,
                    int cin, int cout, int h, int wd) {
    for (int oc = 0; oc < cout; ++oc) conv3x3_channel(x, w, bias, y, cin, h, wd, oc);
}

void conv3x3(const float* x, const float* w, const float* bias, float* y,
             int cin, int cout, int h, int wd) {
    const std::size_t work = static_cast<std::size_t>(cout) * cin * h * wd * 9;
    if (!use_parallel(work)) {
        conv3x3_serial(x, w, bias, y, cin, cout, h, wd);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int oc = 0; oc < cout; ++oc) conv3x3_channel(x, w, bias, y, cin, h, wd, oc);
}

namespace {
inline void conv3x3_grad_input_channel(const float* dy, const float* w, float* dx,
                                       int cout, int h, int wd, int cin, int ic) {
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    float* dxplane = dx + ic * plane;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < wd; ++c) {
            double acc = 0.0;
            for (int oc = 0; oc < cout; ++oc) {
                const float* dyplane = dy + oc * plane;
                const float* ker = w + (static_cast<std::size_t>(oc) * cin + ic) * 9;
                // dy position (r - dr, c - dc) used kernel tap (dr, dc) on x(r, c)
                for (int dr = -1; dr <= 1; ++dr) {
                    const int rr = r - dr;
                    if (rr < 0 || rr >= h) continue;
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int cc = c - dc;
                        if (cc < 0 || cc >= wd) continue;
                        acc += static_cast<double>(ker[(dr + 1) * 3 + (dc + 1)]) *
                               dyplane[static_cast<std::size_t>(rr) * wd + cc];
                    }
                }
            }
            dxplane[static_cast<std::size_t>(r) * wd + c] += static_cast<float>(acc);
        }
    }
}

inline void conv3x3_grad_weights_channel(const float* x, const float* dy, float* dw, float* db,
                                         int cin, int h, int wd, int oc) {
    const std::size_t plane = static_cast<std::size_t>(h) * wd;
    const float* dyplane = dy + oc * plane;
    double bacc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bacc += dyplane[i];
    if (db) db[oc] += static_cast<float>(bacc);
    for (int ic = 0; ic < cin; ++ic) {
        const float* xplane = x + ic * plane;
        float* ker = dw + (static_cast<std::size_t>(oc) * cin + ic) * 9;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                double acc = 0.0;
                for (int r = 0; r < h; ++r) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= h) continue;
                    for (int c = 0; c < wd; ++c) {
                        const int cc = c + dc;
                        if (cc < 0 || cc >= wd) continue;
                        acc += static_cast<double>(dyplane[static_cast<std::size_t>(r) * wd + c]) *
                               xplane[static_cast<std::size_t>(rr) * wd + cc];
                    }
                }
                ker[(dr + 1) * 3 + (dc + 1)] += static_cast<float>(acc);
            }
        }
    }
}
}  // namespace

void conv3x3_grad_input_serial(const float* dy, const float* w, float* dx,
                               int cin, int cout, int h, int wd) {
    for (int ic = 0; ic < cin; ++ic) conv3x3_grad_input_channel(dy, w, dx, cout, h, wd, cin, ic);
}

void conv3x3_grad_input(const float* dy, const float* w, float* dx,
                        int cin, int cout, int h, int wd) {
    const std::size_t work = static_cast<std::size_t>(cout) * cin * h * wd * 9;
    if (!use_parallel(work)) {
        conv3x3_grad_input_serial(dy, w, dx, cin, cout, h, wd);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int ic = 0; ic < cin; ++ic) conv3x3_grad_input_channel(dy, w, dx, cout, h, wd, cin, ic);
}

void conv3x3_grad_weights_serial(const float* x, const float* dy, float* dw, float* db,
                                 int cin, int cout, int h, int wd) {
    for (int oc = 0; oc < cout; ++oc) conv3x3_grad_weights_channel(x, dy, dw, db, cin, h, wd, oc);
}

void conv3x3_grad_weights(const float* x, const float* dy, float* dw, float* db,
                          int cin, int cout, int h, int wd) {
    const std::size_t work = static_cast<std::size_t>(cout) * cin * h * wd * 9;
    if (!use_parallel(work)) {
        conv3x3_grad_weights_serial(x, dy, dw, db, cin, cout, h, wd);
        return;
    }
#pragma omp parallel for num_threads(threads()) schedule(static)
    for (int oc = 0; oc < cout; ++oc) conv3x3_grad_weights_channel(x, dy, dw, db, cin, h, wd, oc);
}

double dot(const float* x, const float* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]) * y[i];
    return acc;
}

double sum(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace advtopk::kernels
