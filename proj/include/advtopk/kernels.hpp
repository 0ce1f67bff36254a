#pragma once

#include <cstddef>

// Dense numeric kernels behind the tensor graph. Every kernel has a serial
// reference implementation (the *_serial functions) and a dispatching variant
// that splits rows across OpenMP threads when the problem is large enough.
// Both paths produce bit-identical results: a parallel kernel only changes
// which thread computes a row, never the accumulation order within it.
namespace advtopk::kernels {

// Thread budget for kernel-level parallelism. 1 disables OpenMP dispatch.
void set_threads(int n);
int threads();
int hardware_threads();

// Below this many multiply-accumulates a kernel stays serial; forking threads
// costs more than the loop.
inline constexpr std::size_t kParallelCutoff = 1u << 16;

// y = A x           A: m x k, x: k, y: m
void matvec_serial(const float* a, const float* x, float* y, int m, int k);
void matvec(const float* a, const float* x, float* y, int m, int k);

// y = A^T x         A: m x k, x: m, y: k
void matvec_t_serial(const float* a, const float* x, float* y, int m, int k);
void matvec_t(const float* a, const float* x, float* y, int m, int k);

// A += x y^T        x: m, y: k, A: m x k
void ger_serial(const float* x, const float* y, float* a, int m, int k);
void ger(const float* x, const float* y, float* a, int m, int k);

// C = A B           A: m x k, B: k x n, C: m x n
void matmul_serial(const float* a, const float* b, float* c, int m, int k, int n);
void matmul(const float* a, const float* b, float* c, int m, int k, int n);

// C = A B^T         A: m x k, B: n x k, C: m x n
void matmul_nt_serial(const float* a, const float* b, float* c, int m, int k, int n);
void matmul_nt(const float* a, const float* b, float* c, int m, int k, int n);

// C = A^T B         A: k x m, B: k x n, C: m x n
void matmul_tn_serial(const float* a, const float* b, float* c, int m, int k, int n);
void matmul_tn(const float* a, const float* b, float* c, int m, int k, int n);

// 3x3 convolution, stride 1, zero padding 1 (same spatial size).
// x: cin x h x w, w: cout x cin x 3 x 3, bias: cout (may be null), y: cout x h x w
void conv3x3_serial(const float* x, const float* w, const float* bias, float* y,
                    int cin, int cout, int h, int wd);
void conv3x3(const float* x, const float* w, const float* bias, float* y,
             int cin, int cout, int h, int wd);

// dx += correlate(dy, w), dw += x (*) dy, db += channel sums of dy
void conv3x3_grad_input_serial(const float* dy, const float* w, float* dx,
                               int cin, int cout, int h, int wd);
void conv3x3_grad_input(const float* dy, const float* w, float* dx,
                        int cin, int cout, int h, int wd);
void conv3x3_grad_weights_serial(const float* x, const float* dy, float* dw, float* db,
                                 int cin, int cout, int h, int wd);
void conv3x3_grad_weights(const float* x, const float* dy, float* dw, float* db,
                          int cin, int cout, int h, int wd);

// Serial reductions with double accumulation.
double dot(const float* x, const float* y, std::size_t n);
double sum(const float* x, std::size_t n);

}  // namespace advtopk::kernels
