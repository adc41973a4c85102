#include "wesar/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

namespace wesar {
namespace {

void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("matrix: ") + what);
}

// Two multiply kernels, selected by shape.  Both accumulate each output
// element strictly in ascending-p order, so results are deterministic for a
// fixed build regardless of which kernel runs.
//
// mm_tiled keeps a 6x8 block of C in registers (the compiler turns the local
// array into 12 ymm accumulators, leaving room for two B vectors and one
// broadcast); it wins whenever k is large enough to amortize the tile setup.
// mm_ikj streams B row by row and wins for small k (tile startup dominates)
// and for very wide n (C rows stop fitting in L1).
//
// Both kernels accumulate each C element strictly in p order, so the result
// is bitwise identical to the naive triple loop regardless of tile shape.
//
// TA reads A transposed (A stored k x m, logical m x k) which is the natural
// layout for gradient accumulation dW += dY^T X; ACC accumulates into C.

template <bool TA, bool ACC>
void mm_tiled(const double* __restrict a, const double* __restrict b_base,
              double* __restrict c_base, int m, int k, int n, int lda, int ldb, int ldc) {
    constexpr int NW = 8;
#if defined(__AVX2__) && defined(__FMA__)
    constexpr int MR = 6;
#else
    constexpr int MR = 4;
#endif
    int jp = 0;
    for (; jp + NW <= n; jp += NW) {
        int i = 0;
#if defined(__AVX2__) && defined(__FMA__)
        // gcc spills a 6x8 accumulator array, so spell out the registers.
        for (; i + MR <= m; i += MR) {
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
            __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();
            const double* b = b_base + jp;
            for (int p = 0; p < k; ++p, b += ldb) {
                const __m256d b0 = _mm256_loadu_pd(b);
                const __m256d b1 = _mm256_loadu_pd(b + 4);
                __m256d v;
                if constexpr (TA) {
                    const double* ap = a + static_cast<std::size_t>(p) * lda + i;
                    v = _mm256_set1_pd(ap[0]);
                    c00 = _mm256_fmadd_pd(v, b0, c00); c01 = _mm256_fmadd_pd(v, b1, c01);
                    v = _mm256_set1_pd(ap[1]);
                    c10 = _mm256_fmadd_pd(v, b0, c10); c11 = _mm256_fmadd_pd(v, b1, c11);
                    v = _mm256_set1_pd(ap[2]);
                    c20 = _mm256_fmadd_pd(v, b0, c20); c21 = _mm256_fmadd_pd(v, b1, c21);
                    v = _mm256_set1_pd(ap[3]);
                    c30 = _mm256_fmadd_pd(v, b0, c30); c31 = _mm256_fmadd_pd(v, b1, c31);
                    v = _mm256_set1_pd(ap[4]);
                    c40 = _mm256_fmadd_pd(v, b0, c40); c41 = _mm256_fmadd_pd(v, b1, c41);
                    v = _mm256_set1_pd(ap[5]);
                    c50 = _mm256_fmadd_pd(v, b0, c50); c51 = _mm256_fmadd_pd(v, b1, c51);
                } else {
                    const double* ap = a + static_cast<std::size_t>(i) * lda + p;
                    v = _mm256_set1_pd(ap[0]);
                    c00 = _mm256_fmadd_pd(v, b0, c00); c01 = _mm256_fmadd_pd(v, b1, c01);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda)]);
                    c10 = _mm256_fmadd_pd(v, b0, c10); c11 = _mm256_fmadd_pd(v, b1, c11);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda) * 2]);
                    c20 = _mm256_fmadd_pd(v, b0, c20); c21 = _mm256_fmadd_pd(v, b1, c21);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda) * 3]);
                    c30 = _mm256_fmadd_pd(v, b0, c30); c31 = _mm256_fmadd_pd(v, b1, c31);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda) * 4]);
                    c40 = _mm256_fmadd_pd(v, b0, c40); c41 = _mm256_fmadd_pd(v, b1, c41);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda) * 5]);
                    c50 = _mm256_fmadd_pd(v, b0, c50); c51 = _mm256_fmadd_pd(v, b1, c51);
                }
            }
            double* crow = c_base + static_cast<std::size_t>(i) * ldc + jp;
            auto flush = [&](double* cr, __m256d lo, __m256d hi) {
                if constexpr (ACC) {
                    lo = _mm256_add_pd(_mm256_loadu_pd(cr), lo);
                    hi = _mm256_add_pd(_mm256_loadu_pd(cr + 4), hi);
                }
                _mm256_storeu_pd(cr, lo);
                _mm256_storeu_pd(cr + 4, hi);
            };
            flush(crow, c00, c01); crow += ldc;
            flush(crow, c10, c11); crow += ldc;
            flush(crow, c20, c21); crow += ldc;
            flush(crow, c30, c31); crow += ldc;
            flush(crow, c40, c41); crow += ldc;
            flush(crow, c50, c51);
        }
        // 4-row tile for the leftover rows (d and ctx values hit m % 6 == 4
        // constantly, and the scalar row path below is several times slower)
        for (; i + 4 <= m; i += 4) {
            __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
            __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
            __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
            __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
            const double* b = b_base + jp;
            for (int p = 0; p < k; ++p, b += ldb) {
                const __m256d b0 = _mm256_loadu_pd(b);
                const __m256d b1 = _mm256_loadu_pd(b + 4);
                __m256d v;
                if constexpr (TA) {
                    const double* ap = a + static_cast<std::size_t>(p) * lda + i;
                    v = _mm256_set1_pd(ap[0]);
                    c00 = _mm256_fmadd_pd(v, b0, c00); c01 = _mm256_fmadd_pd(v, b1, c01);
                    v = _mm256_set1_pd(ap[1]);
                    c10 = _mm256_fmadd_pd(v, b0, c10); c11 = _mm256_fmadd_pd(v, b1, c11);
                    v = _mm256_set1_pd(ap[2]);
                    c20 = _mm256_fmadd_pd(v, b0, c20); c21 = _mm256_fmadd_pd(v, b1, c21);
                    v = _mm256_set1_pd(ap[3]);
                    c30 = _mm256_fmadd_pd(v, b0, c30); c31 = _mm256_fmadd_pd(v, b1, c31);
                } else {
                    const double* ap = a + static_cast<std::size_t>(i) * lda + p;
                    v = _mm256_set1_pd(ap[0]);
                    c00 = _mm256_fmadd_pd(v, b0, c00); c01 = _mm256_fmadd_pd(v, b1, c01);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda)]);
                    c10 = _mm256_fmadd_pd(v, b0, c10); c11 = _mm256_fmadd_pd(v, b1, c11);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda) * 2]);
                    c20 = _mm256_fmadd_pd(v, b0, c20); c21 = _mm256_fmadd_pd(v, b1, c21);
                    v = _mm256_set1_pd(ap[static_cast<std::size_t>(lda) * 3]);
                    c30 = _mm256_fmadd_pd(v, b0, c30); c31 = _mm256_fmadd_pd(v, b1, c31);
                }
            }
            double* crow = c_base + static_cast<std::size_t>(i) * ldc + jp;
            auto flush = [&](double* cr, __m256d lo, __m256d hi) {
                if constexpr (ACC) {
                    lo = _mm256_add_pd(_mm256_loadu_pd(cr), lo);
                    hi = _mm256_add_pd(_mm256_loadu_pd(cr + 4), hi);
                }
                _mm256_storeu_pd(cr, lo);
                _mm256_storeu_pd(cr + 4, hi);
            };
            flush(crow, c00, c01); crow += ldc;
            flush(crow, c10, c11); crow += ldc;
            flush(crow, c20, c21); crow += ldc;
            flush(crow, c30, c31);
        }
#else
        for (; i + MR <= m; i += MR) {
            double acc[MR][NW] = {};
            const double* b = b_base + jp;
            for (int p = 0; p < k; ++p, b += ldb) {
                double v0, v1, v2, v3;
                if constexpr (TA) {
                    const double* ap = a + static_cast<std::size_t>(p) * lda + i;
                    v0 = ap[0]; v1 = ap[1]; v2 = ap[2]; v3 = ap[3];
                } else {
                    v0 = a[static_cast<std::size_t>(i + 0) * lda + p];
                    v1 = a[static_cast<std::size_t>(i + 1) * lda + p];
                    v2 = a[static_cast<std::size_t>(i + 2) * lda + p];
                    v3 = a[static_cast<std::size_t>(i + 3) * lda + p];
                }
                for (int j = 0; j < NW; ++j) {
                    const double bj = b[j];
                    acc[0][j] += v0 * bj;
                    acc[1][j] += v1 * bj;
                    acc[2][j] += v2 * bj;
                    acc[3][j] += v3 * bj;
                }
            }
            for (int r = 0; r < MR; ++r) {
                double* crow = c_base + static_cast<std::size_t>(i + r) * ldc + jp;
                for (int j = 0; j < NW; ++j) crow[j] = ACC ? crow[j] + acc[r][j] : acc[r][j];
            }
        }
#endif
        for (; i < m; ++i) {
            double acc[NW] = {};
            const double* b = b_base + jp;
            for (int p = 0; p < k; ++p, b += ldb) {
                const double av = TA ? a[static_cast<std::size_t>(p) * lda + i]
                                     : a[static_cast<std::size_t>(i) * lda + p];
                for (int j = 0; j < NW; ++j) acc[j] += av * b[j];
            }
            double* crow = c_base + static_cast<std::size_t>(i) * ldc + jp;
            for (int j = 0; j < NW; ++j) crow[j] = ACC ? crow[j] + acc[j] : acc[j];
        }
    }
    if (jp < n) {
        const int nt = n - jp;
        for (int i = 0; i < m; ++i) {
            double acc[NW] = {};
            const double* b = b_base + jp;
            for (int p = 0; p < k; ++p, b += ldb) {
                const double av = TA ? a[static_cast<std::size_t>(p) * lda + i]
                                     : a[static_cast<std::size_t>(i) * lda + p];
                for (int j = 0; j < nt; ++j) acc[j] += av * b[j];
            }
            double* crow = c_base + static_cast<std::size_t>(i) * ldc + jp;
            for (int j = 0; j < nt; ++j) crow[j] = ACC ? crow[j] + acc[j] : acc[j];
        }
    }
}

template <bool TA, bool ACC>
void mm_ikj(const double* __restrict a, const double* __restrict b_base,
            double* __restrict c_base, int m, int k, int n, int lda, int ldb, int ldc) {
    for (int i = 0; i < m; ++i) {
        double* __restrict c = c_base + static_cast<std::size_t>(i) * ldc;
        if constexpr (!ACC) {
            for (int j = 0; j < n; ++j) c[j] = 0.0;
        }
        for (int p = 0; p < k; ++p) {
            const double av = TA ? a[static_cast<std::size_t>(p) * lda + i]
                                 : a[static_cast<std::size_t>(i) * lda + p];
            const double* __restrict b = b_base + static_cast<std::size_t>(p) * ldb;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

template <bool TA, bool ACC>
void mm_dispatch(const double* a, const double* b, double* c, int m, int k, int n, int lda,
                 int ldb, int ldc) {
    if (k <= 8 || n >= 1024) {
        mm_ikj<TA, ACC>(a, b, c, m, k, n, lda, ldb, ldc);
    } else {
        mm_tiled<TA, ACC>(a, b, c, m, k, n, lda, ldb, ldc);
    }
}

void check_ab(const Matrix& c, const Matrix& a, const Matrix& b) {
    check(a.cols == b.rows, "inner dimensions disagree");
    check(c.rows == a.rows && c.cols == b.cols, "output shape disagrees");
    check(&c != &a && &c != &b, "output aliases an input");
}

void check_tab(const Matrix& c, const Matrix& a, const Matrix& b) {
    check(a.rows == b.rows, "inner dimensions disagree (a^T b)");
    check(c.rows == a.cols && c.cols == b.cols, "output shape disagrees");
    check(&c != &a && &c != &b, "output aliases an input");
}

}  // namespace

Matrix::Matrix(int r, int c) : rows(r), cols(c) {
    check(r > 0 && c > 0, "dimensions must be positive");
    data.assign(static_cast<std::size_t>(r) * c, 0.0);
}

void Matrix::zero() {
    for (auto& v : data) v = 0.0;
}

void Matrix::scale(double a) {
    for (auto& v : data) v *= a;
}

void Matrix::add_scaled(const Matrix& x, double a) {
    check(rows == x.rows && cols == x.cols, "add_scaled shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += a * x.data[i];
}

bool Matrix::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    check(a.cols == b.rows, "inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    mm_dispatch<false, false>(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols,
                              a.cols, b.cols, b.cols);
    return c;
}

void matmul_into(Matrix& c, const Matrix& a, const Matrix& b) {
    check_ab(c, a, b);
    mm_dispatch<false, false>(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols,
                              a.cols, b.cols, b.cols);
}

void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b) {
    check_ab(c, a, b);
    mm_dispatch<false, true>(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols,
                             a.cols, b.cols, b.cols);
}

void matmul_ta_into(Matrix& c, const Matrix& a, const Matrix& b) {
    check_tab(c, a, b);
    mm_dispatch<true, false>(a.data.data(), b.data.data(), c.data.data(), a.cols, a.rows, b.cols,
                             a.cols, b.cols, b.cols);
}

void matmul_ta_acc(Matrix& c, const Matrix& a, const Matrix& b) {
    check_tab(c, a, b);
    mm_dispatch<true, true>(a.data.data(), b.data.data(), c.data.data(), a.cols, a.rows, b.cols,
                            a.cols, b.cols, b.cols);
}

void matmul_block_into(double* c, int ldc, const double* a, int lda, const double* b, int ldb,
                       int m, int k, int n) {
    check(m > 0 && k > 0 && n > 0, "block dimensions must be positive");
    check(lda >= k && ldb >= n && ldc >= n, "block stride smaller than row length");
    mm_dispatch<false, false>(a, b, c, m, k, n, lda, ldb, ldc);
}

void matmul_block_ta_acc(double* c, int ldc, const double* a, int lda, const double* b, int ldb,
                         int m, int k, int n) {
    check(m > 0 && k > 0 && n > 0, "block dimensions must be positive");
    check(lda >= m && ldb >= n && ldc >= n, "block stride smaller than row length");
    mm_dispatch<true, true>(a, b, c, m, k, n, lda, ldb, ldc);
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    transpose_into(out, a);
    return out;
}

void transpose_into(Matrix& out, const Matrix& a) {
    check(out.rows == a.cols && out.cols == a.rows, "transpose shape mismatch");
    check(&out != &a, "transpose cannot run in place");
    for (int i = 0; i < a.rows; ++i) {
        const double* src = a.row(i);
        for (int j = 0; j < a.cols; ++j) out.data[static_cast<std::size_t>(j) * a.rows + i] = src[j];
    }
}

double fro_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data) s += v * v;
    return std::sqrt(s);
}

double dot(const Matrix& a, const Matrix& b) {
    check(a.rows == b.rows && a.cols == b.cols, "dot shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

}  // namespace wesar
