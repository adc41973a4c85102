#pragma once

#include <cstddef>
#include <vector>

namespace wesar {

// Dense row-major matrix of 64-bit floats; the universal numeric carrier.
// Value semantics throughout: copying copies the buffer.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // length rows*cols at all times

    Matrix() = default;
    Matrix(int r, int c);  // zero-initialized; throws on non-positive dims

    double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return data.size(); }

    void zero();
    void scale(double a);                      // *this *= a
    void add_scaled(const Matrix& x, double a);  // *this += a*x (same shape)
    bool all_finite() const;
};

// c = a*b.  Deterministic reduction order for a fixed build; dimension
// mismatch throws.  The _into/_acc forms write into a preallocated output
// (acc accumulates, i.e. c += a*b); the value form allocates.
Matrix matmul(const Matrix& a, const Matrix& b);
void matmul_into(Matrix& c, const Matrix& a, const Matrix& b);
void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b);

// c = a^T * b (and accumulating form) without materializing the transpose;
// a is (k x m), b is (k x n), c is (m x n).  This is the natural shape of
// weight-gradient accumulation dW += dY^T * X.
void matmul_ta_into(Matrix& c, const Matrix& a, const Matrix& b);
void matmul_ta_acc(Matrix& c, const Matrix& a, const Matrix& b);

// Raw-pointer forms over row-major blocks embedded in larger parents, with
// explicit leading dimensions (row strides in elements).  matmul_block_into
// computes the (m x n) block c = a*b from an (m x k) block a and a (k x n)
// block b.  matmul_block_ta_acc accumulates c += a^T * b where a is stored
// (k x m) with stride lda.  Same reduction order as the Matrix forms.
void matmul_block_into(double* c, int ldc, const double* a, int lda, const double* b, int ldb,
                       int m, int k, int n);
void matmul_block_ta_acc(double* c, int ldc, const double* a, int lda, const double* b, int ldb,
                         int m, int k, int n);

Matrix transpose(const Matrix& a);
void transpose_into(Matrix& out, const Matrix& a);

// Square root of the sum of squared entries, accumulated in index order.
double fro_norm(const Matrix& m);

// Sum of elementwise products of two same-shape matrices.
double dot(const Matrix& a, const Matrix& b);

}  // namespace wesar
