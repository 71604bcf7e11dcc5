#pragma once

#include <span>
#include <string>
#include <vector>

namespace transatt {

using Vec = std::vector<double>;

enum class Norm { L1, L2 };

Norm parse_norm(const std::string& s);
std::string norm_name(Norm n);

// Dense row-major matrix of doubles.
struct Mat {
    int rows = 0;
    int cols = 0;
    Vec a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

    std::size_t size() const { return a.size(); }
    void zero() { a.assign(a.size(), 0.0); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// y = A x  (A: m x n, x: n) -> m
Vec matvec(const Mat& A, std::span<const double> x);
// y = A^T x  (A: m x n, x: m) -> n
Vec matTvec(const Mat& A, std::span<const double> x);
// u = p M  (row vector p: m, M: m x n) -> n
Vec rowvec_mat(std::span<const double> p, const Mat& M);
// G += scale * u v^T
void add_outer(Mat& G, std::span<const double> u, std::span<const double> v, double scale = 1.0);

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y); // y += alpha x
void scale(std::span<double> x, double alpha);
double l2_norm(std::span<const double> x);

// Numerically stable softmax (max subtraction); entries sum to 1.
Vec softmax(const Vec& scores);

// L1 or L2 distance between equal-dimension vectors.
double distance(std::span<const double> x, std::span<const double> y, Norm norm);

// Gradient of distance(x, y, norm) w.r.t. x. For L2 at x == y the true
// gradient is undefined; returns the zero vector there. L1 uses sign(0) = 0.
Vec distance_grad(std::span<const double> x, std::span<const double> y, Norm norm);

bool all_finite(std::span<const double> x);
void require_finite(std::span<const double> x, const std::string& what);

} // namespace transatt
