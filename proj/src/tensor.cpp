#include "transatt/tensor.hpp"

#include "transatt/error.hpp"

#include <algorithm>
#include <cmath>

namespace transatt {

Norm parse_norm(const std::string& s) {
    if (s == "l1" || s == "L1") return Norm::L1;
    if (s == "l2" || s == "L2") return Norm::L2;
    fail_config("unknown norm '" + s + "' (expected l1 or l2)");
}

std::string norm_name(Norm n) { return n == Norm::L1 ? "L1" : "L2"; }

Vec matvec(const Mat& A, std::span<const double> x) {
    if (static_cast<int>(x.size()) != A.cols)
        fail_config("matvec shape mismatch: " + std::to_string(A.cols) + " vs " + std::to_string(x.size()));
    Vec y(static_cast<std::size_t>(A.rows), 0.0);
    for (int r = 0; r < A.rows; ++r) {
        double s = 0.0;
        const double* row = A.a.data() + static_cast<std::size_t>(r) * A.cols;
        for (int c = 0; c < A.cols; ++c) s += row[c] * x[c];
        y[r] = s;
    }
    return y;
}

Vec matTvec(const Mat& A, std::span<const double> x) {
    if (static_cast<int>(x.size()) != A.rows)
        fail_config("matTvec shape mismatch: " + std::to_string(A.rows) + " vs " + std::to_string(x.size()));
    Vec y(static_cast<std::size_t>(A.cols), 0.0);
    for (int r = 0; r < A.rows; ++r) {
        const double* row = A.a.data() + static_cast<std::size_t>(r) * A.cols;
        const double xr = x[r];
        for (int c = 0; c < A.cols; ++c) y[c] += xr * row[c];
    }
    return y;
}

Vec rowvec_mat(std::span<const double> p, const Mat& M) {
    if (static_cast<int>(p.size()) != M.rows)
        fail_config("rowvec_mat shape mismatch: " + std::to_string(M.rows) + " vs " + std::to_string(p.size()));
    Vec u(static_cast<std::size_t>(M.cols), 0.0);
    for (int r = 0; r < M.rows; ++r) {
        const double* row = M.a.data() + static_cast<std::size_t>(r) * M.cols;
        const double pr = p[r];
        for (int c = 0; c < M.cols; ++c) u[c] += pr * row[c];
    }
    return u;
}

void add_outer(Mat& G, std::span<const double> u, std::span<const double> v, double sc) {
    if (G.rows != static_cast<int>(u.size()) || G.cols != static_cast<int>(v.size()))
        fail_config("add_outer shape mismatch");
    for (int r = 0; r < G.rows; ++r) {
        double* row = G.a.data() + static_cast<std::size_t>(r) * G.cols;
        const double ur = sc * u[r];
        for (int c = 0; c < G.cols; ++c) row[c] += ur * v[c];
    }
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) fail_config("dot dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) fail_config("axpy dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(std::span<double> x, double alpha) {
    for (double& v : x) v *= alpha;
}

double l2_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

Vec softmax(const Vec& scores) {
    if (scores.empty()) fail_config("softmax of empty vector");
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    Vec out(scores.size(), 0.0);
    double denom = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - mx);
        denom += out[i];
    }
    for (double& v : out) v /= denom;
    return out;
}

double distance(std::span<const double> x, std::span<const double> y, Norm norm) {
    if (x.size() != y.size()) fail_config("distance dimension mismatch");
    double s = 0.0;
    if (norm == Norm::L1) {
        for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - y[i]);
        return s;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        s += d * d;
    }
    return std::sqrt(s);
}

Vec distance_grad(std::span<const double> x, std::span<const double> y, Norm norm) {
    if (x.size() != y.size()) fail_config("distance_grad dimension mismatch");
    Vec g(x.size(), 0.0);
    if (norm == Norm::L1) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = x[i] - y[i];
            g[i] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        }
        return g;
    }
    double dist = distance(x, y, Norm::L2);
    if (dist == 0.0) return g; // defined as zero at x == y
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = (x[i] - y[i]) / dist;
    return g;
}

bool all_finite(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(std::span<const double> x, const std::string& what) {
    if (!all_finite(x)) fail_numeric("non-finite values in " + what);
}

} // namespace transatt
