#include "noether/dense.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace noether {

Dense::Dense(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ShapeError("negative matrix dimension");
    const size_t n = static_cast<size_t>(rows) * cols;
    data_ = std::shared_ptr<double[]>(new double[n ? n : 1]());
}

Dense Dense::uninit(int rows, int cols) {
    Dense d;
    if (rows < 0 || cols < 0) throw ShapeError("negative matrix dimension");
    d.rows_ = rows;
    d.cols_ = cols;
    const size_t n = static_cast<size_t>(rows) * cols;
    d.data_ = std::shared_ptr<double[]>(new double[n ? n : 1]);
    return d;
}

Dense Dense::identity(int n) {
    Dense d(n, n);
    for (int i = 0; i < n; ++i) d(i, i) = 1.0;
    return d;
}

Dense Dense::full(int rows, int cols, double v) {
    Dense d = uninit(rows, cols);
    std::fill_n(d.data(), d.size(), v);
    return d;
}

Dense Dense::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r ? static_cast<int>(rows.begin()->size()) : 0;
    Dense d = uninit(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) throw ShapeError("ragged initializer");
        int j = 0;
        for (double v : row) d(i, j++) = v;
        ++i;
    }
    return d;
}

Dense Dense::column(const std::vector<double>& v) {
    Dense d = uninit(static_cast<int>(v.size()), 1);
    std::copy(v.begin(), v.end(), d.data());
    return d;
}

bool Dense::all_finite() const {
    const double* p = data();
    for (long long i = 0; i < size(); ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

double Dense::frobenius_norm() const {
    double s = 0.0;
    const double* p = data();
    for (long long i = 0; i < size(); ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

double Dense::max_abs() const {
    double m = 0.0;
    const double* p = data();
    for (long long i = 0; i < size(); ++i) m = std::max(m, std::fabs(p[i]));
    return m;
}

Dense Dense::clone() const {
    Dense d = uninit(rows_, cols_);
    std::memcpy(d.data(), data(), sizeof(double) * size());
    return d;
}

std::vector<double> Dense::to_vector() const { return std::vector<double>(data(), data() + size()); }

std::string Dense::shape_str() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

double frob_dist(const Dense& a, const Dense& b) {
    if (!a.same_shape(b)) throw ShapeError("frob_dist: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (long long i = 0; i < a.size(); ++i) {
        const double d = a.at(i) - b.at(i);
        s += d * d;
    }
    return std::sqrt(s);
}

double rel_frob_err(const Dense& a, const Dense& b, double floor) {
    return frob_dist(a, b) / std::max(b.frobenius_norm(), floor);
}

}  // namespace noether
