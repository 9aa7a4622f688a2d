#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace noether {

/// Error classes map to the failure categories used across the library:
/// shape mismatches, invalid values/domains, and numerical breakdown.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of 64-bit floats. Copies share the underlying
/// buffer; treat a Dense as immutable once it has been handed to another
/// component (the graph engine relies on this).
class Dense {
  public:
    Dense() = default;
    Dense(int rows, int cols);  // zero-initialized

    static Dense uninit(int rows, int cols);
    static Dense zeros(int rows, int cols) { return Dense(rows, cols); }
    static Dense identity(int n);
    static Dense full(int rows, int cols, double v);
    static Dense from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Dense column(const std::vector<double>& v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    long long size() const { return static_cast<long long>(rows_) * cols_; }
    bool empty() const { return size() == 0; }
    bool same_shape(const Dense& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    const double* data() const { return data_.get(); }
    double* data() { return data_.get(); }

    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double at(long long i) const { return data_[i]; }

    bool all_finite() const;
    double frobenius_norm() const;
    double max_abs() const;

    Dense clone() const;
    std::vector<double> to_vector() const;
    std::string shape_str() const;

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::shared_ptr<double[]> data_;
};

/// Frobenius distance ‖a−b‖_F; shapes must match.
double frob_dist(const Dense& a, const Dense& b);

/// ‖a−b‖_F / max(‖b‖_F, floor) — relative error against reference b.
double rel_frob_err(const Dense& a, const Dense& b, double floor = 1e-300);

}  // namespace noether
