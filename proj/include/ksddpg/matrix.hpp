#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace ksddpg {

/// Dense row-major matrix of 64-bit floats. Row vectors are 1xN matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix row(std::initializer_list<double> values);
    static Matrix row(const std::vector<double>& values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_str() const;
    bool all_finite() const;

    void fill(double v);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Throws DimensionError naming `where` and both shapes when a != b shape-wise.
void require_same_shape(const Matrix& a, const Matrix& b, const std::string& where);
/// Throws NumericError naming `where` if any entry is NaN/Inf.
void require_finite(const Matrix& m, const std::string& where);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

void add_in_place(Matrix& a, const Matrix& b);
void add_scaled_in_place(Matrix& a, double s, const Matrix& b);
void scale_in_place(Matrix& m, double s);

/// Concatenates row vectors (all 1xN_i) into one 1x(sum N_i) row.
Matrix concat_rows(const std::vector<const Matrix*>& parts);
/// Extracts columns [begin, begin+count) of a row vector.
Matrix slice_row(const Matrix& row, std::size_t begin, std::size_t count);

double inf_norm(const Matrix& m);
double l2_norm_sq(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace ksddpg
