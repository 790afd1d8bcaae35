#include "ksddpg/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "ksddpg/errors.hpp"

namespace ksddpg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols_) {
            throw DimensionError("from_rows: ragged initializer");
        }
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix Matrix::row(std::initializer_list<double> values) {
    Matrix m(1, values.size());
    std::size_t c = 0;
    for (double v : values) m(0, c++) = v;
    return m;
}

Matrix Matrix::row(const std::vector<double>& values) {
    Matrix m(1, values.size());
    m.data_ = values;
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Matrix::fill(double v) {
    for (double& x : data_) x = v;
}

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& where) {
    if (!a.same_shape(b)) {
        throw DimensionError(where + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

void require_finite(const Matrix& m, const std::string& where) {
    if (!m.all_finite()) {
        throw NumericError(where + ": non-finite entry in " + m.shape_str() + " matrix");
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                out(i, j) += av * b(p, j);
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out(c, r) = m(r, c);
        }
    }
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= b.at(i);
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += b.at(i);
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) -= b.at(i);
    return out;
}

Matrix operator*(double s, const Matrix& m) {
    Matrix out = m;
    scale_in_place(out, s);
    return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += b.at(i);
}

void add_scaled_in_place(Matrix& a, double s, const Matrix& b) {
    require_same_shape(a, b, "add_scaled_in_place");
    for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += s * b.at(i);
}

void scale_in_place(Matrix& m, double s) {
    for (std::size_t i = 0; i < m.size(); ++i) m.at(i) *= s;
}

Matrix concat_rows(const std::vector<const Matrix*>& parts) {
    std::size_t total = 0;
    for (const Matrix* p : parts) {
        if (p->rows() != 1) {
            throw DimensionError("concat_rows: expected row vector, got " + p->shape_str());
        }
        total += p->cols();
    }
    Matrix out(1, total);
    std::size_t at = 0;
    for (const Matrix* p : parts) {
        for (std::size_t c = 0; c < p->cols(); ++c) out(0, at++) = (*p)(0, c);
    }
    return out;
}

Matrix slice_row(const Matrix& row, std::size_t begin, std::size_t count) {
    if (row.rows() != 1 || begin + count > row.cols()) {
        throw DimensionError("slice_row: [" + std::to_string(begin) + "," +
                             std::to_string(begin + count) + ") out of " + row.shape_str());
    }
    Matrix out(1, count);
    for (std::size_t c = 0; c < count; ++c) out(0, c) = row(0, begin + c);
    return out;
}

double inf_norm(const Matrix& m) {
    double best = 0.0;
    for (double v : m.values()) best = std::max(best, std::abs(v));
    return best;
}

double l2_norm_sq(const Matrix& m) {
    double s = 0.0;
    for (double v : m.values()) s += v * v;
    return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        best = std::max(best, std::abs(a.at(i) - b.at(i)));
    }
    return best;
}

} // namespace ksddpg
