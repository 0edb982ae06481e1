#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "labelfuse/errors.hpp"

namespace labelfuse {

// Dense row-major matrix of doubles. Small and value-semantic; all the
// algorithms in this library work on modest, desk-scale data.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return {};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_)
                throw DimensionMismatch("from_rows: ragged input");
            for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> flat() const { return {data_.data(), data_.size()}; }
    std::span<double> flat() { return {data_.data(), data_.size()}; }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
        return out;
    }

    double column_mean(std::size_t j) const {
        if (rows_ == 0) throw EmptyInput("column_mean: no rows");
        double s = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, j);
        return s / static_cast<double>(rows_);
    }

    // Select a subset of rows, in the given order.
    Matrix take_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] >= rows_) throw IndexOutOfBounds("take_rows: row index out of bounds");
            for (std::size_t j = 0; j < cols_; ++j) out(k, j) = (*this)(idx[k], j);
        }
        return out;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace labelfuse
