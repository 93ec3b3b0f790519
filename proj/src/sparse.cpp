#include "wakerom/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "wakerom/errors.hpp"

namespace wakerom {

CsrMatrix CsrMatrix::from_triplets(int rows, int cols,
                                   std::vector<std::tuple<int, int, double>> triplets) {
    if (rows < 0 || cols < 0) throw ArgumentError("negative matrix dimension");
    for (const auto& [r, c, v] : triplets) {
        (void)v;
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw ArgumentError("triplet index out of range");
    }
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });

    CsrMatrix m(rows, cols);
    m.col_indices_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    size_t k = 0;
    for (int r = 0; r < rows; ++r) {
        while (k < triplets.size() && std::get<0>(triplets[k]) == r) {
            const int c = std::get<1>(triplets[k]);
            double v = std::get<2>(triplets[k]);
            ++k;
            while (k < triplets.size() && std::get<0>(triplets[k]) == r &&
                   std::get<1>(triplets[k]) == c) {
                v += std::get<2>(triplets[k]);
                ++k;
            }
            m.col_indices_.push_back(c);
            m.values_.push_back(v);
        }
        m.offsets_[r + 1] = static_cast<int>(m.col_indices_.size());
    }
    return m;
}

void CsrMatrix::multiply_into(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    if (x.size() != cols_) throw ArgumentError("sparse multiply: size mismatch");
    y.resize(rows_);
    for (int r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (int k = offsets_[r]; k < offsets_[r + 1]; ++k)
            acc += values_[k] * x[col_indices_[k]];
        y[r] = acc;
    }
}

Eigen::VectorXd CsrMatrix::multiply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    multiply_into(x, y);
    return y;
}

void CsrMatrix::multiply_transpose_into(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    if (x.size() != rows_) throw ArgumentError("sparse transpose multiply: size mismatch");
    y.setZero(cols_);
    for (int r = 0; r < rows_; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (int k = offsets_[r]; k < offsets_[r + 1]; ++k)
            y[col_indices_[k]] += values_[k] * xr;
    }
}

Eigen::VectorXd CsrMatrix::multiply_transpose(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    multiply_transpose_into(x, y);
    return y;
}

Eigen::MatrixXd CsrMatrix::multiply_dense(const Eigen::MatrixXd& x) const {
    if (x.rows() != cols_) throw ArgumentError("sparse dense multiply: size mismatch");
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(rows_, x.cols());
    for (int r = 0; r < rows_; ++r)
        for (int k = offsets_[r]; k < offsets_[r + 1]; ++k)
            y.row(r) += values_[k] * x.row(col_indices_[k]);
    return y;
}

CsrMatrix CsrMatrix::transposed() const {
    std::vector<std::tuple<int, int, double>> t;
    t.reserve(values_.size());
    for (int r = 0; r < rows_; ++r)
        for (int k = offsets_[r]; k < offsets_[r + 1]; ++k)
            t.emplace_back(col_indices_[k], r, values_[k]);
    return from_triplets(cols_, rows_, std::move(t));
}

Eigen::MatrixXd CsrMatrix::to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
        for (int k = offsets_[r]; k < offsets_[r + 1]; ++k)
            d(r, col_indices_[k]) += values_[k];
    return d;
}

double CsrMatrix::max_abs_entry() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double CsrMatrix::max_abs_difference(const CsrMatrix& other) const {
    if (rows_ != other.rows_ || cols_ != other.cols_)
        throw ArgumentError("matrix difference: dimension mismatch");
    double m = 0.0;
    for (int r = 0; r < rows_; ++r) {
        int ka = offsets_[r], kb = other.offsets_[r];
        const int ea = offsets_[r + 1], eb = other.offsets_[r + 1];
        while (ka < ea || kb < eb) {
            const int ca = ka < ea ? col_indices_[ka] : cols_;
            const int cb = kb < eb ? other.col_indices_[kb] : cols_;
            if (ca == cb) {
                m = std::max(m, std::abs(values_[ka] - other.values_[kb]));
                ++ka, ++kb;
            } else if (ca < cb) {
                m = std::max(m, std::abs(values_[ka]));
                ++ka;
            } else {
                m = std::max(m, std::abs(other.values_[kb]));
                ++kb;
            }
        }
    }
    return m;
}

void CsrMatrix::check_invariants() const {
    if (offsets_.size() != static_cast<size_t>(rows_) + 1)
        throw StateError("csr: offsets size mismatch");
    if (offsets_.front() != 0 || offsets_.back() != nnz())
        throw StateError("csr: offsets endpoints wrong");
    for (int r = 0; r < rows_; ++r) {
        if (offsets_[r + 1] < offsets_[r]) throw StateError("csr: offsets decreasing");
        for (int k = offsets_[r]; k < offsets_[r + 1]; ++k) {
            if (col_indices_[k] < 0 || col_indices_[k] >= cols_)
                throw StateError("csr: column index out of range");
            if (k > offsets_[r] && col_indices_[k] <= col_indices_[k - 1])
                throw StateError("csr: column indices not strictly increasing");
        }
    }
}

} // namespace wakerom
