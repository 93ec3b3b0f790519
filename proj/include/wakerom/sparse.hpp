#pragma once

#include <Eigen/Core>
#include <vector>

namespace wakerom {

/// Compressed sparse row matrix.
/// Column indices are strictly increasing within each row; offsets are
/// non-decreasing. check_invariants() verifies both.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(int rows, int cols) : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {}

    /// Builds from (row, col, value) triplets; duplicate entries are summed.
    static CsrMatrix from_triplets(int rows, int cols,
                                   std::vector<std::tuple<int, int, double>> triplets);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int nnz() const { return static_cast<int>(values_.size()); }

    const std::vector<int>& offsets() const { return offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
    Eigen::VectorXd multiply_transpose(const Eigen::VectorXd& x) const;
    void multiply_into(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
    void multiply_transpose_into(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;

    /// y = A * X for a dense block of columns.
    Eigen::MatrixXd multiply_dense(const Eigen::MatrixXd& x) const;

    CsrMatrix transposed() const;
    Eigen::MatrixXd to_dense() const;

    double max_abs_entry() const;

    /// Largest absolute entry of (this - other); both must share dimensions
    /// (patterns may differ).
    double max_abs_difference(const CsrMatrix& other) const;

    /// Throws StateError if the CSR layout is malformed.
    void check_invariants() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> offsets_;
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

} // namespace wakerom
