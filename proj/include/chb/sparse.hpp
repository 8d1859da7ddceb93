#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chb {

using Vector = std::vector<double>;

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
              std::vector<std::size_t> col_idx, std::vector<double> values)
        : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)),
          col_idx_(std::move(col_idx)), values_(std::move(values)) {
        if (row_ptr_.size() != rows_ + 1 || col_idx_.size() != values_.size() ||
            row_ptr_.back() != values_.size())
            throw std::invalid_argument("CsrMatrix: inconsistent storage");
    }

    static CsrMatrix diagonal(std::span<const double> d) {
        const std::size_t n = d.size();
        std::vector<std::size_t> ptr(n + 1), idx(n);
        std::iota(ptr.begin(), ptr.end(), std::size_t{0});
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        return {n, n, std::move(ptr), std::move(idx), Vector(d.begin(), d.end())};
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return values_.size(); }

    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const std::size_t> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Entry (i, j), zero when not stored.
    double at(std::size_t i, std::size_t j) const {
        const auto b = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        const auto e = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        const auto it = std::lower_bound(b, e, j);
        return (it != e && *it == j) ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
    }

    Vector diagonal_entries() const {
        Vector d(std::min(rows_, cols_), 0.0);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
        return d;
    }

    void multiply(std::span<const double> x, std::span<double> y) const {
        check_dims(x.size(), y.size(), cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
            y[i] = s;
        }
    }

    Vector operator*(std::span<const double> x) const {
        Vector y(rows_);
        multiply(x, y);
        return y;
    }

    /// y = A^T x
    void multiply_transpose(std::span<const double> x, std::span<double> y) const {
        check_dims(x.size(), y.size(), rows_, cols_);
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * x[i];
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Scaled copy.
    CsrMatrix scaled(double s) const {
        CsrMatrix r = *this;
        for (double& v : r.values_) v *= s;
        return r;
    }

    /// Symmetric elimination of prescribed entries: rows and columns of the
    /// listed dofs become identity, the known values are moved to `rhs`.
    /// `rhs[d]` is set to the prescribed value.
    void eliminate_dofs(std::span<const std::size_t> dofs, std::span<const double> values, std::span<double> rhs) {
        if (rows_ != cols_) throw std::invalid_argument("eliminate_dofs: matrix not square");
        std::vector<char> fixed(rows_, 0);
        Vector g(rows_, 0.0);
        for (std::size_t k = 0; k < dofs.size(); ++k) {
            fixed[dofs[k]] = 1;
            g[dofs[k]] = values[k];
        }
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                const std::size_t j = col_idx_[k];
                if (fixed[i]) {
                    values_[k] = (i == j) ? 1.0 : 0.0;
                } else if (fixed[j]) {
                    rhs[i] -= values_[k] * g[j];
                    values_[k] = 0.0;
                }
            }
        }
        for (std::size_t k = 0; k < dofs.size(); ++k) rhs[dofs[k]] = values[k];
    }

    /// Zero the listed columns, moving `values` times the column into `rhs`
    /// (rectangular coupling blocks).
    void eliminate_columns(std::span<const std::size_t> dofs, std::span<const double> values, std::span<double> rhs) {
        std::vector<char> fixed(cols_, 0);
        Vector g(cols_, 0.0);
        for (std::size_t k = 0; k < dofs.size(); ++k) {
            fixed[dofs[k]] = 1;
            g[dofs[k]] = values[k];
        }
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
                if (fixed[col_idx_[k]]) {
                    rhs[i] -= values_[k] * g[col_idx_[k]];
                    values_[k] = 0.0;
                }
    }

private:
    static void check_dims(std::size_t nx, std::size_t ny, std::size_t ex, std::size_t ey) {
        if (nx != ex || ny != ey)
            throw std::invalid_argument("CsrMatrix: dimension mismatch (" + std::to_string(nx) + " vs " +
                                        std::to_string(ex) + ")");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_idx_;
    std::vector<double> values_;
};

/// Accumulates (row, col, value) contributions; duplicates are summed on
/// conversion.
class TripletBuilder {
public:
    TripletBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    void reserve(std::size_t n) { entries_.reserve(n); }
    void add(std::size_t i, std::size_t j, double v) { entries_.push_back({i, j, v}); }

    CsrMatrix build() const {
        std::vector<std::size_t> count(rows_ + 1, 0);
        for (const auto& e : entries_) {
            if (e.row >= rows_ || e.col >= cols_) throw std::out_of_range("TripletBuilder: index out of range");
            ++count[e.row + 1];
        }
        for (std::size_t i = 0; i < rows_; ++i) count[i + 1] += count[i];
        std::vector<std::size_t> cols(entries_.size());
        Vector vals(entries_.size());
        {
            std::vector<std::size_t> pos(count.begin(), count.end() - 1);
            for (const auto& e : entries_) {
                cols[pos[e.row]] = e.col;
                vals[pos[e.row]++] = e.value;
            }
        }
        // sort each row by column and merge duplicates
        std::vector<std::size_t> ptr(rows_ + 1, 0), idx;
        Vector out;
        idx.reserve(entries_.size());
        out.reserve(entries_.size());
        std::vector<std::size_t> perm;
        for (std::size_t i = 0; i < rows_; ++i) {
            const std::size_t b = count[i], e = count[i + 1];
            perm.resize(e - b);
            std::iota(perm.begin(), perm.end(), b);
            std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t c) { return cols[a] < cols[c]; });
            for (std::size_t p : perm) {
                if (idx.size() > ptr[i] && idx.back() == cols[p]) {
                    out.back() += vals[p];
                } else {
                    idx.push_back(cols[p]);
                    out.push_back(vals[p]);
                }
            }
            ptr[i + 1] = idx.size();
        }
        return {rows_, cols_, std::move(ptr), std::move(idx), std::move(out)};
    }

private:
    struct Entry {
        std::size_t row, col;
        double value;
    };
    std::size_t rows_, cols_;
    std::vector<Entry> entries_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_norm(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

} // namespace chb
