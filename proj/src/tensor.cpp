#include "spectemp/tensor.hpp"

#include "spectemp/errors.hpp"

#include <algorithm>
#include <cmath>

namespace spectemp {

Tensor3::Tensor3(int n, int t, int d, double fill) : n_(n), t_(t), d_(d) {
    if (n < 0 || t < 0 || d < 0) {
        throw ShapeError("Tensor3: negative extent");
    }
    data_.assign(static_cast<std::size_t>(n) * t * d, fill);
}

Matrix Tensor3::snapshot(int t) const {
    Matrix out(n_, d_);
    for (int n = 0; n < n_; ++n)
        for (int d = 0; d < d_; ++d) out(n, d) = (*this)(n, t, d);
    return out;
}

void Tensor3::set_snapshot(int t, const Matrix& values) {
    if (values.rows() != n_ || values.cols() != d_) {
        throw ShapeError("Tensor3::set_snapshot: expected N x D block");
    }
    for (int n = 0; n < n_; ++n)
        for (int d = 0; d < d_; ++d) (*this)(n, t, d) = values(n, d);
}

Matrix Tensor3::channel(int d) const {
    Matrix out(n_, t_);
    for (int n = 0; n < n_; ++n)
        for (int t = 0; t < t_; ++t) out(n, t) = (*this)(n, t, d);
    return out;
}

void Tensor3::set_channel(int d, const Matrix& values) {
    if (values.rows() != n_ || values.cols() != t_) {
        throw ShapeError("Tensor3::set_channel: expected N x T block");
    }
    for (int n = 0; n < n_; ++n)
        for (int t = 0; t < t_; ++t) (*this)(n, t, d) = values(n, t);
}

Matrix Tensor3::packed() const {
    Matrix out(n_, static_cast<Eigen::Index>(d_) * t_);
    for (int n = 0; n < n_; ++n)
        for (int d = 0; d < d_; ++d)
            for (int t = 0; t < t_; ++t) out(n, d * t_ + t) = (*this)(n, t, d);
    return out;
}

Tensor3 Tensor3::from_packed(const Matrix& packed, int steps, int dims) {
    if (packed.cols() != static_cast<Eigen::Index>(steps) * dims) {
        throw ShapeError("Tensor3::from_packed: column count is not steps * dims");
    }
    Tensor3 out(static_cast<int>(packed.rows()), steps, dims);
    for (int n = 0; n < out.n_; ++n)
        for (int d = 0; d < dims; ++d)
            for (int t = 0; t < steps; ++t) out(n, t, d) = packed(n, d * steps + t);
    return out;
}

Tensor3 Tensor3::time_slice(int begin, int count) const {
    if (begin < 0 || count < 0 || begin + count > t_) {
        throw ShapeError("Tensor3::time_slice: range outside the time axis");
    }
    Tensor3 out(n_, count, d_);
    for (int n = 0; n < n_; ++n)
        for (int t = 0; t < count; ++t)
            for (int d = 0; d < d_; ++d) out(n, t, d) = (*this)(n, begin + t, d);
    return out;
}

double Tensor3::squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
    if (!same_shape(other)) throw ShapeError("Tensor3: shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
    if (!same_shape(other)) throw ShapeError("Tensor3: shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor3& Tensor3::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

} // namespace spectemp
