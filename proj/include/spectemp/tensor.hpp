#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace spectemp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense N x T x D real array (variables x time steps x feature dims),
// stored row-major as [n][t][d].
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(int n, int t, int d, double fill = 0.0);

    int nodes() const { return n_; }
    int steps() const { return t_; }
    int dims() const { return d_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int n, int t, int d) { return data_[index(n, t, d)]; }
    double operator()(int n, int t, int d) const { return data_[index(n, t, d)]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // X_t := X[:, t, :] as an N x D matrix.
    Matrix snapshot(int t) const;
    void set_snapshot(int t, const Matrix& values);

    // X[:, :, d] as an N x T matrix.
    Matrix channel(int d) const;
    void set_channel(int d, const Matrix& values);

    // Dim-major packing used by the model: row n, column d*T + t.
    Matrix packed() const;
    static Tensor3 from_packed(const Matrix& packed, int steps, int dims);

    // Copy of time steps [begin, begin + count).
    Tensor3 time_slice(int begin, int count) const;

    double squared_norm() const;

    Tensor3& operator+=(const Tensor3& other);
    Tensor3& operator-=(const Tensor3& other);
    Tensor3& operator*=(double s);

    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
    friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

    bool same_shape(const Tensor3& other) const {
        return n_ == other.n_ && t_ == other.t_ && d_ == other.d_;
    }

private:
    std::size_t index(int n, int t, int d) const {
        return (static_cast<std::size_t>(n) * t_ + t) * d_ + d;
    }

    int n_ = 0;
    int t_ = 0;
    int d_ = 0;
    std::vector<double> data_;
};

// Largest absolute elementwise difference; throws ShapeError on mismatch.
double max_abs_diff(const Tensor3& a, const Tensor3& b);

} // namespace spectemp
