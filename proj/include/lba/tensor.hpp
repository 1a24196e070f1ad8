#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lba/common.hpp"

namespace lba {

enum class PadMode { zero, replicate };

struct Shape4 {
    i64 n = 0, c = 0, h = 0, w = 0;

    i64 numel() const { return n * c * h * w; }
    bool operator==(const Shape4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape4& o) const { return !(*this == o); }
    std::string str() const { return strprintf("(%lld,%lld,%lld,%lld)", (long long)n, (long long)c, (long long)h, (long long)w); }
};

// Dense rank-4 array, batch-channel-height-width, row-major (n major, w minor).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape4 s) : shape_(s), data_(static_cast<std::size_t>(s.numel()), 0.0) {
        require(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0, "Tensor: negative extent");
    }
    Tensor(Shape4 s, std::vector<double> d) : shape_(s), data_(std::move(d)) {
        require(static_cast<i64>(data_.size()) == s.numel(),
                strprintf("Tensor: data length %zu != numel %lld", data_.size(), (long long)s.numel()));
    }

    static Tensor full(Shape4 s, double v) {
        Tensor t(s);
        for (double& x : t.data_) x = v;
        return t;
    }
    static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, {v}); }

    const Shape4& shape() const { return shape_; }
    i64 numel() const { return shape_.numel(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& at(i64 n, i64 c, i64 y, i64 x) { return data_[idx(n, c, y, x)]; }
    double at(i64 n, i64 c, i64 y, i64 x) const { return data_[idx(n, c, y, x)]; }

    double* plane(i64 n, i64 c) { return data_.data() + (n * shape_.c + c) * shape_.h * shape_.w; }
    const double* plane(i64 n, i64 c) const { return data_.data() + (n * shape_.c + c) * shape_.h * shape_.w; }

    double* row(i64 n, i64 c, i64 y) { return plane(n, c) + y * shape_.w; }
    const double* row(i64 n, i64 c, i64 y) const { return plane(n, c) + y * shape_.w; }

    double item() const {
        require(numel() == 1, "Tensor::item: not a scalar");
        return data_[0];
    }

    const std::vector<double>& vec() const { return data_; }
    std::vector<double>& vec() { return data_; }

private:
    std::size_t idx(i64 n, i64 c, i64 y, i64 x) const {
        return static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + y) * shape_.w + x);
    }

    Shape4 shape_;
    std::vector<double> data_;
};

struct Shape3 {
    i64 n = 0, r = 0, c = 0;

    i64 numel() const { return n * r * c; }
    bool operator==(const Shape3& o) const { return n == o.n && r == o.r && c == o.c; }
    bool operator!=(const Shape3& o) const { return !(*this == o); }
    std::string str() const { return strprintf("(%lld,%lld,%lld)", (long long)n, (long long)r, (long long)c); }
};

// Batched matrix, row-major.
class Matrix3 {
public:
    Matrix3() = default;
    explicit Matrix3(Shape3 s) : shape_(s), data_(static_cast<std::size_t>(s.numel()), 0.0) {}
    Matrix3(Shape3 s, std::vector<double> d) : shape_(s), data_(std::move(d)) {
        require(static_cast<i64>(data_.size()) == s.numel(),
                strprintf("Matrix3: data length %zu != numel %lld", data_.size(), (long long)s.numel()));
    }

    const Shape3& shape() const { return shape_; }
    i64 numel() const { return shape_.numel(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& at(i64 n, i64 r, i64 c) { return data_[static_cast<std::size_t>((n * shape_.r + r) * shape_.c + c)]; }
    double at(i64 n, i64 r, i64 c) const { return data_[static_cast<std::size_t>((n * shape_.r + r) * shape_.c + c)]; }

    double* row(i64 n, i64 r) { return data_.data() + (n * shape_.r + r) * shape_.c; }
    const double* row(i64 n, i64 r) const { return data_.data() + (n * shape_.r + r) * shape_.c; }

    const std::vector<double>& vec() const { return data_; }
    std::vector<double>& vec() { return data_; }

private:
    Shape3 shape_;
    std::vector<double> data_;
};

} // namespace lba
