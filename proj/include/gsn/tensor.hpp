#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsn {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& s) {
    Index n = 1;
    for (Index d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

#define GSN_CHECK(cond, msg)                                    \
    do {                                                        \
        if (!(cond)) {                                          \
            std::ostringstream os_;                             \
            os_ << msg;                                         \
            ::gsn::fail(os_.str());                             \
        }                                                       \
    } while (0)

/// Dense row-major tensor of arbitrary rank. Feature maps use NCHW order.
/// Storage is a flat Eigen array so elementwise expressions stay in Eigen.
template <typename S>
struct Tensor {
    using Array = Eigen::Array<S, Eigen::Dynamic, 1>;

    Shape dims;
    Array v;

    Tensor() = default;
    explicit Tensor(Shape shape) : dims(std::move(shape)), v(Array::Zero(shape_numel(dims))) {
        for (Index d : dims) GSN_CHECK(d >= 1, "tensor extent must be >= 1, got shape " << shape_str(dims));
    }
    Tensor(Shape shape, S fill) : Tensor(std::move(shape)) { v.setConstant(fill); }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, S value) { return Tensor(std::move(shape), value); }
    static Tensor scalar(S value) { return Tensor({1}, value); }
    static Tensor from(Shape shape, std::initializer_list<S> values) {
        Tensor t(std::move(shape));
        GSN_CHECK((Index)values.size() == t.numel(),
                  "value count " << values.size() << " does not fill shape " << shape_str(t.dims));
        Index i = 0;
        for (S x : values) t.v[i++] = x;
        return t;
    }

    Index numel() const { return v.size(); }
    int rank() const { return (int)dims.size(); }
    Index dim(int i) const { return dims[(std::size_t)i]; }

    // NCHW accessors for rank-4 feature maps.
    Index n() const { return dims.at(0); }
    Index c() const { return dims.at(1); }
    Index h() const { return dims.at(2); }
    Index w() const { return dims.at(3); }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }

    S& operator[](Index i) { return v[i]; }
    S operator[](Index i) const { return v[i]; }

    S& at(Index i0) { return v[offset({i0})]; }
    S& at(Index i0, Index i1) { return v[offset({i0, i1})]; }
    S& at(Index i0, Index i1, Index i2) { return v[offset({i0, i1, i2})]; }
    S& at(Index i0, Index i1, Index i2, Index i3) { return v[offset({i0, i1, i2, i3})]; }
    S at(Index i0) const { return v[offset({i0})]; }
    S at(Index i0, Index i1) const { return v[offset({i0, i1})]; }
    S at(Index i0, Index i1, Index i2) const { return v[offset({i0, i1, i2})]; }
    S at(Index i0, Index i1, Index i2, Index i3) const { return v[offset({i0, i1, i2, i3})]; }

    Index offset(std::initializer_list<Index> idx) const {
        GSN_CHECK((int)idx.size() == rank(), "index rank " << idx.size() << " vs tensor rank " << rank());
        Index off = 0;
        int k = 0;
        for (Index i : idx) {
            GSN_CHECK(i >= 0 && i < dims[(std::size_t)k], "index " << i << " out of bounds for axis " << k
                                                                    << " of shape " << shape_str(dims));
            off = off * dims[(std::size_t)k] + i;
            ++k;
        }
        return off;
    }

    Tensor reshaped(Shape shape) const {
        GSN_CHECK(shape_numel(shape) == numel(),
                  "reshape " << shape_str(dims) << " -> " << shape_str(shape) << " changes element count");
        Tensor t;
        t.dims = std::move(shape);
        t.v = v;
        return t;
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }

    bool all_finite() const { return v.isFinite().all(); }

    void set_zero() { v.setZero(); }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> t;
        t.dims = dims;
        t.v = v.template cast<T>();
        return t;
    }
};

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Row-major matrix views over flat tensor storage; caller supplies the split.
template <typename S>
MatMap<S> as_matrix(Tensor<S>& t, Index rows, Index cols) {
    GSN_CHECK(rows * cols == t.numel(), "matrix view " << rows << "x" << cols << " vs numel " << t.numel());
    return MatMap<S>(t.data(), rows, cols);
}

template <typename S>
ConstMatMap<S> as_matrix(const Tensor<S>& t, Index rows, Index cols) {
    GSN_CHECK(rows * cols == t.numel(), "matrix view " << rows << "x" << cols << " vs numel " << t.numel());
    return ConstMatMap<S>(t.data(), rows, cols);
}

}  // namespace gsn
