#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sicu::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. The last dimension is contiguous.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{});
    Tensor(Shape shape, std::vector<T> data);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// Element access for rank-3 tensors [n, c, l].
    T& at(std::size_t n, std::size_t c, std::size_t l) { return data_[(n * shape_[1] + c) * shape_[2] + l]; }
    const T& at(std::size_t n, std::size_t c, std::size_t l) const {
        return data_[(n * shape_[1] + c) * shape_[2] + l];
    }

    /// Pointer to row `c` of example `n` in a rank-3 tensor.
    T* row(std::size_t n, std::size_t c) { return data_.data() + (n * shape_[1] + c) * shape_[2]; }
    const T* row(std::size_t n, std::size_t c) const { return data_.data() + (n * shape_[1] + c) * shape_[2]; }

    /// Same data, new shape of equal size. Throws InvalidInput otherwise.
    void reshape(Shape shape);
    Tensor reshaped(Shape shape) const;

    void fill(T value);
    bool all_finite() const;

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

/// Copies examples `indices` (along axis 0) into a new tensor.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& src, std::span<const std::size_t> indices);

/// Throws InvalidInput naming `what` unless `t` has the given rank.
template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what);

}  // namespace sicu::nn
