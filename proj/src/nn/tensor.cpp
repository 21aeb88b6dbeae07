#include "sicu/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sicu/error.hpp"

namespace sicu::nn {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k) s += ", ";
        s += std::to_string(shape[k]);
    }
    return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
        throw InvalidInput("Tensor: " + std::to_string(data_.size()) + " values for shape " + shape_string(shape_));
    }
}

template <typename T>
void Tensor<T>::reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
        throw InvalidInput("Tensor::reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    shape_ = std::move(shape);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
    Tensor out = *this;
    out.reshape(std::move(shape));
    return out;
}

template <typename T>
void Tensor<T>::fill(T value) {
    std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& src, std::span<const std::size_t> indices) {
    if (src.rank() == 0) throw InvalidInput("gather_rows: rank-0 tensor");
    Shape shape = src.shape();
    const std::size_t stride = src.size() / shape[0];
    shape[0] = indices.size();
    Tensor<T> out(shape);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= src.dim(0)) throw InvalidInput("gather_rows: index out of range");
        std::memcpy(out.data() + k * stride, src.data() + indices[k] * stride, stride * sizeof(T));
    }
    return out;
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw InvalidInput(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                           shape_string(t.shape()));
    }
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> gather_rows(const Tensor<float>&, std::span<const std::size_t>);
template Tensor<double> gather_rows(const Tensor<double>&, std::span<const std::size_t>);
template void require_rank(const Tensor<float>&, std::size_t, const char*);
template void require_rank(const Tensor<double>&, std::size_t, const char*);

}  // namespace sicu::nn
