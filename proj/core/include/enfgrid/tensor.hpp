#pragma once

#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

namespace enfgrid {

// Dense row-major tensor. float carries training and inference; double backs
// the finite-difference gradient checks.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), T{});
    }

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        assert(data_.size() == count(shape_));
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t i, std::size_t j) {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    const T& at(std::size_t i, std::size_t j) const {
        assert(rank() == 2);
        return data_[i * shape_[1] + j];
    }
    T& at(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3);
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }
    void zero() { fill(T{}); }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        assert(count(shape) == data_.size());
        return Tensor(std::move(shape), data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               [](std::size_t a, std::size_t b) { return a * b; });
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

} // namespace enfgrid
