#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "trajseg/errors.hpp"

namespace trajseg {

/// Shaped row-major buffer; the interchange form for weight blocks on disk.
template <typename S>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<S> values;
    std::optional<std::vector<S>> grad;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<S> values_)
        : shape(std::move(shape_)), values(std::move(values_)) {
        validate();
    }

    [[nodiscard]] std::size_t numel() const {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    void validate() const {
        for (std::size_t d : shape) {
            if (d == 0) throw ShapeError("tensor dimensions must be positive");
        }
        if (numel() != values.size()) throw ShapeError("tensor value count does not match shape");
        if (grad && grad->size() != values.size()) throw ShapeError("tensor gradient shape mismatch");
    }

    [[nodiscard]] bool operator==(const Tensor&) const = default;
};

}  // namespace trajseg
