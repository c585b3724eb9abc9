#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vecbind/errors.hpp"

namespace vecbind {

/// Element types carried by NdArray. Strings are immutable scalar values,
/// not character arrays, so an n-d array of strings vectorizes like any
/// other array.
enum class ElemType { Real64, Int64, Str };

const char* elem_type_name(ElemType t);
std::size_t elem_type_size(ElemType t);

/// Row-major shape, outermost dimension first. Rank 0 (no dims) is a
/// scalar holding exactly one element. Zero extents are permitted only so
/// that index-producing operations can return empty results; the dispatch
/// layer rejects zero-element arguments.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::int64_t> dims);
    explicit Shape(std::vector<std::int64_t> dims);

    int rank() const { return static_cast<int>(dims_.size()); }
    std::span<const std::int64_t> dims() const { return dims_; }
    std::int64_t dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }

    /// Product of all dims (1 for rank 0). Throws CapacityError if the
    /// product leaves the signed 64-bit range.
    std::int64_t element_count() const;

    /// Leading `n` dims.
    Shape leading(int n) const;
    /// Trailing `n` dims.
    Shape trailing(int n) const;
    /// This shape followed by `tail`'s dims.
    Shape concat(const Shape& tail) const;

    bool operator==(const Shape&) const = default;

    std::string to_string() const;

private:
    std::vector<std::int64_t> dims_;
};

/// Multiply dims with overflow checking; empty span yields 1.
std::int64_t checked_product(std::span<const std::int64_t> dims);

/// 0-based offset of `multi_index` into the flat row-major data of `shape`.
std::int64_t linear_index(const Shape& shape, std::span<const std::int64_t> multi_index);
std::int64_t linear_index(const Shape& shape, std::initializer_list<std::int64_t> multi_index);

/// Inverse of linear_index.
std::vector<std::int64_t> multi_index(const Shape& shape, std::int64_t linear);

/// Typed n-dimensional array with dense row-major storage. Values are
/// immutable after construction and safe to share across threads.
class NdArray {
public:
    using Real64Data = std::vector<double>;
    using Int64Data = std::vector<std::int64_t>;
    using StrData = std::vector<std::string>;

    NdArray() : etype_(ElemType::Real64), shape_(), data_(Real64Data{0.0}) {}

    ElemType etype() const { return etype_; }
    const Shape& shape() const { return shape_; }
    int rank() const { return shape_.rank(); }
    std::int64_t size() const { return shape_.element_count(); }

    std::span<const double> f64() const { return std::get<Real64Data>(data_); }
    std::span<const std::int64_t> i64() const { return std::get<Int64Data>(data_); }
    std::span<const std::string> str() const { return std::get<StrData>(data_); }

    /// Raw pointer to the first element; element layout follows etype().
    const void* raw() const;

    bool operator==(const NdArray&) const = default;

    /// True when the other array has the same type, shape, and
    /// bit-identical elements (NaN payloads included).
    bool equals_bitwise(const NdArray& other) const;

    /// Build from a copy of `data`; length must match the shape.
    static NdArray make(ElemType etype, Shape shape, std::span<const double> data);
    static NdArray make(ElemType etype, Shape shape, std::span<const std::int64_t> data);
    static NdArray make(Shape shape, std::vector<std::string> data);

    /// Take ownership of a prepared buffer (the executor's output path).
    static NdArray take(Shape shape, Real64Data&& data);
    static NdArray take(Shape shape, Int64Data&& data);
    static NdArray take(Shape shape, StrData&& data);

    static NdArray scalar(double v) { return take(Shape{}, Real64Data{v}); }
    static NdArray scalar(std::int64_t v) { return take(Shape{}, Int64Data{v}); }
    static NdArray scalar(std::string v) { return take(Shape{}, StrData{std::move(v)}); }

    /// Copy with Int64 elements widened to Real64. Identity for Real64.
    NdArray widened_to_real() const;

    std::string to_string() const;

private:
    NdArray(ElemType etype, Shape shape,
            std::variant<Real64Data, Int64Data, StrData> data)
        : etype_(etype), shape_(std::move(shape)), data_(std::move(data)) {}

    ElemType etype_;
    Shape shape_;
    std::variant<Real64Data, Int64Data, StrData> data_;
};

/// make_array with explicit element type tag, mirroring the construction
/// contract: data length must equal the shape's element count.
template <typename T>
NdArray make_array(ElemType etype, Shape shape, std::span<const T> data) {
    return NdArray::make(etype, std::move(shape), data);
}

}  // namespace vecbind
