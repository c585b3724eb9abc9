#include "vecbind/ndarray.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <sstream>

namespace vecbind {

const char* elem_type_name(ElemType t) {
    switch (t) {
        case ElemType::Real64: return "real64";
        case ElemType::Int64: return "int64";
        case ElemType::Str: return "str";
    }
    return "?";
}

std::size_t elem_type_size(ElemType t) {
    switch (t) {
        case ElemType::Real64: return sizeof(double);
        case ElemType::Int64: return sizeof(std::int64_t);
        case ElemType::Str: return sizeof(std::string);
    }
    return 0;
}

Shape::Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) {
    for (auto d : dims_)
        if (d < 0) throw ShapeError("negative dimension " + std::to_string(d));
}

Shape::Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
    for (auto d : dims_)
        if (d < 0) throw ShapeError("negative dimension " + std::to_string(d));
}

std::int64_t checked_product(std::span<const std::int64_t> dims) {
    std::int64_t p = 1;
    for (auto d : dims) {
        if (__builtin_mul_overflow(p, d, &p))
            throw CapacityError("element count exceeds signed 64-bit range");
    }
    return p;
}

std::int64_t Shape::element_count() const { return checked_product(dims_); }

Shape Shape::leading(int n) const {
    return Shape(std::vector<std::int64_t>(dims_.begin(), dims_.begin() + n));
}

Shape Shape::trailing(int n) const {
    return Shape(std::vector<std::int64_t>(dims_.end() - n, dims_.end()));
}

Shape Shape::concat(const Shape& tail) const {
    std::vector<std::int64_t> d = dims_;
    d.insert(d.end(), tail.dims_.begin(), tail.dims_.end());
    return Shape(std::move(d));
}

std::string Shape::to_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ',';
        os << dims_[i];
    }
    os << ']';
    return os.str();
}

std::int64_t linear_index(const Shape& shape, std::span<const std::int64_t> multi) {
    if (static_cast<int>(multi.size()) != shape.rank())
        throw IndexError("multi-index rank " + std::to_string(multi.size()) +
                         " does not match shape rank " + std::to_string(shape.rank()));
    std::int64_t off = 0;
    for (int i = 0; i < shape.rank(); ++i) {
        std::int64_t ix = multi[static_cast<std::size_t>(i)];
        if (ix < 0 || ix >= shape.dim(i))
            throw IndexError("index " + std::to_string(ix) + " out of bounds for dim " +
                             std::to_string(i) + " of extent " + std::to_string(shape.dim(i)));
        off = off * shape.dim(i) + ix;
    }
    return off;
}

std::int64_t linear_index(const Shape& shape, std::initializer_list<std::int64_t> multi) {
    return linear_index(shape, std::span<const std::int64_t>(multi.begin(), multi.size()));
}

std::vector<std::int64_t> multi_index(const Shape& shape, std::int64_t linear) {
    if (linear < 0 || linear >= shape.element_count())
        throw IndexError("linear index " + std::to_string(linear) + " out of range");
    std::vector<std::int64_t> out(static_cast<std::size_t>(shape.rank()));
    for (int i = shape.rank() - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = linear % shape.dim(i);
        linear /= shape.dim(i);
    }
    return out;
}

namespace {

void check_count(const Shape& shape, std::size_t n) {
    if (static_cast<std::int64_t>(n) != shape.element_count())
        throw ShapeError("data length " + std::to_string(n) + " does not match shape " +
                         shape.to_string() + " (" + std::to_string(shape.element_count()) +
                         " elements)");
}

}  // namespace

const void* NdArray::raw() const {
    switch (etype_) {
        case ElemType::Real64: return std::get<Real64Data>(data_).data();
        case ElemType::Int64: return std::get<Int64Data>(data_).data();
        case ElemType::Str: return std::get<StrData>(data_).data();
    }
    return nullptr;
}

bool NdArray::equals_bitwise(const NdArray& other) const {
    if (etype_ != other.etype_ || shape_ != other.shape_) return false;
    if (etype_ == ElemType::Str) return data_ == other.data_;
    const std::size_t bytes = static_cast<std::size_t>(shape_.element_count()) *
                              elem_type_size(etype_);
    return bytes == 0 || std::memcmp(raw(), other.raw(), bytes) == 0;
}

NdArray NdArray::make(ElemType etype, Shape shape, std::span<const double> data) {
    check_count(shape, data.size());
    if (etype == ElemType::Str)
        throw ShapeError("numeric data cannot populate a str array");
    if (etype == ElemType::Int64) {
        Int64Data d(data.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            d[i] = static_cast<std::int64_t>(data[i]);
        return NdArray(etype, std::move(shape), std::move(d));
    }
    return NdArray(etype, std::move(shape), Real64Data(data.begin(), data.end()));
}

NdArray NdArray::make(ElemType etype, Shape shape, std::span<const std::int64_t> data) {
    check_count(shape, data.size());
    if (etype == ElemType::Str)
        throw ShapeError("numeric data cannot populate a str array");
    if (etype == ElemType::Real64) {
        Real64Data d(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) d[i] = static_cast<double>(data[i]);
        return NdArray(etype, std::move(shape), std::move(d));
    }
    return NdArray(etype, std::move(shape), Int64Data(data.begin(), data.end()));
}

NdArray NdArray::make(Shape shape, std::vector<std::string> data) {
    check_count(shape, data.size());
    return NdArray(ElemType::Str, std::move(shape), std::move(data));
}

NdArray NdArray::take(Shape shape, Real64Data&& data) {
    check_count(shape, data.size());
    return NdArray(ElemType::Real64, std::move(shape), std::move(data));
}

NdArray NdArray::take(Shape shape, Int64Data&& data) {
    check_count(shape, data.size());
    return NdArray(ElemType::Int64, std::move(shape), std::move(data));
}

NdArray NdArray::take(Shape shape, StrData&& data) {
    check_count(shape, data.size());
    return NdArray(ElemType::Str, std::move(shape), std::move(data));
}

NdArray NdArray::widened_to_real() const {
    if (etype_ == ElemType::Real64) return *this;
    if (etype_ != ElemType::Int64)
        throw UsageError("cannot widen str array to real64");
    const auto& src = std::get<Int64Data>(data_);
    Real64Data d(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) d[i] = static_cast<double>(src[i]);
    return NdArray(ElemType::Real64, shape_, std::move(d));
}

std::string NdArray::to_string() const {
    std::ostringstream os;
    os << elem_type_name(etype_) << shape_.to_string() << '{';
    const std::int64_t n = size();
    const std::int64_t shown = n > 8 ? 8 : n;
    for (std::int64_t i = 0; i < shown; ++i) {
        if (i) os << ',';
        switch (etype_) {
            case ElemType::Real64: os << f64()[static_cast<std::size_t>(i)]; break;
            case ElemType::Int64: os << i64()[static_cast<std::size_t>(i)]; break;
            case ElemType::Str: os << '"' << str()[static_cast<std::size_t>(i)] << '"'; break;
        }
    }
    if (shown < n) os << ",...";
    os << '}';
    return os.str();
}

}  // namespace vecbind
